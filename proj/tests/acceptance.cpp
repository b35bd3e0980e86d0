// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "lqg_adapt/experiment.hpp"

using namespace lqg_adapt;
namespace fs = std::filesystem;

namespace {

// Tolerances and published reference values.
constexpr double kReferenceJStar = 0.0707;
constexpr double kJStarTol = 5e-4;
constexpr std::size_t kOptimalSeeds = 10;
constexpr std::size_t kOptimalSteps = 100000;
constexpr double kOptimalSe = 3.0;
constexpr std::size_t kMinSeeds = 20;
constexpr double kCostLow = 0.070, kCostHigh = 0.082, kOrderSlack = 0.002;
constexpr double kReferenceNaive = 0.0744, kReferenceIf2e = 0.0742, kFullTol = 0.005;
constexpr double kSlopeLow = 0.4, kSlopeHigh = 0.7;
constexpr std::size_t kSlopeFirstEpisode = 3;
constexpr double kSwitchLow = 26, kSwitchHigh = 50;
constexpr double kFimGrowth = 10.0;
constexpr double kPsdRelTol = 1e-10;
constexpr std::size_t kFimEarlyT = 100;
constexpr std::size_t kRandomSystems = 100;
constexpr double kRoundTripTol = 1e-8, kEigTol = 1e-6;
constexpr double kRlsTol = 1e-8;
constexpr std::size_t kFimReplications = 10000;
constexpr double kFimRelTol = 0.10;
constexpr double kPeRatio = 0.5;
constexpr double kInversionTol = 0.10;

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : std::nan("");
}

std::vector<std::complex<double>> sorted_eigs(const Matrix& M) {
  Eigen::EigenSolver<Matrix> es(M, false);
  std::vector<std::complex<double>> ev(es.eigenvalues().data(),
                                       es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return ev;
}

double spectral_norm(const Matrix& M) {
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

struct Predictor {
  SystemParams params;
  Matrix F;
};

Predictor random_predictor(Rng& rng, Eigen::Index nx, Eigen::Index ny, Eigen::Index nu,
                           double max_rho) {
  for (;;) {
    Predictor p;
    p.params.A = Matrix(nx, nx);
    p.params.B = Matrix(nx, nu);
    p.params.C = Matrix(ny, nx);
    p.F = Matrix(nx, ny);
    for (auto* m : {&p.params.A, &p.params.B, &p.params.C, &p.F}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.normal();
    }
    p.params.A *= 0.9 * max_rho / std::max(spectral_radius(p.params.A), 1e-3);
    p.F *= 0.2;
    if (spectral_radius(p.params.A - p.F * p.params.C) > max_rho) p.F.setZero();
    if (spectral_radius(p.params.A - p.F * p.params.C) <= max_rho &&
        numerical_rank(controllability_matrix(p.params.A, p.params.B)) == nx &&
        numerical_rank(observability_matrix(p.params.A, p.params.C)) == nx) {
      return p;
    }
  }
}

std::map<Algorithm, std::vector<const RunSummary*>> successful(const std::vector<RunSummary>& runs) {
  std::map<Algorithm, std::vector<const RunSummary*>> out;
  for (const auto& r : runs) {
    if (!r.failed) out[r.algorithm].push_back(&r);
  }
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

void criterion_1(const ExperimentConfig& c) {
  const double j = optimal_cost(c.system, c.noise(), c.cost);
  report(1, std::abs(j - kReferenceJStar) <= kJStarTol,
         fmt("J* = %.7f", j) + fmt(" (reference %.4f", kReferenceJStar) + fmt(", tol %.0e)", kJStarTol));
}

void criterion_2(const ExperimentConfig& c) {
  const double j = optimal_cost(c.system, c.noise(), c.cost);
  std::vector<double> avgs;
  for (std::uint64_t s = 1; s <= kOptimalSeeds; ++s) {
    AlgoConfig a = c.algo_config(Algorithm::kOptimal, s);
    a.oracle_diagnostics = false;
    // T_w * 2^k_fin >= 1e5 steps; average over the first 1e5.
    EpisodeSchedule sched{c.schedule.T_w, 0};
    while (sched.horizon() < kOptimalSteps) ++sched.k_fin;
    const RunTrace tr = run_full(a, sched, c.system, c.noise(), c.cost);
    double sum = 0.0;
    for (std::size_t t = 0; t < kOptimalSteps; ++t) sum += tr.steps[t].cost;
    avgs.push_back(sum / kOptimalSteps);
  }
  const double m = mean(avgs);
  const double se = sample_std(avgs) / std::sqrt(static_cast<double>(avgs.size()));
  const double z = std::abs(m - j) / se;
  report(2, z <= kOptimalSe,
         fmt("empirical %.6f", m) + fmt(" vs J* %.6f", j) + fmt(", |z| = %.2f", z) +
             fmt(" (|z| vs %.4f: ", kReferenceJStar) + fmt("%.2f)", std::abs(m - kReferenceJStar) / se));
}

void criterion_3(const ExperimentConfig& c, const std::vector<RunSummary>& runs) {
  auto ok = successful(runs);
  std::map<Algorithm, double> m;
  std::string detail;
  bool pass = true;
  for (Algorithm a : {Algorithm::kNaive, Algorithm::kIf2e}) {
    std::vector<double> v;
    for (const auto* r : ok[a]) v.push_back(r->average_cost);
    m[a] = mean(v);
    pass = pass && v.size() >= kMinSeeds && m[a] >= kCostLow && m[a] <= kCostHigh;
    detail += std::string(to_string(a)) + fmt(" mean %.5f", m[a]) + fmt(" (median %.5f)", median(v)) +
              fmt(" over %.0f successful runs; ", static_cast<double>(v.size()));
  }
  pass = pass && m[Algorithm::kNaive] >= m[Algorithm::kIf2e] - kOrderSlack;
  if (c.seeds().size() >= 100) {
    pass = pass && std::abs(m[Algorithm::kNaive] - kReferenceNaive) <= kFullTol &&
           std::abs(m[Algorithm::kIf2e] - kReferenceIf2e) <= kFullTol;
    detail += "full-seed band applied";
  }
  report(3, pass, detail);
}

void criterion_4(const ExperimentConfig& c, const AggregateResult& agg) {
  const AlgoAggregate* naive = nullptr;
  for (const auto& a : agg.algorithms) {
    if (a.algorithm == Algorithm::kNaive) naive = &a;
  }
  if (!naive || naive->n < kMinSeeds) {
    report(4, false, "fewer than 20 successful naive runs");
    return;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  std::size_t nonpositive = 0;
  for (std::size_t t = c.schedule.episode_start(kSlopeFirstEpisode); t < agg.horizon; ++t) {
    const double r = naive->regret_mean[t];
    if (!(r > 0.0)) {
      ++nonpositive;
      continue;
    }
    const double x = std::log(static_cast<double>(t + 1)), y = std::log(r);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    n += 1;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  report(4, nonpositive == 0 && slope >= kSlopeLow && slope <= kSlopeHigh,
         fmt("log-log slope %.4f", slope) + fmt(" over %.0f successful runs", double(naive->n)) +
             (nonpositive ? fmt(", %.0f nonpositive points", double(nonpositive)) : ""));
}

void criterion_5(const std::vector<RunSummary>& runs) {
  auto ok = successful(runs);
  std::vector<double> steps;
  for (const auto* r : ok[Algorithm::kIf2e]) {
    if (r->switch_step) steps.push_back(static_cast<double>(*r->switch_step));
  }
  const double m = mean(steps);
  report(5, ok[Algorithm::kIf2e].size() >= kMinSeeds && m >= kSwitchLow && m <= kSwitchHigh,
         fmt("mean switch step %.1f", m) +
             fmt(" (%.0f of ", double(steps.size())) +
             fmt("%.0f successful runs switched)", double(ok[Algorithm::kIf2e].size())));
}

void criterion_6(const std::vector<RunSummary>& runs, const AggregateResult& agg) {
  std::size_t violations = 0, checked = 0;
  for (const auto& r : runs) {
    if (r.failed) continue;
    // Eigenvalues of the accumulated matrix carry roundoff of order
    // eps * lambda_max; the PSD tolerance scale is 1e-10 * lambda_max.
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < r.lambda_min.size(); ++t) {
      const double v = r.lambda_min[t];
      if (std::isnan(v)) continue;
      if (v < prev - kPsdRelTol * r.lambda_max[t]) ++violations;
      if (v < -kPsdRelTol * r.lambda_max[t]) ++violations;
      prev = std::max(prev, v);
      ++checked;
    }
  }
  bool growth = true;
  std::string detail;
  for (const auto& a : agg.algorithms) {
    if (a.n == 0 || a.lambda_min_mean.empty()) continue;
    const double early = a.lambda_min_mean[kFimEarlyT];
    const double late = a.lambda_min_mean.back();
    growth = growth && late > kFimGrowth * early;
    detail += std::string(to_string(a.algorithm)) + fmt(" mean lambda_min t=100 %.4g", early) +
              fmt(", final %.4g; ", late);
  }
  report(6, checked > 0 && violations == 0 && growth,
         detail + fmt("%.0f decreases", double(violations)));
}

void criterion_7() {
  Rng rng(7001);
  double worst_m = 0.0, worst_e = 0.0;
  for (std::size_t i = 0; i < kRandomSystems; ++i) {
    const Eigen::Index nx = 2 + static_cast<Eigen::Index>(i % 3);
    const Predictor p = random_predictor(rng, nx, 2, 2, 0.9);
    const std::size_t H = 2 * static_cast<std::size_t>(nx) + 5;
    const Matrix M = markov_from_params(p.params, p.F, H);
    const RealizedModel m = ho_kalman(M, nx, 2, 2, H, default_split(H));
    worst_m = std::max(worst_m, spectral_norm(markov_from_params(m.params(), m.F_hat, H) - M));
    const auto a = sorted_eigs(p.params.A), b = sorted_eigs(m.A_hat);
    for (std::size_t k = 0; k < a.size(); ++k) worst_e = std::max(worst_e, std::abs(a[k] - b[k]));
  }
  report(7, worst_m < kRoundTripTol && worst_e < kEigTol,
         fmt("worst Markov error %.2e", worst_m) + fmt(", worst eigenvalue error %.2e", worst_e));
}

void criterion_8() {
  Rng rng(8001);
  const Predictor p = random_predictor(rng, 3, 2, 2, 0.45);
  const std::size_t H = 40;
  const Matrix Abar = p.params.A - p.F * p.params.C;
  History hist(2, 2);
  Vector xh = Vector::Zero(3);
  std::vector<Vector> phi, target;
  for (std::size_t t = 0; t < 600; ++t) {
    const Vector e = rng.standard_normal(2);
    const Vector u = rng.standard_normal(2);
    const Vector clean = p.params.C * xh;
    const Vector y = clean + e;
    if (t >= H) {
      phi.push_back(build_regressor(hist, t, H));
      target.push_back(clean);
    }
    xh = Abar * xh + p.F * y + p.params.B * u;
    hist.push(y, u);
  }
  const MarkovEstimate est = rls_markov(phi, target, 1e-12);
  const double err = markov_error(est, markov_from_params(p.params, p.F, H));
  report(8, err < kRlsTol, fmt("||M_hat - M|| = %.2e", err));
}

// Scalar plant under a fixed dithered feedback u = -k xhat + eta.
void criterion_9() {
  SystemParams p;
  p.A = Matrix::Constant(1, 1, 0.7);
  p.B = Matrix::Constant(1, 1, 1.0);
  p.C = Matrix::Constant(1, 1, 1.0);
  const NoiseParams n(std::sqrt(0.1), std::sqrt(0.1));
  const CostParams cost{Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  const LqgGains g = compute_gains(p, n, cost);
  const std::size_t H = 5;
  const double sigma_e = g.Sigma_e(0, 0);

  auto step = [&](PlantState& s, FilterState& f, History& h, FimAccumulator* acc,
                  bool add_fim) -> void {
    const Vector y = observe(s, p, n);
    if (acc) acc->update_innovation(y, p.C * f.x_pred);
    if (acc && add_fim && h.size() >= H) acc->update_fim(build_regressor(h, h.size(), H));
    measurement_update(f, p, g.L, y);
    const Vector u = -g.K * f.x_filt + s.rng.standard_normal(1);
    time_update(f, p, u);
    apply_input(s, p, u);
    h.push(y, u);
  };

  // Time average of the running estimate.
  PlantState s = init_steady_state(p, n, 9001);
  FilterState f = FilterState::zero(1);
  History h(1, 1);
  FimAccumulator acc(2 * H, 1, 1.0, 1.0);
  const std::size_t burn = 1000, steps = 200000;
  for (std::size_t t = 0; t < burn; ++t) step(s, f, h, &acc, false);
  for (std::size_t t = 0; t < steps; ++t) step(s, f, h, &acc, true);
  const Matrix time_avg = acc.kron_sum() / static_cast<double>(steps);

  // Ensemble expectation at a fixed time with the exact innovation variance.
  Matrix ens = Matrix::Zero(2 * H, 2 * H);
  const std::size_t t_eval = 4 * H + 50;
  for (std::size_t r = 0; r < kFimReplications; ++r) {
    PlantState sr = init_steady_state(p, n, 100000 + r);
    FilterState fr = FilterState::zero(1);
    History hr(1, 1);
    for (std::size_t t = 0; t < t_eval; ++t) step(sr, fr, hr, nullptr, false);
    const Vector phi = build_regressor(hr, hr.size(), H);
    ens += phi * phi.transpose() / sigma_e;
  }
  ens /= static_cast<double>(kFimReplications);
  const double rel = (time_avg - ens).norm() / ens.norm();
  report(9, rel < kFimRelTol, fmt("relative Frobenius difference %.4f", rel));
}

void criterion_10(const std::vector<RunSummary>& runs, const EpisodeSchedule& sched) {
  bool pass = true;
  std::string detail;
  for (auto& [algo, ok] : successful(runs)) {
    if (ok.size() < kMinSeeds) pass = false;
    std::vector<double> med;
    for (std::size_t k = 1; k < sched.k_fin; ++k) {
      std::vector<double> v;
      for (const auto* r : ok) {
        for (const auto& seg : r->segments) {
          if (static_cast<std::size_t>(seg.t) + 1 == sched.episode_start(k + 1)) {
            v.push_back(seg.min_sv_gram / static_cast<double>(seg.t + 1));
          }
        }
      }
      med.push_back(median(v));
    }
    if (med.empty()) continue;
    bool positive = true;
    for (double x : med) positive = positive && x > 0.0;
    pass = pass && positive && med.back() >= kPeRatio * med.front();
    detail += std::string(to_string(algo)) + fmt(" episode-1 %.4g", med.front()) +
              fmt(", final %.4g; ", med.back());
  }
  report(10, pass, detail);
}

void criterion_11(const std::vector<RunSummary>& runs) {
  bool pass = true;
  std::string detail;
  for (auto& [algo, ok] : successful(runs)) {
    if (ok.size() < kMinSeeds) pass = false;
    std::size_t n_seg = 0;
    for (const auto* r : ok) n_seg = std::max(n_seg, r->segments.size());
    std::vector<double> med;
    for (std::size_t k = 0; k < n_seg; ++k) {
      std::vector<double> v;
      for (const auto* r : ok) {
        if (k < r->segments.size()) v.push_back(r->segments[k].markov_error);
      }
      med.push_back(median(v));
    }
    std::size_t inversions = 0;
    bool small = true;
    for (std::size_t k = 1; k < med.size(); ++k) {
      if (med[k] > med[k - 1]) {
        ++inversions;
        small = small && med[k] <= (1.0 + kInversionTol) * med[k - 1];
      }
    }
    pass = pass && inversions <= 1 && small;
    detail += std::string(to_string(algo)) + fmt(" first %.4g", med.empty() ? NAN : med.front()) +
              fmt(", last %.4g", med.empty() ? NAN : med.back()) +
              fmt(", %.0f inversions; ", double(inversions));
  }
  report(11, pass, detail);
}

void criterion_12(const ExperimentConfig& base) {
  ExperimentConfig c = base;
  c.schedule.k_fin = std::min<std::size_t>(c.schedule.k_fin, 6);
  c.seed_list = {1, 2, 7, 9, 28, 39};  // mixes failing and successful web-server seeds
  const fs::path root = fs::temp_directory_path() / "lqg_adapt_acceptance_determinism";
  fs::remove_all(root);
  for (const char* sub : {"a", "b"}) {
    const auto runs = run_all(c, std::string(sub) == "a" ? 1 : 2);
    const double j = optimal_cost(c.system, c.noise(), c.cost);
    emit_csv(aggregate(runs, c.algorithms, j, c.schedule), runs, root / sub, true);
  }
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    ++files;
    const fs::path other = root / "b" / e.path().filename();
    if (!fs::exists(other) || read_file(e.path()) != read_file(other)) ++differ;
  }
  fs::remove_all(root);
  report(12, files > 4 && differ == 0,
         fmt("%.0f files compared", double(files)) + fmt(", %.0f differ", double(differ)));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path config_path =
      argc > 1 ? fs::path(argv[1]) : fs::path(LQG_ADAPT_SOURCE_DIR) / "configs/webserver.json";
  const ExperimentConfig config = load_config(config_path);
  const auto start = std::chrono::steady_clock::now();

  criterion_1(config);
  criterion_2(config);

  const std::size_t workers = resolve_parallelism(0);
  std::printf("running %zu seeds x %zu algorithms on %zu worker(s)\n", config.seeds().size(),
              config.algorithms.size(), workers);
  std::fflush(stdout);
  const auto runs = run_all(config, workers);
  const double j = optimal_cost(config.system, config.noise(), config.cost);
  const AggregateResult agg = aggregate(runs, config.algorithms, j, config.schedule);
  for (const auto& a : agg.algorithms) {
    std::printf("  %s: %zu successful, %zu failed, mean policy cost %.6f\n",
                std::string(to_string(a.algorithm)).c_str(), a.n, a.failed_runs,
                a.mean_policy_cost);
  }

  criterion_3(config, runs);
  criterion_4(config, agg);
  criterion_5(runs);
  criterion_6(runs, agg);
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10(runs, config.schedule);
  criterion_11(runs);
  criterion_12(config);

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d of 12 criteria failed (%.0f s)\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
