#include "lqg_adapt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "json.hpp"

namespace lqg_adapt {

namespace {

using nlohmann::json;

// Collects every problem found while reading a document instead of stopping
// at the first one.
class Reader {
 public:
  std::vector<std::string> errors;

  const json* object(const json& parent, const std::string& key, const std::string& path,
                     bool required) {
    const std::string where = join(path, key);
    if (!parent.contains(key)) {
      if (required) errors.push_back(where + ": missing");
      return nullptr;
    }
    const json& v = parent.at(key);
    if (!v.is_object()) {
      errors.push_back(where + ": expected an object");
      return nullptr;
    }
    return &v;
  }

  Matrix matrix(const json& parent, const std::string& key, const std::string& path) {
    const std::string where = join(path, key);
    if (!parent.contains(key)) {
      errors.push_back(where + ": missing");
      return {};
    }
    const json& v = parent.at(key);
    if (!v.is_array() || v.empty()) {
      errors.push_back(where + ": expected a non-empty array of rows");
      return {};
    }
    const std::size_t cols = v.front().is_array() ? v.front().size() : 0;
    if (cols == 0) {
      errors.push_back(where + ": rows must be non-empty arrays");
      return {};
    }
    Matrix m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < v.size(); ++i) {
      const json& row = v[i];
      if (!row.is_array() || row.size() != cols) {
        errors.push_back(where + ": row " + std::to_string(i) + " must have " +
                         std::to_string(cols) + " entries");
        return {};
      }
      for (std::size_t j = 0; j < cols; ++j) {
        if (!row[j].is_number()) {
          errors.push_back(where + "[" + std::to_string(i) + "][" + std::to_string(j) +
                           "]: expected a number");
          return {};
        }
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].get<double>();
      }
    }
    return m;
  }

  void number(const json& parent, const std::string& key, const std::string& path, double& out,
              bool required = true) {
    if (!parent.contains(key)) {
      if (required) errors.push_back(join(path, key) + ": missing");
      return;
    }
    const json& v = parent.at(key);
    if (!v.is_number()) {
      errors.push_back(join(path, key) + ": expected a number");
      return;
    }
    out = v.get<double>();
  }

  template <typename Int>
  void count(const json& parent, const std::string& key, const std::string& path, Int& out,
             bool required = true) {
    if (!parent.contains(key)) {
      if (required) errors.push_back(join(path, key) + ": missing");
      return;
    }
    const json& v = parent.at(key);
    if (!v.is_number_unsigned()) {
      errors.push_back(join(path, key) + ": expected a non-negative integer");
      return;
    }
    out = v.get<Int>();
  }

  void boolean(const json& parent, const std::string& key, const std::string& path, bool& out) {
    if (!parent.contains(key)) return;
    const json& v = parent.at(key);
    if (!v.is_boolean()) {
      errors.push_back(join(path, key) + ": expected true or false");
      return;
    }
    out = v.get<bool>();
  }

 private:
  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
};

bool positive_definite(const Matrix& M) {
  if (M.rows() != M.cols() || !M.allFinite()) return false;
  if (!(M - M.transpose()).isZero(1e-12 * std::max(1.0, M.norm()))) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(M), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() > 0.0;
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

NoiseParams ExperimentConfig::noise() const {
  return NoiseParams(std::sqrt(sigma_w_sq), std::sqrt(sigma_z_sq));
}

AlgoConfig ExperimentConfig::algo_config(Algorithm algorithm, std::uint64_t seed) const {
  AlgoConfig c;
  c.algorithm = algorithm;
  c.H = H;
  c.lambda = lambda;
  c.gamma = gamma;
  c.alpha = alpha;
  c.c_tol = c_tol;
  c.sigma_u = std::sqrt(sigma_u_sq);
  c.seed = seed;
  c.lambda_min_stride = lambda_min_stride;
  c.split = split;
  c.oracle_diagnostics = oracle_diagnostics;
  return c;
}

std::vector<std::uint64_t> ExperimentConfig::seeds() const {
  if (!seed_list.empty()) return seed_list;
  std::vector<std::uint64_t> out(n_runs);
  for (std::size_t i = 0; i < n_runs; ++i) out[i] = base_seed + i;
  return out;
}

std::vector<std::string> validation_errors(const ExperimentConfig& c) {
  std::vector<std::string> errs;
  const Matrix& A = c.system.A;
  const Matrix& B = c.system.B;
  const Matrix& C = c.system.C;
  bool dims_ok = A.size() > 0 && B.size() > 0 && C.size() > 0;
  if (dims_ok) {
    if (A.rows() != A.cols()) {
      errs.push_back("A must be square");
      dims_ok = false;
    }
    if (B.rows() != A.rows()) {
      errs.push_back("B must have as many rows as A");
      dims_ok = false;
    }
    if (C.cols() != A.cols()) {
      errs.push_back("C must have as many columns as A");
      dims_ok = false;
    }
  }
  if (dims_ok) {
    if (c.cost.Q.rows() != C.rows() || c.cost.Q.cols() != C.rows()) {
      errs.push_back("Q must be n_y x n_y");
    } else if (!positive_definite(c.cost.Q)) {
      errs.push_back("Q must be positive definite");
    }
    if (c.cost.R.rows() != B.cols() || c.cost.R.cols() != B.cols()) {
      errs.push_back("R must be n_u x n_u");
    } else if (!positive_definite(c.cost.R)) {
      errs.push_back("R must be positive definite");
    }
    for (const auto& v : assumption_violations(c.system)) errs.push_back(v);
  } else if (c.cost.R.size() > 0 && c.cost.R.rows() == c.cost.R.cols() &&
             !positive_definite(c.cost.R)) {
    errs.push_back("R must be positive definite");
  }

  if (!(c.sigma_w_sq > 0.0)) errs.push_back("sigma_w_sq must be positive");
  if (!(c.sigma_z_sq > 0.0)) errs.push_back("sigma_z_sq must be positive");
  if (!(c.lambda > 0.0)) errs.push_back("lambda must be positive");
  if (!(c.gamma > 0.0)) errs.push_back("gamma must be positive");
  if (!(c.alpha > 0.0)) errs.push_back("alpha must be positive");
  if (!(c.c_tol > 0.0)) errs.push_back("c_tol must be positive");
  if (!(c.sigma_u_sq > 0.0)) errs.push_back("sigma_u_sq must be positive");
  if (c.H < 1) errs.push_back("H must be at least 1");
  if (c.schedule.T_w < c.H) errs.push_back("T_w must be at least H");
  if (c.schedule.k_fin > 40) errs.push_back("k_fin must be at most 40");
  if (c.lambda_min_stride < 1) errs.push_back("lambda_min_stride must be at least 1");
  if (c.seed_list.empty() && c.n_runs < 1) errs.push_back("n_runs must be at least 1");
  if (c.algorithms.empty()) errs.push_back("algorithms must not be empty");

  if (dims_ok && c.H >= 1) {
    const auto nx = static_cast<std::size_t>(A.rows());
    if (c.split) {
      if (c.split->d1 + c.split->d2 + 1 != c.H || c.split->d1 < nx || c.split->d2 < nx) {
        errs.push_back("Hankel constraint violated: need d1 >= n_x, d2 >= n_x and d1 + d2 + 1 = H (d1=" +
                       std::to_string(c.split->d1) + ", d2=" + std::to_string(c.split->d2) +
                       ", H=" + std::to_string(c.H) + ", n_x=" + std::to_string(nx) + ")");
      }
    } else if (c.H < 2 * nx + 1) {
      errs.push_back("Hankel constraint violated: H = " + std::to_string(c.H) + " < 2*n_x + 1 = " +
                     std::to_string(2 * nx + 1));
    }
  }
  return errs;
}

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ", column " +
                                            std::to_string(col) + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, "line 1, column 1: expected an object");

  ExperimentConfig c;
  Reader r;
  if (const json* sys = r.object(doc, "system", "", true)) {
    c.system.A = r.matrix(*sys, "A", "system");
    c.system.B = r.matrix(*sys, "B", "system");
    c.system.C = r.matrix(*sys, "C", "system");
  }
  if (const json* n = r.object(doc, "noise", "", true)) {
    r.number(*n, "sigma_w_sq", "noise", c.sigma_w_sq);
    r.number(*n, "sigma_z_sq", "noise", c.sigma_z_sq);
  }
  if (const json* q = r.object(doc, "cost", "", true)) {
    c.cost.Q = r.matrix(*q, "Q", "cost");
    c.cost.R = r.matrix(*q, "R", "cost");
  }
  if (const json* s = r.object(doc, "schedule", "", true)) {
    r.count(*s, "T_w", "schedule", c.schedule.T_w);
    r.count(*s, "k_fin", "schedule", c.schedule.k_fin);
  }
  if (const json* a = r.object(doc, "algo", "", true)) {
    r.count(*a, "H", "algo", c.H);
    r.number(*a, "lambda", "algo", c.lambda);
    r.number(*a, "gamma", "algo", c.gamma);
    r.number(*a, "alpha", "algo", c.alpha);
    r.number(*a, "c_tol", "algo", c.c_tol);
    r.number(*a, "sigma_u_sq", "algo", c.sigma_u_sq);
    r.count(*a, "lambda_min_stride", "algo", c.lambda_min_stride, false);
    const bool has_d1 = a->contains("d1");
    const bool has_d2 = a->contains("d2");
    if (has_d1 != has_d2) {
      r.errors.push_back("algo: d1 and d2 must be given together");
    } else if (has_d1) {
      HankelSplit split;
      r.count(*a, "d1", "algo", split.d1);
      r.count(*a, "d2", "algo", split.d2);
      c.split = split;
    }
  }
  if (doc.contains("seeds")) {
    const json& s = doc.at("seeds");
    if (s.is_array()) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (!s[i].is_number_unsigned()) {
          r.errors.push_back("seeds[" + std::to_string(i) + "]: expected a non-negative integer");
        } else {
          c.seed_list.push_back(s[i].get<std::uint64_t>());
        }
      }
      if (s.empty()) r.errors.push_back("seeds: list must not be empty");
    } else if (s.is_object()) {
      r.count(s, "base_seed", "seeds", c.base_seed);
      r.count(s, "n_runs", "seeds", c.n_runs);
    } else {
      r.errors.push_back("seeds: expected a list or {base_seed, n_runs}");
    }
  }
  if (doc.contains("output_dir")) {
    if (doc.at("output_dir").is_string()) {
      c.output_dir = doc.at("output_dir").get<std::string>();
    } else {
      r.errors.push_back("output_dir: expected a string");
    }
  }
  if (doc.contains("algorithms")) {
    const json& list = doc.at("algorithms");
    c.algorithms.clear();
    if (!list.is_array()) {
      r.errors.push_back("algorithms: expected a list");
    } else {
      for (const auto& item : list) {
        const auto algo = item.is_string() ? parse_algorithm(item.get<std::string>()) : std::nullopt;
        if (!algo) {
          r.errors.push_back("algorithms: unknown entry " + item.dump());
        } else if (std::find(c.algorithms.begin(), c.algorithms.end(), *algo) ==
                   c.algorithms.end()) {
          c.algorithms.push_back(*algo);
        }
      }
    }
  }
  r.boolean(doc, "oracle_diagnostics", "", c.oracle_diagnostics);
  r.boolean(doc, "write_traces", "", c.write_traces);

  std::vector<std::string> errs = std::move(r.errors);
  if (errs.empty()) errs = validation_errors(c);
  if (!errs.empty()) {
    std::string msg = std::to_string(errs.size()) + " problem(s)";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw Error(ErrorCode::kValidationError, msg);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// ---------------------------------------------------------------------------
// Running and aggregation

RunSummary summarize(const RunTrace& trace) {
  RunSummary s;
  s.algorithm = trace.algorithm;
  s.seed = trace.seed;
  s.T_w = trace.T_w;
  s.J_star = trace.J_star;
  s.average_cost = trace.average_cost();
  s.policy_cost = trace.policy_cost;
  s.switch_step = trace.switch_step;
  const std::size_t n = trace.steps.size();
  s.cost.reserve(n);
  s.regret.reserve(n);
  s.sigma_eta_sq.reserve(n);
  s.lambda_min.reserve(n);
  s.lambda_max.reserve(n);
  s.lambda_min_fresh.reserve(n);
  double acc = 0.0;
  for (const auto& r : trace.steps) {
    acc += r.regret_increment;
    s.cost.push_back(r.cost);
    s.regret.push_back(acc);
    s.sigma_eta_sq.push_back(r.sigma_eta_sq);
    s.lambda_min.push_back(r.lambda_min);
    s.lambda_max.push_back(r.lambda_max);
    s.lambda_min_fresh.push_back(r.lambda_min_fresh ? 1 : 0);
    if (!std::isnan(r.min_sv_gram) || !std::isnan(r.markov_error)) {
      s.segments.push_back({r.t, r.min_sv_gram, r.markov_error});
    }
  }
  return s;
}

RunSummary summarize_failure(Algorithm algorithm, std::uint64_t seed, const RunFailure& failure) {
  RunSummary s;
  s.algorithm = algorithm;
  s.seed = seed;
  s.failed = true;
  s.failure_code = failure.code();
  s.failure_message = failure.detail();
  s.failure_episode = failure.episode();
  s.failure_t = failure.t();
  return s;
}

AggregateResult aggregate(const std::vector<RunSummary>& runs,
                          const std::vector<Algorithm>& algorithms, double J_star,
                          const EpisodeSchedule& schedule) {
  AggregateResult out;
  out.J_star = J_star;
  out.T_w = schedule.T_w;
  out.horizon = schedule.horizon();
  const std::size_t T = out.horizon;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (Algorithm algo : algorithms) {
    AlgoAggregate agg;
    agg.algorithm = algo;
    std::vector<const RunSummary*> ok;
    for (const auto& r : runs) {
      if (r.algorithm != algo) continue;
      if (r.failed) {
        ++agg.failed_runs;
        agg.failed_seeds.push_back(r.seed);
      } else {
        ok.push_back(&r);
      }
    }
    agg.n = ok.size();
    std::vector<double> costs;
    std::vector<double> switches;
    double policy_sum = 0.0;
    for (const auto* r : ok) {
      costs.push_back(r->average_cost);
      policy_sum += r->policy_cost;
      if (r->switch_step) switches.push_back(static_cast<double>(*r->switch_step));
    }
    if (!ok.empty()) {
      double sum = 0.0;
      for (double x : costs) sum += x;
      agg.mean_avg_cost = sum / static_cast<double>(costs.size());
      agg.std_avg_cost = sample_std(costs, agg.mean_avg_cost);
      agg.mean_policy_cost = policy_sum / static_cast<double>(ok.size());
    } else {
      agg.mean_avg_cost = agg.std_avg_cost = agg.mean_policy_cost = nan;
    }
    if (!switches.empty()) {
      double sum = 0.0;
      for (double x : switches) sum += x;
      agg.mean_switch_step = sum / static_cast<double>(switches.size());
    }

    agg.regret_mean.assign(T, nan);
    agg.regret_std.assign(T, nan);
    agg.lambda_min_mean.assign(T, nan);
    agg.lambda_min_std.assign(T, nan);
    agg.stride_flag.assign(T, 0);
    if (!ok.empty()) {
      std::vector<double> column(ok.size());
      for (std::size_t t = 0; t < T; ++t) {
        double sum = 0.0;
        for (std::size_t i = 0; i < ok.size(); ++i) {
          column[i] = ok[i]->regret[t];
          sum += column[i];
        }
        agg.regret_mean[t] = sum / static_cast<double>(ok.size());
        agg.regret_std[t] = sample_std(column, agg.regret_mean[t]);

        if (std::isnan(ok.front()->lambda_min[t])) continue;
        sum = 0.0;
        for (std::size_t i = 0; i < ok.size(); ++i) {
          column[i] = ok[i]->lambda_min[t];
          sum += column[i];
        }
        agg.lambda_min_mean[t] = sum / static_cast<double>(ok.size());
        agg.lambda_min_std[t] = sample_std(column, agg.lambda_min_mean[t]);
        agg.stride_flag[t] = ok.front()->lambda_min_fresh[t];
      }
    }
    out.algorithms.push_back(std::move(agg));
  }
  return out;
}

std::size_t resolve_parallelism(std::size_t requested) {
  if (const char* env = std::getenv("LQG_ADAPT_THREADS")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

std::vector<RunSummary> run_all(const ExperimentConfig& config, std::size_t parallel) {
  struct Task {
    Algorithm algorithm;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  const auto seeds = config.seeds();
  for (Algorithm a : config.algorithms) {
    for (std::uint64_t s : seeds) tasks.push_back({a, s});
  }
  std::vector<RunSummary> results(tasks.size());
  std::vector<std::exception_ptr> unexpected(tasks.size());
  std::atomic<std::size_t> next{0};
  const NoiseParams noise = config.noise();

  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& task = tasks[i];
      try {
        const RunTrace trace = run_full(config.algo_config(task.algorithm, task.seed),
                                        config.schedule, config.system, noise, config.cost);
        results[i] = summarize(trace);
      } catch (const RunFailure& f) {
        results[i] = summarize_failure(task.algorithm, task.seed, f);
      } catch (const Error& e) {
        results[i] = summarize_failure(task.algorithm, task.seed,
                                       RunFailure(e.code(), e.detail(), -1, -1));
      } catch (...) {
        unexpected[i] = std::current_exception();
      }
    }
  };

  const std::size_t n_threads = std::min(std::max<std::size_t>(parallel, 1), tasks.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : unexpected) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

// ---------------------------------------------------------------------------
// Output

std::string format_number(double value) {
  if (std::isnan(value)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void emit_csv(const AggregateResult& result, const std::vector<RunSummary>& runs,
              const std::filesystem::path& dir, bool write_traces) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());

  std::string regret = "t,algo,mean,std,n\n";
  std::string fim = "t,algo,mean,std,stride_flag\n";
  std::string summary =
      "algo,mean_avg_cost,std_avg_cost,mean_switch_step,failed_runs,J_star,n,mean_policy_cost\n";
  for (const auto& a : result.algorithms) {
    const std::string name(to_string(a.algorithm));
    const std::string n = std::to_string(a.n);
    if (a.n > 0) {
      for (std::size_t t = 0; t < a.regret_mean.size(); ++t) {
        regret += std::to_string(t) + "," + name + "," + format_number(a.regret_mean[t]) + "," +
                  format_number(a.regret_std[t]) + "," + n + "\n";
      }
      for (std::size_t t = 0; t < a.lambda_min_mean.size(); ++t) {
        if (std::isnan(a.lambda_min_mean[t])) continue;
        fim += std::to_string(t) + "," + name + "," + format_number(a.lambda_min_mean[t]) + "," +
               format_number(a.lambda_min_std[t]) + "," + std::to_string(a.stride_flag[t]) + "\n";
      }
    }
    summary += name + "," + format_number(a.mean_avg_cost) + "," + format_number(a.std_avg_cost) +
               "," + (a.mean_switch_step ? format_number(*a.mean_switch_step) : std::string()) +
               "," + std::to_string(a.failed_runs) + "," + format_number(result.J_star) + "," + n +
               "," + format_number(a.mean_policy_cost) + "\n";
  }

  std::string failures = "algo,seed,code,episode,t,message\n";
  for (const auto& r : runs) {
    if (!r.failed) continue;
    failures += std::string(to_string(r.algorithm)) + "," + std::to_string(r.seed) + "," +
                std::string(ToString(r.failure_code)) + "," + std::to_string(r.failure_episode) +
                "," + std::to_string(r.failure_t) + "," + csv_escape(r.failure_message) + "\n";
  }

  write_file(dir / "regret_mean.csv", regret);
  write_file(dir / "fim_lambda_min.csv", fim);
  write_file(dir / "summary.csv", summary);
  write_file(dir / "failures.csv", failures);

  if (!write_traces) return;
  for (const auto& r : runs) {
    if (r.failed) continue;
    const EpisodeSchedule sched{r.T_w, 0};
    std::string body =
        "t,episode,cost,regret,sigma_eta_sq,lambda_min,min_sv_gram,markov_error\n";
    body.reserve(body.size() + r.cost.size() * 120);
    std::size_t seg = 0;
    for (std::size_t t = 0; t < r.cost.size(); ++t) {
      double sv = std::numeric_limits<double>::quiet_NaN();
      double me = sv;
      if (seg < r.segments.size() && static_cast<std::size_t>(r.segments[seg].t) == t) {
        sv = r.segments[seg].min_sv_gram;
        me = r.segments[seg].markov_error;
        ++seg;
      }
      body += std::to_string(t) + "," + std::to_string(sched.episode_of(t)) + "," +
              format_number(r.cost[t]) + "," + format_number(r.regret[t]) + "," +
              format_number(r.sigma_eta_sq[t]) + "," + format_number(r.lambda_min[t]) + "," +
              format_number(sv) + "," + format_number(me) + "\n";
    }
    write_file(dir / ("trace_" + std::string(to_string(r.algorithm)) + "_" +
                      std::to_string(r.seed) + ".csv"),
               body);
  }
}

// ---------------------------------------------------------------------------
// Oracle self-checks

namespace {

std::vector<std::complex<double>> sorted_eigenvalues(const Matrix& M) {
  Eigen::EigenSolver<Matrix> es(M, false);
  std::vector<std::complex<double>> ev(es.eigenvalues().data(),
                                       es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return ev;
}

OracleCheck check(std::string name, double value, double tolerance) {
  return {std::move(name), value, tolerance, std::isfinite(value) && value <= tolerance};
}

// Drives the true plant with the optimal LQG feedback plus white input noise
// of variance sigma_u_sq and reports each regressor with its step.
template <typename Fn>
void simulate_closed_loop(const ExperimentConfig& c, const LqgGains& g, std::size_t steps,
                          std::uint64_t seed, Fn&& on_step) {
  const NoiseParams noise = c.noise();
  PlantState plant = init_steady_state(c.system, noise, seed);
  FilterState fs = FilterState::zero(c.system.nx());
  History hist(c.system.ny(), c.system.nu());
  const double su = std::sqrt(c.sigma_u_sq);
  for (std::size_t t = 0; t < steps; ++t) {
    const Vector y = observe(plant, c.system, noise);
    const Vector y_pred = c.system.C * fs.x_pred;
    measurement_update(fs, c.system, g.L, y);
    const Vector u = -g.K * fs.x_filt + su * plant.rng.standard_normal(c.system.nu());
    if (t >= c.H) on_step(t, build_regressor(hist, t, c.H), y, y_pred);
    time_update(fs, c.system, u);
    apply_input(plant, c.system, u);
    hist.push(y, u);
  }
}

}  // namespace

std::vector<OracleCheck> run_oracle_checks(const ExperimentConfig& c) {
  std::vector<OracleCheck> out;
  const NoiseParams noise = c.noise();
  const LqgGains g = compute_gains(c.system, noise, c.cost);

  // Riccati residuals.
  const Matrix Qc = c.system.C.transpose() * c.cost.Q * c.system.C;
  out.push_back(check("control DARE relative residual",
                      control_dare_residual(c.system.A, c.system.B, Qc, c.cost.R, g.P) /
                          (1.0 + g.P.norm()),
                      1e-10));
  const auto nx = c.system.nx();
  const auto ny = c.system.ny();
  out.push_back(check(
      "filter DARE relative residual",
      control_dare_residual(c.system.A.transpose(), c.system.C.transpose(),
                            c.sigma_w_sq * Matrix::Identity(nx, nx),
                            c.sigma_z_sq * Matrix::Identity(ny, ny), g.Sigma) /
          (1.0 + g.Sigma.norm()),
      1e-10));

  // Optimal cost against the closed-loop Lyapunov evaluation of the same policy.
  const double j_star = optimal_cost(c.system, noise, c.cost);
  const double j_lyap = cec_policy_cost(c.system, noise, c.cost, c.system, g.L, g.K);
  out.push_back(check("optimal cost vs closed-loop Lyapunov cost (relative)",
                      std::abs(j_star - j_lyap) / j_star, 1e-9));

  // Ho-Kalman round trip from exact Markov parameters.
  const Matrix M = markov_from_params(c.system, g.F, c.H);
  const HankelSplit split = c.split ? *c.split : default_split(c.H);
  const RealizedModel model = ho_kalman(M, nx, ny, c.system.nu(), c.H, split);
  const Matrix M_back = markov_from_params(model.params(), model.F_hat, c.H);
  out.push_back(check("Ho-Kalman Markov round-trip error", markov_error(M_back, M), 1e-8));
  const auto ev_true = sorted_eigenvalues(c.system.A);
  const auto ev_hat = sorted_eigenvalues(model.A_hat);
  double ev_err = 0.0;
  for (std::size_t i = 0; i < ev_true.size(); ++i) {
    ev_err = std::max(ev_err, std::abs(ev_true[i] - ev_hat[i]));
  }
  out.push_back(check("Ho-Kalman eigenvalue error", ev_err, 1e-6));

  // FIM: time average of the online estimate vs an ensemble average of the
  // per-step information at a fixed time. Information terms start after a
  // burn-in so the residual covariance estimate has settled.
  const Eigen::Index dim = static_cast<Eigen::Index>(c.H) * (ny + c.system.nu());
  FimAccumulator acc(dim, ny, c.alpha, c.c_tol);
  std::size_t n_terms = 0;
  const std::size_t burn_in = 1000;
  simulate_closed_loop(c, g, 200000 + burn_in, c.base_seed,
                       [&](std::size_t t, const Vector& phi, const Vector& y,
                           const Vector& y_pred) {
                         acc.update_innovation(y, y_pred);
                         if (t < burn_in) return;
                         acc.update_fim(phi);
                         ++n_terms;
                       });
  const Matrix time_avg = acc.kron_sum() / static_cast<double>(n_terms);

  const Matrix se_inv = g.Sigma_e.llt().solve(Matrix::Identity(ny, ny));
  Matrix outer = Matrix::Zero(dim, dim);
  const std::size_t reps = 10000;
  const std::size_t at = 4 * c.H + 50;
  for (std::size_t rep = 0; rep < reps; ++rep) {
    simulate_closed_loop(c, g, at + 1, c.base_seed + 1 + rep,
                         [&](std::size_t t, const Vector& phi, const Vector&, const Vector&) {
                           if (t == at) outer.noalias() += phi * phi.transpose();
                         });
  }
  outer /= static_cast<double>(reps);
  Matrix ensemble(dim * ny, dim * ny);
  for (Eigen::Index b = 0; b < dim; ++b) {
    for (Eigen::Index a = 0; a < dim; ++a) {
      ensemble.block(a * ny, b * ny, ny, ny) = outer(a, b) * se_inv;
    }
  }
  out.push_back(check("FIM time average vs ensemble (relative Frobenius)",
                      (time_avg - ensemble).norm() / ensemble.norm(), 0.1));
  return out;
}

}  // namespace lqg_adapt
