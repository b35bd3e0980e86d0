#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <complex>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "lqg_adapt/filtering.hpp"
#include "lqg_adapt/sysid.hpp"

using namespace lqg_adapt;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// Random stable predictor-form system (A, B, C, F) with rho(A - FC) <= max_rho.
struct Predictor {
  SystemParams params;
  Matrix F;
};

Predictor random_predictor(Rng& rng, Eigen::Index nx, Eigen::Index ny, Eigen::Index nu,
                           double max_rho = 0.9) {
  for (;;) {
    Predictor p;
    p.params.A = Matrix(nx, nx);
    p.params.B = Matrix(nx, nu);
    p.params.C = Matrix(ny, nx);
    p.F = Matrix(nx, ny);
    for (auto* m : {&p.params.A, &p.params.B, &p.params.C, &p.F}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.normal();
    }
    p.params.A *= 0.8 * max_rho / std::max(spectral_radius(p.params.A), 1e-3);
    p.F *= 0.2;
    if (spectral_radius(p.params.A - p.F * p.params.C) > max_rho) p.F.setZero();
    if (spectral_radius(p.params.A - p.F * p.params.C) <= max_rho &&
        numerical_rank(controllability_matrix(p.params.A, p.params.B)) == nx &&
        numerical_rank(observability_matrix(p.params.A, p.params.C)) == nx) {
      return p;
    }
  }
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

}  // namespace

TEST_CASE("regressor layout") {
  History h(2, 1);
  h.push(vec({1, 2}), vec({3}));
  CHECK(build_regressor(h, 1, 1) == vec({1, 2, 3}));

  History z(1, 1);
  for (int i = 0; i < 3; ++i) z.push(vec({0}), vec({0}));
  CHECK(build_regressor(z, 3, 2).isZero(0.0));

  History s(1, 1);
  for (int i = 0; i < 4; ++i) s.push(vec({10.0 + i}), vec({20.0 + i}));
  CHECK(build_regressor(s, 4, 2) == vec({13, 12, 23, 22}));

  CHECK_THROWS_AS(build_regressor(s, 1, 2), Error);
  CHECK_THROWS_AS(build_regressor(s, 5, 2), Error);
}

TEST_CASE("scalar ridge regression") {
  std::vector<Vector> phi, y;
  double s2 = 0.0;
  for (double v : {0.5, -1.0, 2.0, 0.25}) {
    phi.push_back(vec({v}));
    y.push_back(vec({2.0 * v}));
    s2 += v * v;
  }
  CHECK(rls_markov(phi, y, 1e-12).M_hat(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
  for (double lambda : {0.1, 1.0, 7.5}) {
    CHECK(rls_markov(phi, y, lambda).M_hat(0, 0) ==
          doctest::Approx(2.0 * s2 / (s2 + lambda)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(rls_markov(std::vector<Vector>{}, std::vector<Vector>{}, 1.0), Error);
}

TEST_CASE("running accumulator equals the batch estimate") {
  Rng rng(4);
  std::vector<Vector> phi, y;
  MarkovAccumulator acc(6, 2);
  for (int i = 0; i < 50; ++i) {
    phi.push_back(rng.standard_normal(6));
    y.push_back(rng.standard_normal(2));
    acc.add(phi.back(), y.back());
  }
  const MarkovEstimate batch = rls_markov(phi, y, 0.3);
  const MarkovEstimate run = acc.estimate(0.3);
  CHECK((batch.M_hat - run.M_hat).norm() < 1e-12);
  CHECK(run.n_samples == 50);
  Matrix G = Matrix::Zero(6, 6);
  for (const auto& p : phi) G += p * p.transpose();
  CHECK((acc.gram() - G).norm() < 1e-12);
}

TEST_CASE("markov block layout") {
  const SystemParams p = fixtures::webserver();
  const Matrix F = Matrix::Identity(2, 2) * 0.1;
  Matrix one = markov_from_params(p, F, 1);
  CHECK(one.cols() == 4);
  CHECK((one.leftCols(2) - p.C * F).norm() == 0.0);
  CHECK((one.rightCols(2) - p.C * p.B).norm() == 0.0);

  const SystemParams zero_a{Matrix::Zero(2, 2), p.B, p.C};
  const Matrix M = markov_from_params(zero_a, Matrix::Zero(2, 2), 3);
  CHECK(M.leftCols(6).isZero(0.0));
  CHECK((M.block(0, 6, 2, 2) - p.C * p.B).norm() == 0.0);
  CHECK(M.rightCols(4).isZero(0.0));
}

TEST_CASE("noiseless realizable data is recovered") {
  Rng rng(12);
  const Predictor pr = random_predictor(rng, 3, 2, 2, 0.45);
  const std::size_t H = 40;
  const Matrix Abar = pr.params.A - pr.F * pr.params.C;
  Matrix power = Matrix::Identity(3, 3);
  for (std::size_t i = 0; i < H; ++i) power = (power * Abar).eval();
  REQUIRE(power.norm() < 1e-12);

  History hist(2, 2);
  Vector xh = Vector::Zero(3);
  std::vector<Vector> phi, target;
  for (std::size_t t = 0; t < 600; ++t) {
    const Vector e = rng.standard_normal(2);
    const Vector u = rng.standard_normal(2);
    const Vector clean = pr.params.C * xh;
    const Vector y = clean + e;
    if (t >= H) {
      phi.push_back(build_regressor(hist, t, H));
      target.push_back(clean);
    }
    xh = Abar * xh + pr.F * y + pr.params.B * u;
    hist.push(y, u);
  }
  const MarkovEstimate est = rls_markov(phi, target, 1e-12);
  CHECK(markov_error(est, markov_from_params(pr.params, pr.F, H)) < 1e-8);
}

TEST_CASE("Ho-Kalman round trip on random stable systems") {
  Rng rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index nx = 2 + trial % 3;
    const Predictor pr = random_predictor(rng, nx, 2, 2);
    const std::size_t H = 2 * static_cast<std::size_t>(nx) + 3;
    const Matrix M = markov_from_params(pr.params, pr.F, H);
    const RealizedModel m = ho_kalman(M, nx, 2, 2, H, default_split(H));
    const Matrix back = markov_from_params(m.params(), m.F_hat, H);
    CHECK(markov_error(back, M) < 1e-8 * std::max(1.0, M.norm()));
  }
}

TEST_CASE("Ho-Kalman recovers the web-server eigenvalues") {
  const SystemParams p = fixtures::webserver();
  const LqgGains g = compute_gains(p, NoiseParams(0.1, 0.1), fixtures::webserver_cost());
  const Matrix M = markov_from_params(p, g.F, 12);
  const RealizedModel m = ho_kalman(M, 2, 2, 2, 12, HankelSplit{6, 5});
  const auto a = sorted_eigs(p.A);
  const auto b = sorted_eigs(m.A_hat);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-6);
  CHECK(m.hankel_sv.size() >= 2);
  CHECK_FALSE(m.a_hat_singular);
  CHECK(default_split(12).d1 == 6);
  CHECK(default_split(12).d2 == 5);
}

TEST_CASE("Ho-Kalman failure modes") {
  const Matrix zero = Matrix::Zero(2, 4 * 12);
  try {
    ho_kalman(zero, 2, 2, 2, 12, default_split(12));
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kRankDeficient);
  }
  try {
    ho_kalman(zero, 2, 2, 2, 12, HankelSplit{1, 10});
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBadSplit);
  }
}

TEST_CASE("Gram and error diagnostics") {
  MarkovAccumulator one(3, 1);
  one.add(Vector::Unit(3, 0), vec({1}));
  CHECK(min_sv_gram(one.gram()) == doctest::Approx(0.0));
  MarkovAccumulator full(3, 1);
  for (int i = 0; i < 3; ++i) full.add(Vector::Unit(3, i), vec({1}));
  CHECK(min_sv_gram(full.gram()) == doctest::Approx(1.0));
  const MarkovEstimate est = full.estimate(0.5);
  CHECK(min_sv_gram(est) == doctest::Approx(1.0));

  Matrix truth(2, 3);
  truth << 1, 2, 3, 4, 5, 6;
  CHECK(markov_error(truth, truth) == 0.0);
  Matrix pert = truth;
  pert(0, 0) += 0.25;
  CHECK(markov_error(pert, truth) == doctest::Approx(0.25));
}
