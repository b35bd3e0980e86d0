#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

#include "lqg_adapt/error.hpp"

namespace lqg_adapt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Singular values below this fraction of the largest one count as zero in
/// rank tests and truncated pseudo-inverses.
inline constexpr double kRankTolerance = 1e-8;

struct RiccatiOptions {
  double tol = 1e-12;
  int max_iter = 100000;
};

struct DareSolution {
  Matrix value;
  double residual_norm = 0.0;
  int iterations = 0;
};

/// Solves P = Qc + A'PA - A'PB(B'PB + R)^-1 B'PA.
///
/// A structured doubling iteration is tried first; if it does not meet the
/// residual contract the damped fixed-point iteration from P0 = Qc is run.
/// The residual is checked as ||P - Ric(P)|| <= tol * (1 + ||P||).
DareSolution solve_control_dare(const Matrix& A, const Matrix& B, const Matrix& Qc,
                                const Matrix& R, const RiccatiOptions& options = {});

/// Filter DARE S = sw^2 I + ASA' - ASC'(CSC' + sz^2 I)^-1 CSA' (the dual of the
/// control equation). Both standard deviations must be positive.
DareSolution solve_filter_dare(const Matrix& A, const Matrix& C, double sigma_w, double sigma_z,
                               const RiccatiOptions& options = {});

/// Residual of the control DARE at P, in the Frobenius norm.
double control_dare_residual(const Matrix& A, const Matrix& B, const Matrix& Qc, const Matrix& R,
                             const Matrix& P);

/// S = X'SX + Y for rho(X) < 1, by squared Smith iteration.
Matrix dlyap(const Matrix& X, const Matrix& Y, double tol = 1e-14);

Matrix controllability_matrix(const Matrix& A, const Matrix& B);
Matrix observability_matrix(const Matrix& A, const Matrix& C);

int numerical_rank(const Matrix& X, double rel_tol = kRankTolerance);
double spectral_radius(const Matrix& X);

/// Moore-Penrose inverse with singular values below rel_tol * sigma_max dropped.
Matrix pseudo_inverse(const Matrix& X, double rel_tol = kRankTolerance);

inline Matrix symmetrize(const Matrix& X) { return 0.5 * (X + X.transpose()); }

bool all_finite(const Matrix& X);

/// The single seeded generator owned by a run. Every random draw in a run
/// goes through one instance so that draw order alone fixes the trajectory.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  Vector standard_normal(Eigen::Index n);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// mean + L z with L a lower Cholesky factor of covariance and z standard
/// normal. A zero covariance returns the mean exactly; z is drawn either way
/// so the generator stream does not depend on the covariance.
Vector sample_gaussian(const Vector& mean, const Matrix& covariance, Rng& rng);

}  // namespace lqg_adapt
