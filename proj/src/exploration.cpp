#include "lqg_adapt/exploration.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace lqg_adapt {

double naive_sigma(const NaiveSchedule& schedule, std::size_t l_k) {
  if (l_k == 0) throw Error(ErrorCode::kDimensionMismatch, "episode length must be >= 1");
  return schedule.gamma / std::sqrt(static_cast<double>(l_k));
}

FimAccumulator::FimAccumulator(Eigen::Index regressor_dim, Eigen::Index ny, double alpha,
                               double c_tol)
    : dim_(regressor_dim),
      ny_(ny),
      kron_sum_(Matrix::Zero(regressor_dim * ny, regressor_dim * ny)),
      innov_sum_(Matrix::Zero(ny, ny)),
      alpha_(alpha),
      c_tol_(c_tol) {}

void FimAccumulator::update_innovation(const Vector& y, const Vector& y_pred) {
  if (y.size() != ny_ || y_pred.size() != ny_) {
    throw Error(ErrorCode::kDimensionMismatch, "innovation operands must have length ny");
  }
  const Vector e = y - y_pred;
  innov_sum_.noalias() += e * e.transpose();
  ++innov_count_;
}

Matrix FimAccumulator::sigma_e_hat() const {
  if (innov_count_ == 0) return Matrix::Zero(ny_, ny_);
  return innov_sum_ / static_cast<double>(innov_count_);
}

void FimAccumulator::update_fim(const Vector& phi) {
  if (phi.size() != dim_) throw Error(ErrorCode::kDimensionMismatch, "regressor length");
  if (innov_count_ == 0) {
    throw Error(ErrorCode::kSingularInnovation, "no prediction residuals accumulated yet");
  }
  Matrix sigma = symmetrize(sigma_e_hat());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  if (!(eig.eigenvalues().minCoeff() > 1e-12 * top)) {
    sigma.diagonal().array() += 1e-8 * sigma.trace() / static_cast<double>(ny_);
  }
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success || !(sigma.trace() > 0.0)) {
    throw Error(ErrorCode::kSingularInnovation, "residual covariance is not invertible");
  }
  const Matrix inv = llt.solve(Matrix::Identity(ny_, ny_));
  for (Eigen::Index b = 0; b < dim_; ++b) {
    for (Eigen::Index a = 0; a < dim_; ++a) {
      kron_sum_.block(a * ny_, b * ny_, ny_, ny_) += (phi(a) * phi(b)) * inv;
    }
  }
}

double FimAccumulator::refresh_lambda_min() {
  if (kron_sum_.isZero(0.0)) {
    lambda_min_ = lambda_max_ = 0.0;
    return 0.0;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(kron_sum_, Eigen::EigenvaluesOnly);
  lambda_min_ = eig.eigenvalues()(0);
  lambda_max_ = eig.eigenvalues()(eig.eigenvalues().size() - 1);
  return lambda_min_;
}

double min_eig_fim(const FimAccumulator& acc) {
  const Matrix& k = acc.kron_sum();
  if (k.isZero(0.0)) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(k, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

ExplorationLevel if2e_sigma(FimAccumulator& acc, const NaiveSchedule& fallback, std::size_t l_k) {
  const double lmin = acc.cached_lambda_min();
  if (acc.switched() || lmin >= acc.c_tol()) {
    acc.latch_switch();
    return {acc.alpha() / lmin, true};
  }
  return {naive_sigma(fallback, l_k), false};
}

}  // namespace lqg_adapt
