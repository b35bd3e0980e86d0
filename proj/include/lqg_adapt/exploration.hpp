#pragma once

#include "lqg_adapt/control_math.hpp"

namespace lqg_adapt {

/// Decaying exploration variance gamma / sqrt(l_k).
struct NaiveSchedule {
  double gamma = 1.0;
};

/// Exploration variance for an episode of length l_k >= 1.
double naive_sigma(const NaiveSchedule& schedule, std::size_t l_k);

/// Running estimate of the Fisher information of the Markov-parameter
/// regression: sum_i phi_i phi_i' (x) inv(Sigma_e_i), where Sigma_e_i is the
/// running mean of the one-step prediction residuals seen so far.
class FimAccumulator {
 public:
  FimAccumulator(Eigen::Index regressor_dim, Eigen::Index ny, double alpha, double c_tol);

  /// innov_sum += (y - y_pred)(y - y_pred)', innov_count += 1.
  void update_innovation(const Vector& y, const Vector& y_pred);

  /// kron_sum += phi phi' (x) inv(innov_sum / innov_count). The residual
  /// covariance gets 1e-8 trace/ny I added when it is numerically singular;
  /// throws SingularInnovation if that still fails or no residual was seen.
  void update_fim(const Vector& phi);

  /// Recomputes and caches lambda_min(kron_sum), and lambda_max alongside.
  double refresh_lambda_min();

  const Matrix& kron_sum() const { return kron_sum_; }
  const Matrix& innov_sum() const { return innov_sum_; }
  std::size_t innov_count() const { return innov_count_; }
  Matrix sigma_e_hat() const;
  double cached_lambda_min() const { return lambda_min_; }
  double cached_lambda_max() const { return lambda_max_; }
  double alpha() const { return alpha_; }
  double c_tol() const { return c_tol_; }
  bool switched() const { return switched_; }
  void latch_switch() { switched_ = true; }

 private:
  Eigen::Index dim_;
  Eigen::Index ny_;
  Matrix kron_sum_;
  Matrix innov_sum_;
  std::size_t innov_count_ = 0;
  double alpha_;
  double c_tol_;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
  bool switched_ = false;
};

/// Smallest eigenvalue of the accumulated information (symmetric solver).
double min_eig_fim(const FimAccumulator& acc);

struct ExplorationLevel {
  double sigma_sq = 0.0;
  bool using_fim = false;
};

/// alpha / lambda_min once lambda_min >= c_tol (latched from then on), the
/// naive schedule before that. Uses the cached lambda_min of acc.
ExplorationLevel if2e_sigma(FimAccumulator& acc, const NaiveSchedule& fallback, std::size_t l_k);

}  // namespace lqg_adapt
