#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lqg_adapt/control_math.hpp"

namespace lqg_adapt {

/// Model parameters (A, B, C) of a partially observed linear system, either
/// the true plant or an estimate of it.
struct SystemParams {
  Matrix A;
  Matrix B;
  Matrix C;

  Eigen::Index nx() const { return A.rows(); }
  Eigen::Index nu() const { return B.cols(); }
  Eigen::Index ny() const { return C.rows(); }

  /// Throws DimensionMismatch unless A is square and B, C conform to it.
  void check_dimensions() const;
};

class NoiseParams {
 public:
  /// Standard deviations; both must be strictly positive.
  NoiseParams(double sigma_w, double sigma_z);

  /// Admits zero standard deviations. Only for deterministic test oracles.
  static NoiseParams for_testing(double sigma_w, double sigma_z);

  double sigma_w() const { return sigma_w_; }
  double sigma_z() const { return sigma_z_; }

 private:
  NoiseParams() = default;
  double sigma_w_ = 0.0;
  double sigma_z_ = 0.0;
};

struct CostParams {
  Matrix Q;  // ny x ny, positive definite
  Matrix R;  // nu x nu, positive definite
};

/// Norm of x beyond which a step reports Diverged.
inline constexpr double kDivergenceBound = 1e9;

struct PlantState {
  Vector x;
  std::int64_t t = 0;
  Rng rng{0};
  // Process noise drawn at observation time and applied when the input arrives.
  Vector pending_w;
  bool observed = false;
};

/// Lists every violated standing assumption on a true system: open-loop
/// stability, controllability of (A, B) and observability of (A, C).
std::vector<std::string> assumption_violations(const SystemParams& params);

/// x0 ~ N(0, Sigma) with Sigma from the filter DARE, t = 0. Throws
/// AssumptionViolated listing the failed checks. Test-mode noise with a zero
/// deviation starts the plant at x0 = 0.
PlantState init_steady_state(const SystemParams& params, const NoiseParams& noise,
                             std::uint64_t seed);

/// Starts from a given state, for deterministic tests.
PlantState init_at(const Vector& x0, std::uint64_t seed);

/// Draws w_t then z_t and returns y_t = C x_t + z_t.
Vector observe(PlantState& state, const SystemParams& params, const NoiseParams& noise);

/// x_{t+1} = A x_t + B u_t + w_t using the w_t drawn by observe().
void apply_input(PlantState& state, const SystemParams& params, const Vector& u);

/// observe() followed by apply_input(); returns the y_t emitted before the move.
Vector step(PlantState& state, const SystemParams& params, const NoiseParams& noise,
            const Vector& u);

/// y'Qy + u'Ru
double stage_cost(const Vector& y, const Vector& u, const CostParams& cost);

}  // namespace lqg_adapt
