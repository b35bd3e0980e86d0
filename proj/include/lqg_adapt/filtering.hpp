#pragma once

#include "lqg_adapt/control_math.hpp"
#include "lqg_adapt/plant.hpp"

namespace lqg_adapt {

/// Steady-state LQG quantities for one parameter set.
struct LqgGains {
  Matrix K;        // nu x nx, u = -K xhat_{t|t}
  Matrix L;        // nx x ny, Kalman gain
  Matrix F;        // nx x ny, innovation-form gain A L
  Matrix P;        // control DARE solution
  Matrix Sigma;    // filter DARE solution (one-step prediction covariance)
  Matrix Sigma_e;  // innovation covariance C Sigma C' + sz^2 I
  Matrix Abar;     // predictor dynamics A - F C
};

/// Full LQG design on (A, B, C) with known noise levels.
LqgGains compute_gains(const SystemParams& params, const NoiseParams& noise,
                       const CostParams& cost);

/// K = (B'PB + R)^-1 B'PA with P from the control DARE on Qc = C'QC.
/// Throws GainUnstable if rho(A - BK) >= 1 and require_stable is set.
Matrix control_gain(const SystemParams& params, const CostParams& cost, Matrix* P_out = nullptr,
                    bool require_stable = true);

/// Predicted and filtered estimates of one steady-state Kalman filter.
struct FilterState {
  Vector x_pred;  // xhat_{t|t-1}
  Vector x_filt;  // xhat_{t|t}
  std::int64_t t = 0;

  /// xhat_{0|-1} = 0.
  static FilterState zero(Eigen::Index nx);
};

/// xhat_{t|t} = (I - LC) xhat_{t|t-1} + L y_t
void measurement_update(FilterState& fs, const SystemParams& params, const Matrix& L,
                        const Vector& y);

/// xhat_{t+1|t} = A xhat_{t|t} + B u_t
void time_update(FilterState& fs, const SystemParams& params, const Vector& u);

/// Both updates for one step: the y observed at t, then the u applied at t.
FilterState filter_step(FilterState fs, const SystemParams& params, const Matrix& L,
                        const Vector& y, const Vector& u_applied_after);

/// J* = Tr(C'QC Sbar) + sz^2 Tr(Q) + Tr(P (Sigma - Sbar)),
/// Sbar = Sigma - Sigma C' (C Sigma C' + sz^2 I)^-1 C Sigma.
/// Zero test-mode noise gives 0.
double optimal_cost(const SystemParams& params, const NoiseParams& noise, const CostParams& cost);

/// Average cost of a certainty-equivalent controller (model, L_model, K_model)
/// driving the true plant without exploration. The closed loop on
/// [x_t; xhat_{t|t}] is solved with a discrete Lyapunov equation. Returns
/// +inf when that loop is unstable.
double cec_policy_cost(const SystemParams& truth, const NoiseParams& noise, const CostParams& cost,
                       const SystemParams& model, const Matrix& L_model, const Matrix& K_model);

}  // namespace lqg_adapt
