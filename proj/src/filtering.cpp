#include "lqg_adapt/filtering.hpp"

#include <limits>

#include <Eigen/Cholesky>

namespace lqg_adapt {

namespace {

void check_cost(const SystemParams& params, const CostParams& cost) {
  if (cost.Q.rows() != params.ny() || cost.Q.cols() != params.ny() ||
      cost.R.rows() != params.nu() || cost.R.cols() != params.nu()) {
    throw Error(ErrorCode::kDimensionMismatch, "cost matrices do not conform to the system");
  }
}

}  // namespace

Matrix control_gain(const SystemParams& params, const CostParams& cost, Matrix* P_out,
                    bool require_stable) {
  params.check_dimensions();
  check_cost(params, cost);
  const Matrix Qc = symmetrize(params.C.transpose() * cost.Q * params.C);
  const Matrix P = solve_control_dare(params.A, params.B, Qc, cost.R).value;
  const Matrix inner = params.B.transpose() * P * params.B + cost.R;
  Matrix K = inner.ldlt().solve(params.B.transpose() * P * params.A);
  if (require_stable && !(spectral_radius(params.A - params.B * K) < 1.0)) {
    throw Error(ErrorCode::kGainUnstable, "rho(A - BK) >= 1");
  }
  if (P_out != nullptr) *P_out = P;
  return K;
}

LqgGains compute_gains(const SystemParams& params, const NoiseParams& noise,
                       const CostParams& cost) {
  LqgGains g;
  g.K = control_gain(params, cost, &g.P);
  g.Sigma = solve_filter_dare(params.A, params.C, noise.sigma_w(), noise.sigma_z()).value;
  const auto ny = params.ny();
  g.Sigma_e = symmetrize(params.C * g.Sigma * params.C.transpose() +
                         noise.sigma_z() * noise.sigma_z() * Matrix::Identity(ny, ny));
  g.L = g.Sigma_e.llt().solve(params.C * g.Sigma).transpose();
  g.F = params.A * g.L;
  g.Abar = params.A - g.F * params.C;
  return g;
}

FilterState FilterState::zero(Eigen::Index nx) {
  return FilterState{Vector::Zero(nx), Vector::Zero(nx), 0};
}

void measurement_update(FilterState& fs, const SystemParams& params, const Matrix& L,
                        const Vector& y) {
  if (y.size() != params.ny() || L.rows() != params.nx() || L.cols() != params.ny() ||
      fs.x_pred.size() != params.nx()) {
    throw Error(ErrorCode::kDimensionMismatch, "measurement update operands do not conform");
  }
  fs.x_filt = fs.x_pred + L * (y - params.C * fs.x_pred);
}

void time_update(FilterState& fs, const SystemParams& params, const Vector& u) {
  if (u.size() != params.nu()) {
    throw Error(ErrorCode::kDimensionMismatch, "time update input does not conform");
  }
  fs.x_pred = params.A * fs.x_filt + params.B * u;
  ++fs.t;
}

FilterState filter_step(FilterState fs, const SystemParams& params, const Matrix& L,
                        const Vector& y, const Vector& u_applied_after) {
  measurement_update(fs, params, L, y);
  time_update(fs, params, u_applied_after);
  return fs;
}

double optimal_cost(const SystemParams& params, const NoiseParams& noise, const CostParams& cost) {
  if (noise.sigma_w() == 0.0 && noise.sigma_z() == 0.0) return 0.0;
  const LqgGains g = compute_gains(params, noise, cost);
  const Matrix& S = g.Sigma;
  const Matrix Sbar = S - S * params.C.transpose() * g.Sigma_e.llt().solve(params.C * S);
  const Matrix Qc = params.C.transpose() * cost.Q * params.C;
  const double sz2 = noise.sigma_z() * noise.sigma_z();
  return (Qc * Sbar).trace() + sz2 * cost.Q.trace() + (g.P * (S - Sbar)).trace();
}

double cec_policy_cost(const SystemParams& truth, const NoiseParams& noise, const CostParams& cost,
                       const SystemParams& model, const Matrix& L_model, const Matrix& K_model) {
  truth.check_dimensions();
  model.check_dimensions();
  const auto n = truth.nx();
  const auto m = model.nx();
  const auto ny = truth.ny();
  const Matrix& A = truth.A;
  const Matrix& B = truth.B;
  const Matrix& C = truth.C;
  const Matrix Im = Matrix::Identity(m, m);

  // [x_t; xhat_{t|t}] = G1 [x_{t-1}; xhat_{t-1|t-1}] + G2 [w_{t-1}; z_t]
  Matrix G1(n + m, n + m);
  G1 << A, -B * K_model, L_model * C * A,
      (Im - L_model * model.C) * (model.A - model.B * K_model) - L_model * C * B * K_model;
  Matrix G2 = Matrix::Zero(n + m, n + ny);
  G2.topLeftCorner(n, n) = Matrix::Identity(n, n);
  G2.bottomLeftCorner(m, n) = L_model * C;
  G2.bottomRightCorner(m, ny) = L_model;

  if (!G1.allFinite() || !(spectral_radius(G1) < 1.0)) {
    return std::numeric_limits<double>::infinity();
  }
  Matrix weight = Matrix::Zero(n + m, n + m);
  weight.topLeftCorner(n, n) = C.transpose() * cost.Q * C;
  weight.bottomRightCorner(m, m) = K_model.transpose() * cost.R * K_model;
  const Matrix S = dlyap(G1, weight);

  Vector noise_var(n + ny);
  noise_var.head(n).setConstant(noise.sigma_w() * noise.sigma_w());
  noise_var.tail(ny).setConstant(noise.sigma_z() * noise.sigma_z());
  const double js = (G2.transpose() * S * G2 * noise_var.asDiagonal()).trace();
  return js + noise.sigma_z() * noise.sigma_z() * cost.Q.trace();
}

}  // namespace lqg_adapt
