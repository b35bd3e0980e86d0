#include "lqg_adapt/plant.hpp"

#include <cmath>
#include <numeric>

namespace lqg_adapt {

void SystemParams::check_dimensions() const {
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || C.cols() != n || n == 0 || B.cols() == 0 ||
      C.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch,
                "system matrices do not conform: A " + std::to_string(A.rows()) + "x" +
                    std::to_string(A.cols()) + ", B " + std::to_string(B.rows()) + "x" +
                    std::to_string(B.cols()) + ", C " + std::to_string(C.rows()) + "x" +
                    std::to_string(C.cols()));
  }
}

NoiseParams::NoiseParams(double sigma_w, double sigma_z) : sigma_w_(sigma_w), sigma_z_(sigma_z) {
  if (!(sigma_w > 0.0) || !(sigma_z > 0.0)) {
    throw Error(ErrorCode::kInvalidNoise, "noise standard deviations must be positive");
  }
}

NoiseParams NoiseParams::for_testing(double sigma_w, double sigma_z) {
  if (!(sigma_w >= 0.0) || !(sigma_z >= 0.0)) {
    throw Error(ErrorCode::kInvalidNoise, "noise standard deviations must be nonnegative");
  }
  NoiseParams out;
  out.sigma_w_ = sigma_w;
  out.sigma_z_ = sigma_z;
  return out;
}

std::vector<std::string> assumption_violations(const SystemParams& params) {
  params.check_dimensions();
  std::vector<std::string> out;
  const auto n = static_cast<int>(params.nx());
  if (!(spectral_radius(params.A) < 1.0)) out.emplace_back("A is not stable (rho(A) >= 1)");
  if (numerical_rank(controllability_matrix(params.A, params.B)) < n) {
    out.emplace_back("(A, B) is not controllable");
  }
  if (numerical_rank(observability_matrix(params.A, params.C)) < n) {
    out.emplace_back("(A, C) is not observable");
  }
  return out;
}

PlantState init_steady_state(const SystemParams& params, const NoiseParams& noise,
                             std::uint64_t seed) {
  const auto violations = assumption_violations(params);
  if (!violations.empty()) {
    std::string msg;
    for (const auto& v : violations) msg += (msg.empty() ? "" : "; ") + v;
    throw Error(ErrorCode::kAssumptionViolated, msg);
  }
  PlantState state;
  state.rng = Rng(seed);
  const auto n = params.nx();
  Matrix sigma = Matrix::Zero(n, n);
  if (noise.sigma_w() > 0.0 && noise.sigma_z() > 0.0) {
    sigma = solve_filter_dare(params.A, params.C, noise.sigma_w(), noise.sigma_z()).value;
  }
  state.x = sample_gaussian(Vector::Zero(n), sigma, state.rng);
  state.t = 0;
  return state;
}

PlantState init_at(const Vector& x0, std::uint64_t seed) {
  PlantState state;
  state.rng = Rng(seed);
  state.x = x0;
  return state;
}

Vector observe(PlantState& state, const SystemParams& params, const NoiseParams& noise) {
  if (state.observed) {
    throw Error(ErrorCode::kDimensionMismatch, "observe() called twice without an input");
  }
  state.pending_w = noise.sigma_w() * state.rng.standard_normal(params.nx());
  const Vector z = noise.sigma_z() * state.rng.standard_normal(params.ny());
  state.observed = true;
  return params.C * state.x + z;
}

void apply_input(PlantState& state, const SystemParams& params, const Vector& u) {
  if (u.size() != params.nu()) {
    throw Error(ErrorCode::kDimensionMismatch, "input has length " + std::to_string(u.size()) +
                                                   ", expected " + std::to_string(params.nu()));
  }
  if (!u.allFinite()) throw Error(ErrorCode::kNonFiniteInput, "input contains NaN or Inf");
  if (!state.observed) {
    throw Error(ErrorCode::kDimensionMismatch, "apply_input() called before observe()");
  }
  state.x = params.A * state.x + params.B * u + state.pending_w;
  state.observed = false;
  ++state.t;
  const double norm = state.x.norm();
  if (!std::isfinite(norm) || norm > kDivergenceBound) {
    throw Error(ErrorCode::kDiverged,
                "state norm " + std::to_string(norm) + " at t=" + std::to_string(state.t));
  }
}

Vector step(PlantState& state, const SystemParams& params, const NoiseParams& noise,
            const Vector& u) {
  Vector y = observe(state, params, noise);
  apply_input(state, params, u);
  return y;
}

double stage_cost(const Vector& y, const Vector& u, const CostParams& cost) {
  if (cost.Q.rows() != y.size() || cost.Q.cols() != y.size() || cost.R.rows() != u.size() ||
      cost.R.cols() != u.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "cost matrices do not conform to y and u");
  }
  return y.dot(cost.Q * y) + u.dot(cost.R * u);
}

}  // namespace lqg_adapt
