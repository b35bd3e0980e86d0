#include "lqg_adapt/adaptive_loop.hpp"

#include <utility>

namespace lqg_adapt {

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kNaive: return "naive";
    case Algorithm::kIf2e: return "if2e";
    case Algorithm::kCecOnly: return "cec_only";
    case Algorithm::kOptimal: return "optimal";
  }
  return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) {
  if (name == "naive") return Algorithm::kNaive;
  if (name == "if2e") return Algorithm::kIf2e;
  if (name == "cec_only") return Algorithm::kCecOnly;
  if (name == "optimal") return Algorithm::kOptimal;
  return std::nullopt;
}

int EpisodeSchedule::episode_of(std::size_t t) const {
  if (t < T_w) return -1;
  int k = 0;
  while (episode_start(static_cast<std::size_t>(k) + 1) <= t) ++k;
  return k;
}

double RunTrace::average_cost() const {
  if (steps.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const auto& s : steps) sum += s.cost;
  return sum / static_cast<double>(steps.size());
}

std::vector<double> regret(const RunTrace& trace) {
  std::vector<double> out;
  out.reserve(trace.steps.size());
  double acc = 0.0;
  for (const auto& s : trace.steps) {
    acc += s.regret_increment;
    out.push_back(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// AdaptiveController

AdaptiveController::AdaptiveController(Eigen::Index nx, Eigen::Index ny, Eigen::Index nu,
                                       CostParams cost, AlgoConfig config,
                                       EpisodeSchedule schedule, std::optional<Matrix> truth_markov)
    : nx_(nx),
      ny_(ny),
      nu_(nu),
      cost_(std::move(cost)),
      config_(std::move(config)),
      schedule_(schedule),
      truth_markov_(std::move(truth_markov)),
      history_(ny, nu),
      markov_(static_cast<Eigen::Index>(config_.H) * (ny + nu), ny),
      filter_(FilterState::zero(nx)) {
  if (config_.H == 0) throw Error(ErrorCode::kValidationError, "H must be >= 1");
  if (schedule_.T_w < config_.H) {
    throw Error(ErrorCode::kValidationError, "warm-up length must be >= H");
  }
  if (config_.lambda_min_stride == 0) {
    throw Error(ErrorCode::kValidationError, "lambda_min_stride must be >= 1");
  }
  if (config_.tracks_fim()) {
    fim_.emplace(static_cast<Eigen::Index>(config_.H) * (ny + nu), ny, config_.alpha,
                 config_.c_tol);
  }
}

void AdaptiveController::begin_episode(std::size_t k) {
  const MarkovEstimate est = markov_.estimate(config_.lambda);
  try {
    model_ = ho_kalman(est, nx_, ny_, nu_, config_.H, config_.hankel_split());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kRankDeficient) throw;
    throw Error(ErrorCode::kRealizationFailed, e.detail());
  }
  model_params_ = model_->params();
  // The closed loop may be unstable after a poor early estimate; the plant's
  // divergence guard decides whether the run survives.
  K_ = control_gain(model_params_, cost_, nullptr, /*require_stable=*/false);
  filter_ = FilterState::zero(nx_);
  episode_ = static_cast<int>(k);
}

StepDecision AdaptiveController::act(const Vector& y, Rng& rng) {
  if (y.size() != ny_) throw Error(ErrorCode::kDimensionMismatch, "observation length");
  const std::size_t t = t_;
  const int k = schedule_.episode_of(t);
  if (k != episode_) begin_episode(static_cast<std::size_t>(k));

  StepDecision d;
  d.episode = episode_;

  Vector phi;
  if (t >= config_.H) {
    phi = build_regressor(history_, t, config_.H);
    markov_.add(phi, y);
  }

  if (episode_ < 0) {
    d.u = config_.sigma_u * rng.standard_normal(nu_);
    d.sigma_eta_sq = config_.sigma_u * config_.sigma_u;
  } else {
    const RealizedModel& m = *model_;
    if (fim_) {
      fim_->update_innovation(y, m.C_hat * filter_.x_pred);
      if (t >= config_.H) fim_->update_fim(phi);
      if ((t - schedule_.T_w) % config_.lambda_min_stride == 0) {
        fim_->refresh_lambda_min();
        d.lambda_min_fresh = true;
      }
      d.lambda_min = fim_->cached_lambda_min();
      d.lambda_max = fim_->cached_lambda_max();
    }
    measurement_update(filter_, model_params_, m.L_hat, y);

    const std::size_t l_k = schedule_.episode_start(static_cast<std::size_t>(episode_));
    const NaiveSchedule naive{config_.gamma};
    double sigma_sq = 0.0;
    switch (config_.algorithm) {
      case Algorithm::kNaive:
        sigma_sq = naive_sigma(naive, l_k);
        break;
      case Algorithm::kIf2e: {
        const ExplorationLevel level = if2e_sigma(*fim_, naive, l_k);
        sigma_sq = level.sigma_sq;
        d.using_fim = level.using_fim;
        break;
      }
      default:
        break;
    }
    // Drawn even when unused so every algorithm consumes the same stream.
    const Vector eta = rng.standard_normal(nu_);
    d.u = -K_ * filter_.x_filt + std::sqrt(sigma_sq) * eta;
    d.sigma_eta_sq = sigma_sq;
    time_update(filter_, model_params_, d.u);
  }

  history_.push(y, d.u);
  ++t_;

  if (t_ == schedule_.episode_start(static_cast<std::size_t>(episode_ + 1)) &&
      markov_.n_samples() > 0) {
    d.min_sv_gram = min_sv_gram(markov_.gram());
    if (config_.oracle_diagnostics && truth_markov_) {
      d.markov_error = markov_error(markov_.estimate(config_.lambda), *truth_markov_);
    }
  }
  return d;
}

double AdaptiveController::policy_cost(const SystemParams& truth, const NoiseParams& noise,
                                       const CostParams& cost) const {
  if (!model_) return std::numeric_limits<double>::quiet_NaN();
  return cec_policy_cost(truth, noise, cost, model_params_, model_->L_hat, K_);
}

// ---------------------------------------------------------------------------
// OptimalController

OptimalController::OptimalController(const SystemParams& truth, const NoiseParams& noise,
                                     const CostParams& cost)
    : params_(truth), gains_(compute_gains(truth, noise, cost)), filter_(FilterState::zero(truth.nx())) {}

StepDecision OptimalController::act(const Vector& y, Rng& rng) {
  StepDecision d;
  measurement_update(filter_, params_, gains_.L, y);
  rng.standard_normal(params_.nu());
  d.u = -gains_.K * filter_.x_filt;
  time_update(filter_, params_, d.u);
  return d;
}

double OptimalController::policy_cost(const SystemParams& truth, const NoiseParams& noise,
                                      const CostParams& cost) const {
  return cec_policy_cost(truth, noise, cost, params_, gains_.L, gains_.K);
}

// ---------------------------------------------------------------------------
// Run driver

namespace {

void simulate_step(LoopState& loop) {
  const auto t = static_cast<std::size_t>(loop.plant.t);
  const Vector y = observe(loop.plant, loop.system, loop.noise);
  StepDecision d = loop.controller->act(y, loop.plant.rng);
  apply_input(loop.plant, loop.system, d.u);

  StepRecord r;
  r.t = static_cast<std::int64_t>(t);
  r.episode = loop.schedule.episode_of(t);
  r.cost = stage_cost(y, d.u, loop.cost);
  r.regret_increment = r.cost - loop.trace.J_star;
  r.sigma_eta_sq = d.sigma_eta_sq;
  r.lambda_min = d.lambda_min;
  r.lambda_max = d.lambda_max;
  r.lambda_min_fresh = d.lambda_min_fresh;
  r.min_sv_gram = d.min_sv_gram;
  r.markov_error = d.markov_error;
  r.y = y;
  r.u = std::move(d.u);
  if (d.using_fim && !loop.trace.switch_step) loop.trace.switch_step = t;
  loop.trace.steps.push_back(std::move(r));
}

}  // namespace

LoopState make_loop(const AlgoConfig& config, const EpisodeSchedule& schedule,
                    const SystemParams& system, const NoiseParams& noise, const CostParams& cost) {
  PlantState plant = init_steady_state(system, noise, config.seed);
  std::unique_ptr<Controller> controller;
  if (config.algorithm == Algorithm::kOptimal) {
    controller = std::make_unique<OptimalController>(system, noise, cost);
  } else {
    std::optional<Matrix> truth_markov;
    if (config.oracle_diagnostics) {
      const LqgGains g = compute_gains(system, noise, cost);
      truth_markov = markov_from_params(system, g.F, config.H);
    }
    controller = std::make_unique<AdaptiveController>(system.nx(), system.ny(), system.nu(), cost,
                                                      config, schedule, std::move(truth_markov));
  }
  RunTrace trace;
  trace.algorithm = config.algorithm;
  trace.seed = config.seed;
  trace.T_w = schedule.T_w;
  trace.J_star = optimal_cost(system, noise, cost);
  trace.steps.reserve(schedule.horizon());
  return LoopState{system, noise, cost, schedule, std::move(plant), std::move(controller),
                   std::move(trace)};
}

void run_warmup(LoopState& loop) {
  while (static_cast<std::size_t>(loop.plant.t) < loop.schedule.T_w) simulate_step(loop);
}

void run_episode(std::size_t k, LoopState& loop) {
  const std::size_t end = loop.schedule.episode_start(k + 1);
  if (static_cast<std::size_t>(loop.plant.t) != loop.schedule.episode_start(k)) {
    throw Error(ErrorCode::kInsufficientHistory, "episode " + std::to_string(k) +
                                                     " requested at t=" +
                                                     std::to_string(loop.plant.t));
  }
  while (static_cast<std::size_t>(loop.plant.t) < end) simulate_step(loop);
}

RunTrace run_full(const AlgoConfig& config, const EpisodeSchedule& schedule,
                  const SystemParams& system, const NoiseParams& noise, const CostParams& cost) {
  LoopState loop = make_loop(config, schedule, system, noise, cost);
  try {
    run_warmup(loop);
    for (std::size_t k = 0; k < schedule.k_fin; ++k) run_episode(k, loop);
  } catch (const Error& e) {
    const auto t = static_cast<std::int64_t>(loop.trace.steps.size());
    throw RunFailure(e.code(), e.detail(), schedule.episode_of(static_cast<std::size_t>(t)), t);
  }
  loop.trace.policy_cost = loop.controller->policy_cost(system, noise, cost);
  return std::move(loop.trace);
}

}  // namespace lqg_adapt
