#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lqg_adapt/exploration.hpp"
#include "lqg_adapt/filtering.hpp"
#include "lqg_adapt/plant.hpp"
#include "lqg_adapt/sysid.hpp"

namespace lqg_adapt {

enum class Algorithm { kNaive, kIf2e, kCecOnly, kOptimal };

std::string_view to_string(Algorithm algorithm);
/// Accepts "naive", "if2e", "cec_only", "optimal".
std::optional<Algorithm> parse_algorithm(std::string_view name);

/// Warm-up of T_w steps followed by k_fin episodes; episode k covers
/// [2^k T_w, 2^{k+1} T_w).
struct EpisodeSchedule {
  std::size_t T_w = 25;
  std::size_t k_fin = 11;

  std::size_t episode_start(std::size_t k) const { return T_w << k; }
  std::size_t horizon() const { return T_w << k_fin; }
  /// -1 during warm-up.
  int episode_of(std::size_t t) const;
};

struct AlgoConfig {
  Algorithm algorithm = Algorithm::kNaive;
  std::size_t H = 12;
  double lambda = 1e-3;
  double gamma = 0.5;
  double alpha = 1.0;
  double c_tol = 1.0;
  double sigma_u = std::sqrt(0.1);  // warm-up input standard deviation
  std::uint64_t seed = 0;
  std::size_t lambda_min_stride = 1;
  std::optional<HankelSplit> split;  // default_split(H) when empty
  bool oracle_diagnostics = true;

  HankelSplit hankel_split() const { return split ? *split : default_split(H); }
  /// FIM bookkeeping runs for the exploring adaptive algorithms.
  bool tracks_fim() const {
    return algorithm == Algorithm::kNaive || algorithm == Algorithm::kIf2e;
  }
};

struct StepRecord {
  std::int64_t t = 0;
  int episode = -1;
  Vector y;
  Vector u;
  double cost = 0.0;
  double regret_increment = 0.0;
  double sigma_eta_sq = 0.0;
  double lambda_min = std::numeric_limits<double>::quiet_NaN();
  double lambda_max = std::numeric_limits<double>::quiet_NaN();
  bool lambda_min_fresh = false;
  // Filled on the last step of the warm-up and of every episode.
  double min_sv_gram = std::numeric_limits<double>::quiet_NaN();
  double markov_error = std::numeric_limits<double>::quiet_NaN();
};

struct RunTrace {
  Algorithm algorithm = Algorithm::kNaive;
  std::uint64_t seed = 0;
  std::size_t T_w = 0;
  double J_star = 0.0;
  std::vector<StepRecord> steps;
  /// Time step t at which FIM-scaled exploration was first used.
  std::optional<std::size_t> switch_step;
  /// Average cost of the final controller on the true plant without
  /// exploration; NaN when not computed.
  double policy_cost = std::numeric_limits<double>::quiet_NaN();

  double average_cost() const;
};

/// Prefix sums of c_t - J*.
std::vector<double> regret(const RunTrace& trace);

struct StepDecision {
  Vector u;
  int episode = -1;
  double sigma_eta_sq = 0.0;
  double lambda_min = std::numeric_limits<double>::quiet_NaN();
  double lambda_max = std::numeric_limits<double>::quiet_NaN();
  bool lambda_min_fresh = false;
  bool using_fim = false;
  double min_sv_gram = std::numeric_limits<double>::quiet_NaN();
  double markov_error = std::numeric_limits<double>::quiet_NaN();
};

/// Maps the information available at time t (all past y, u plus y_t) to u_t.
/// Calls must come in time order, one per step.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual StepDecision act(const Vector& y, Rng& rng) = 0;
  /// Average cost of the current policy without exploration on the true
  /// plant, or NaN if unknown.
  virtual double policy_cost(const SystemParams& truth, const NoiseParams& noise,
                             const CostParams& cost) const = 0;
};

/// Certainty-equivalent controller re-identified at episode starts, with
/// warm-up excitation and naive, FIM-scaled or no exploration.
class AdaptiveController final : public Controller {
 public:
  /// truth_markov, when given, is used only for the markov_error diagnostic.
  AdaptiveController(Eigen::Index nx, Eigen::Index ny, Eigen::Index nu, CostParams cost,
                     AlgoConfig config, EpisodeSchedule schedule,
                     std::optional<Matrix> truth_markov = std::nullopt);

  StepDecision act(const Vector& y, Rng& rng) override;
  double policy_cost(const SystemParams& truth, const NoiseParams& noise,
                     const CostParams& cost) const override;

  const std::optional<RealizedModel>& model() const { return model_; }
  const Matrix& gain() const { return K_; }
  const MarkovAccumulator& markov_data() const { return markov_; }
  const std::optional<FimAccumulator>& fim() const { return fim_; }
  const History& history() const { return history_; }

 private:
  void begin_episode(std::size_t k);

  Eigen::Index nx_, ny_, nu_;
  CostParams cost_;
  AlgoConfig config_;
  EpisodeSchedule schedule_;
  std::optional<Matrix> truth_markov_;

  std::size_t t_ = 0;
  int episode_ = -1;
  History history_;
  MarkovAccumulator markov_;
  std::optional<FimAccumulator> fim_;
  std::optional<RealizedModel> model_;
  SystemParams model_params_;
  Matrix K_;
  FilterState filter_;
};

/// u = -K xhat_{t|t} with the true parameters and no exploration.
class OptimalController final : public Controller {
 public:
  OptimalController(const SystemParams& truth, const NoiseParams& noise, const CostParams& cost);

  StepDecision act(const Vector& y, Rng& rng) override;
  double policy_cost(const SystemParams& truth, const NoiseParams& noise,
                     const CostParams& cost) const override;

 private:
  SystemParams params_;
  LqgGains gains_;
  FilterState filter_;
};

/// Run failure with the episode (-1 for warm-up) and step where it happened.
class RunFailure : public Error {
 public:
  RunFailure(ErrorCode code, const std::string& what, int episode, std::int64_t t)
      : Error(code, what), episode_(episode), t_(t) {}
  int episode() const { return episode_; }
  std::int64_t t() const { return t_; }

 private:
  int episode_;
  std::int64_t t_;
};

/// Everything one run owns.
struct LoopState {
  SystemParams system;
  NoiseParams noise;
  CostParams cost;
  EpisodeSchedule schedule;
  PlantState plant;
  std::unique_ptr<Controller> controller;
  RunTrace trace;
};

/// Builds the plant at steady state and the controller for config.algorithm.
LoopState make_loop(const AlgoConfig& config, const EpisodeSchedule& schedule,
                    const SystemParams& system, const NoiseParams& noise, const CostParams& cost);

/// Steps t = 0 .. T_w - 1 (Gaussian inputs for the adaptive algorithms).
void run_warmup(LoopState& loop);

/// Steps [2^k T_w, 2^{k+1} T_w); the adaptive controller re-identifies at the
/// first of them.
void run_episode(std::size_t k, LoopState& loop);

/// Warm-up then k_fin episodes. Throws RunFailure.
RunTrace run_full(const AlgoConfig& config, const EpisodeSchedule& schedule,
                  const SystemParams& system, const NoiseParams& noise, const CostParams& cost);

}  // namespace lqg_adapt
