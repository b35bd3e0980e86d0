#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lqg_adapt/adaptive_loop.hpp"

namespace lqg_adapt {

struct ExperimentConfig {
  SystemParams system;
  double sigma_w_sq = 0.0;
  double sigma_z_sq = 0.0;
  CostParams cost;
  EpisodeSchedule schedule;

  std::size_t H = 12;
  double lambda = 1e-3;
  double gamma = 0.5;
  double alpha = 1.0;
  double c_tol = 1.0;
  double sigma_u_sq = 0.1;
  std::optional<HankelSplit> split;
  std::size_t lambda_min_stride = 1;
  bool oracle_diagnostics = true;

  std::uint64_t base_seed = 0;
  std::size_t n_runs = 1;
  std::vector<std::uint64_t> seed_list;  // overrides base_seed/n_runs when non-empty

  std::string output_dir = "out";
  std::vector<Algorithm> algorithms{Algorithm::kNaive, Algorithm::kIf2e};
  bool write_traces = true;

  NoiseParams noise() const;
  AlgoConfig algo_config(Algorithm algorithm, std::uint64_t seed) const;
  std::vector<std::uint64_t> seeds() const;
};

/// Every violated constraint, empty when the configuration is usable.
std::vector<std::string> validation_errors(const ExperimentConfig& config);

/// Parses a JSON document. Throws ParseError (with line and column) for
/// malformed JSON and ValidationError listing all problems otherwise.
ExperimentConfig parse_config(std::string_view json_text);

/// Reads and parses a file; IoError when it cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path);

struct SegmentDiagnostics {
  std::int64_t t = 0;
  double min_sv_gram = 0.0;
  double markov_error = 0.0;
};

/// Per-run data kept after a run finishes; the bulky signals are dropped.
struct RunSummary {
  Algorithm algorithm = Algorithm::kNaive;
  std::uint64_t seed = 0;
  bool failed = false;
  ErrorCode failure_code = ErrorCode::kDiverged;
  std::string failure_message;
  int failure_episode = -1;
  std::int64_t failure_t = -1;

  std::size_t T_w = 0;
  double J_star = 0.0;
  double average_cost = 0.0;
  double policy_cost = 0.0;
  std::optional<std::size_t> switch_step;
  std::vector<double> cost;
  std::vector<double> regret;  // cumulative
  std::vector<double> sigma_eta_sq;
  std::vector<double> lambda_min;
  std::vector<double> lambda_max;  // scale for roundoff in lambda_min
  std::vector<std::uint8_t> lambda_min_fresh;
  std::vector<SegmentDiagnostics> segments;  // last step of warm-up and of each episode
};

RunSummary summarize(const RunTrace& trace);
RunSummary summarize_failure(Algorithm algorithm, std::uint64_t seed, const RunFailure& failure);

struct AlgoAggregate {
  Algorithm algorithm = Algorithm::kNaive;
  std::size_t n = 0;  // successful runs
  std::size_t failed_runs = 0;
  std::vector<std::uint64_t> failed_seeds;
  double mean_avg_cost = 0.0;
  double std_avg_cost = 0.0;
  double mean_policy_cost = 0.0;
  std::optional<double> mean_switch_step;
  std::vector<double> regret_mean;
  std::vector<double> regret_std;
  std::vector<double> lambda_min_mean;
  std::vector<double> lambda_min_std;
  std::vector<std::uint8_t> stride_flag;
};

struct AggregateResult {
  double J_star = 0.0;
  std::size_t T_w = 0;
  std::size_t horizon = 0;
  std::vector<AlgoAggregate> algorithms;
};

/// Means and sample standard deviations over the successful runs of each
/// algorithm, reduced in input order.
AggregateResult aggregate(const std::vector<RunSummary>& runs,
                          const std::vector<Algorithm>& algorithms, double J_star,
                          const EpisodeSchedule& schedule);

/// LQG_ADAPT_THREADS when set to a positive integer, else requested (0 means
/// hardware concurrency).
std::size_t resolve_parallelism(std::size_t requested);

/// Runs every (algorithm, seed) pair on a bounded worker pool. The result is
/// ordered by algorithm, then seed, independent of scheduling.
std::vector<RunSummary> run_all(const ExperimentConfig& config, std::size_t parallel);

/// Writes regret_mean.csv, fim_lambda_min.csv, summary.csv, failures.csv and,
/// when requested, one trace file per successful run. Throws IoError.
void emit_csv(const AggregateResult& result, const std::vector<RunSummary>& runs,
              const std::filesystem::path& dir, bool write_traces);

/// printf %.17g; NaN becomes an empty field.
std::string format_number(double value);

struct OracleCheck {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Numerical self-checks of the library against independent computations on
/// the configured system.
std::vector<OracleCheck> run_oracle_checks(const ExperimentConfig& config);

}  // namespace lqg_adapt
