#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lqg_adapt/experiment.hpp"

namespace {

using namespace lqg_adapt;

int cmd_run(const std::string& config_path, const std::vector<std::string>& algos,
            std::size_t n_seeds, const std::vector<std::uint64_t>& seed_list,
            const std::string& out_dir, std::size_t parallel, std::size_t stride, bool strict,
            bool no_traces) {
  ExperimentConfig config = load_config(config_path);
  if (!algos.empty()) {
    config.algorithms.clear();
    for (const auto& name : algos) {
      const auto a = parse_algorithm(name);
      if (!a) throw Error(ErrorCode::kValidationError, "unknown algorithm '" + name + "'");
      config.algorithms.push_back(*a);
    }
  }
  if (n_seeds > 0) {
    config.n_runs = n_seeds;
    config.seed_list.clear();
  }
  if (!seed_list.empty()) config.seed_list = seed_list;
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (stride > 0) config.lambda_min_stride = stride;
  if (no_traces) config.write_traces = false;
  if (const auto errs = validation_errors(config); !errs.empty()) {
    std::string msg;
    for (const auto& e : errs) msg += "\n  - " + e;
    throw Error(ErrorCode::kValidationError, msg);
  }

  const std::size_t threads = resolve_parallelism(parallel);
  const auto runs = run_all(config, threads);
  const AggregateResult result = aggregate(runs, config.algorithms,
                                           optimal_cost(config.system, config.noise(), config.cost),
                                           config.schedule);
  emit_csv(result, runs, config.output_dir, config.write_traces);

  std::size_t failures = 0;
  for (const auto& r : runs) {
    if (!r.failed) continue;
    ++failures;
    std::cerr << "run failed: algo=" << to_string(r.algorithm) << " seed=" << r.seed
              << " episode=" << r.failure_episode << " t=" << r.failure_t << " "
              << ToString(r.failure_code) << ": " << r.failure_message << "\n";
  }
  std::printf("J_star %s\n", format_number(result.J_star).c_str());
  for (const auto& a : result.algorithms) {
    std::printf("%-8s n=%zu failed=%zu mean_avg_cost=%s std=%s mean_policy_cost=%s",
                std::string(to_string(a.algorithm)).c_str(), a.n, a.failed_runs,
                format_number(a.mean_avg_cost).c_str(), format_number(a.std_avg_cost).c_str(),
                format_number(a.mean_policy_cost).c_str());
    if (a.mean_switch_step) std::printf(" mean_switch_step=%s", format_number(*a.mean_switch_step).c_str());
    std::printf("\n");
  }
  std::printf("outputs written to %s\n", config.output_dir.c_str());
  return (strict && failures > 0) ? 1 : 0;
}

int cmd_validate(const std::string& config_path) {
  const ExperimentConfig config = load_config(config_path);
  std::printf("valid: n_x=%lld n_u=%lld n_y=%lld, %zu run(s) per algorithm, horizon %zu\n",
              static_cast<long long>(config.system.nx()), static_cast<long long>(config.system.nu()),
              static_cast<long long>(config.system.ny()), config.seeds().size(),
              config.schedule.horizon());
  return 0;
}

int cmd_oracle(const std::string& config_path) {
  const ExperimentConfig config = load_config(config_path);
  bool ok = true;
  for (const auto& c : run_oracle_checks(config)) {
    std::printf("%s %s: %s (tolerance %s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                format_number(c.value).c_str(), format_number(c.tolerance).c_str());
    ok = ok && c.pass;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive LQG control experiments with naive and Fisher-information exploration"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> algos;
  std::size_t n_seeds = 0;
  std::vector<std::uint64_t> seed_list;
  std::string out_dir;
  std::size_t parallel = 0;
  std::size_t stride = 0;
  bool strict = false;
  bool no_traces = false;

  auto* run = app.add_subcommand("run", "Run the Monte Carlo experiment and write CSV outputs");
  run->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--algos", algos, "Subset of naive,if2e,optimal,cec_only")->delimiter(',');
  auto* seeds_opt = run->add_option("--seeds", n_seeds, "Number of runs from the base seed")
                        ->check(CLI::PositiveNumber);
  run->add_option("--seed-list", seed_list, "Explicit seeds")->delimiter(',')->excludes(seeds_opt);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--parallel", parallel, "Worker threads (LQG_ADAPT_THREADS overrides)");
  run->add_option("--lambda-min-stride", stride, "Steps between FIM eigenvalue refreshes")
      ->check(CLI::PositiveNumber);
  run->add_flag("--strict", strict, "Exit nonzero if any run failed");
  run->add_flag("--no-traces", no_traces, "Skip the per-run trace files");

  auto* validate = app.add_subcommand("validate", "Check a configuration file");
  validate->add_option("--config", config_path, "Experiment JSON")->required();

  auto* oracle = app.add_subcommand("oracle", "Numerical self-checks on the configured system");
  oracle->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      return cmd_run(config_path, algos, n_seeds, seed_list, out_dir, parallel, stride, strict,
                     no_traces);
    }
    if (*validate) return cmd_validate(config_path);
    if (*oracle) return cmd_oracle(config_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
