#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "calab/exact_dp.hpp"
#include "calab/gridworld.hpp"
#include "calab/harness.hpp"
#include "calab/schedules.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRunFailure = 3;

constexpr std::uint64_t kPaperScaleSteps = 100'000'000;

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw calab::ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw calab::ConfigError(path.string() + ": " + e.what());
  }
}

void write_text(const std::string& text, const std::optional<fs::path>& path) {
  if (!path) {
    std::cout << text;
    return;
  }
  std::ofstream out(*path);
  if (!out) throw std::runtime_error("cannot write " + path->string());
  out << text;
}

struct ScheduleArgs {
  std::string family = "power";
  double alpha = 1.0;
  double k1 = 1.0;
  std::uint64_t k2 = 1;

  void add(CLI::App* app, const std::string& which) {
    app->add_option("--" + which + "-family", family, "step-size family for " + which)
        ->check(CLI::IsMember({"power", "scaled", "ideal_a", "ideal_b", "log_over_n", "inv_n_log"}));
    app->add_option("--" + which + "-alpha", alpha, "power exponent for " + which);
    app->add_option("--" + which + "-k1", k1, "scale constant K1 for " + which);
    app->add_option("--" + which + "-k2", k2, "block length K2 for " + which);
  }
  calab::StepSchedule build() const { return calab::StepSchedule::from_name(family, alpha, k1, k2); }
};

struct RunArgs {
  fs::path config;
  std::optional<fs::path> out;
  std::optional<fs::path> cache_dir;
  std::vector<std::uint64_t> seeds;
  std::optional<std::uint64_t> steps;
  std::size_t workers = 0;
  bool paper_scale = false;
  bool no_time = false;

  void add(CLI::App* app) {
    app->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "output directory (overrides CALAB_OUTPUT_DIR)");
    app->add_option("--cache-dir", cache_dir, "directory for cached optimal values");
    app->add_option("--seeds", seeds, "seed list overriding the config");
    app->add_option("--steps", steps, "total steps overriding the config");
    app->add_option("--workers", workers, "worker threads (0 = hardware concurrency)");
    app->add_flag("--paper-scale", paper_scale, "run 1e8 steps per seed");
    app->add_flag("--no-time", no_time, "write 0 in the elapsed_s column");
  }

  void apply(calab::RunConfig& cfg) const {
    if (!seeds.empty()) cfg.seeds = seeds;
    if (paper_scale) cfg.engine.total_steps = kPaperScaleSteps;
    if (steps) cfg.engine.total_steps = *steps;
    if (no_time) cfg.engine.record_time = false;
  }
};

int cmd_solve(const fs::path& mdp_path, double tol, const std::string& method,
              const std::optional<fs::path>& out) {
  const calab::TabularMdp mdp = calab::load_mdp(mdp_path);
  const calab::SolveReport report =
      method == "vi" ? calab::value_iteration(mdp, tol) : calab::policy_iteration(mdp);
  const calab::StochasticPolicy pi = calab::StochasticPolicy::deterministic(report.actions, mdp.n_actions());
  const json doc{{"method", method},
                 {"converged", report.converged},
                 {"iterations", report.iterations},
                 {"residual", report.residual},
                 {"bellman_residual", calab::policy_residual(mdp, pi, report.value)},
                 {"value", std::vector<double>(report.value.data(), report.value.data() + report.value.size())},
                 {"policy", report.actions}};
  write_text(doc.dump(2) + "\n", out);
  return report.converged ? kExitOk : kExitRunFailure;
}

int cmd_gridworld(const fs::path& spec_path, const fs::path& out) {
  const calab::GridSpec spec = calab::grid_from_json(read_json(spec_path));
  const calab::TabularMdp mdp = calab::build(spec);
  calab::save_mdp(mdp, out);
  std::cerr << "wrote " << out.string() << " (" << mdp.n_states() << " states, " << mdp.n_actions()
            << " actions)\n";
  return kExitOk;
}

int report_experiment(const calab::RunConfig& cfg, const calab::ExperimentResult& result,
                      const fs::path& out_dir) {
  for (const auto& path : calab::write_experiment(result, cfg, out_dir)) {
    std::cerr << "wrote " << path.string() << '\n';
  }
  for (const auto& r : result.runs) {
    if (!r.trace) std::cerr << "seed " << r.seed << " failed: " << r.error << '\n';
  }
  return result.all_failed() ? kExitRunFailure : kExitOk;
}

int cmd_run(const RunArgs& args) {
  calab::RunConfig cfg = calab::RunConfig::from_json(read_json(args.config), args.config.parent_path());
  args.apply(cfg);
  const fs::path out_dir = calab::resolve_output_dir(args.out, "calab_out");
  const auto result = calab::run_experiment(cfg, cfg.seeds, args.workers, args.cache_dir);
  const int code = report_experiment(cfg, result, out_dir);
  std::cout << calab::comparison_table({result.summary});
  return code;
}

int cmd_sweep(const RunArgs& args) {
  auto configs = calab::expand_sweep(read_json(args.config), args.config.parent_path());
  const fs::path out_dir = calab::resolve_output_dir(args.out, "calab_out");
  std::vector<calab::AggregateSummary> summaries;
  bool any_failed = false;
  for (auto& cfg : configs) {
    args.apply(cfg);
    const auto result = calab::run_experiment(cfg, cfg.seeds, args.workers, args.cache_dir);
    any_failed = report_experiment(cfg, result, out_dir) != kExitOk || any_failed;
    summaries.push_back(result.summary);
  }
  const std::string table = calab::comparison_table(summaries);
  write_text(table, out_dir / "comparison.txt");
  std::cout << table;
  return any_failed ? kExitRunFailure : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-timescale critic-actor and actor-critic experiments on tabular MDPs"};
  app.require_subcommand(1);

  fs::path solve_mdp;
  double solve_tol = 1e-10;
  std::string solve_method = "vi";
  std::optional<fs::path> solve_out;
  auto* solve = app.add_subcommand("solve", "solve an MDP exactly");
  solve->add_option("mdp", solve_mdp, "MDP file (JSON)")->required()->check(CLI::ExistingFile);
  solve->add_option("--tol", solve_tol, "value iteration tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--method", solve_method, "vi or pi")->check(CLI::IsMember({"vi", "pi"}));
  solve->add_option("--out", solve_out, "write the result here instead of stdout");

  auto* grid = app.add_subcommand("gridworld", "gridworld tools");
  grid->require_subcommand(1);
  fs::path grid_spec;
  fs::path grid_out;
  auto* gen = grid->add_subcommand("gen", "build a gridworld MDP file from a spec");
  gen->add_option("spec", grid_spec, "grid spec (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--out,-o", grid_out, "output MDP file")->required();

  ScheduleArgs sched_a{"power", 0.95, 1.0, 100};
  ScheduleArgs sched_b{"power", 0.75, 1.0, 100};
  std::uint64_t prefix = 1'000'000;
  std::size_t check_states = 10;
  std::size_t check_actions = 3;
  std::uint64_t check_seed = 1;
  auto* check = app.add_subcommand("check-schedule", "check step-size schedules over a finite prefix");
  sched_a.add(check, "a");
  sched_b.add(check, "b");
  check->add_option("--prefix", prefix, "number of steps inspected");
  check->add_option("--states", check_states, "state count for the sampling checks");
  check->add_option("--actions", check_actions, "action count for the sampling checks");
  check->add_option("--seed", check_seed, "seed for the sampling checks");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run one experiment config over its seeds");
  run_args.add(run);

  RunArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "run a config grid and print a comparison table");
  sweep_args.add(sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return cmd_solve(solve_mdp, solve_tol, solve_method, solve_out);
    if (*gen) return cmd_gridworld(grid_spec, grid_out);
    if (*check) {
      calab::SamplerSpec sampler;
      const auto report = calab::check_assumptions(sched_a.build(), sched_b.build(), prefix, sampler,
                                                   check_states, check_actions, check_seed);
      std::cout << report.to_json().dump(2) << '\n';
      return report.all_pass() ? kExitOk : kExitRunFailure;
    }
    if (*run) return cmd_run(run_args);
    if (*sweep) return cmd_sweep(sweep_args);
  } catch (const calab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRunFailure;
  }
  return kExitOk;
}
