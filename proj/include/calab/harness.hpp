#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "calab/approx_runner.hpp"
#include "calab/engine.hpp"
#include "calab/gridworld.hpp"

namespace calab {

enum class Algorithm { Ca, Ac, QLinear, LinearCa, LinearAc, NnCa, NnAc, DqnLite };

std::string to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

/// Where the MDP comes from: a file in the JSON MDP format or a grid spec.
struct MdpSource {
  std::optional<std::filesystem::path> file;
  std::optional<GridSpec> grid;

  TabularMdp load() const;
};

/// One experiment: an MDP, an algorithm and its hyperparameters, and the seeds.
/// `engine.seed` is ignored; every entry of `seeds` gets its own run.
struct RunConfig {
  std::string name = "run";
  MdpSource mdp;
  Algorithm algorithm = Algorithm::Ca;
  EngineConfig engine;
  ApproxSpec approx;
  std::vector<std::uint64_t> seeds{0};

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  /// FNV-1a over the canonical JSON form without the seed list.
  std::string hash() const;
};

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population, denominator n
  std::string formatted() const;
};

/// Mean and population standard deviation; requires a non-empty sample.
MetricSummary summarize_values(const std::vector<double>& values);

struct AggregateSummary {
  std::string name;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<std::uint64_t> failed_seeds;
  std::uint64_t final_step = 0;
  MetricSummary value_error_l2;
  MetricSummary value_error_sup;
  MetricSummary avg_reward;
  MetricSummary elapsed_seconds;

  nlohmann::json to_json() const;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::optional<RunTrace> trace;
  std::string error;  // set when the run aborted
  nlohmann::json abort_snapshot;
};

struct ExperimentResult {
  std::vector<SeedOutcome> runs;
  AggregateSummary summary;
  bool all_failed() const;
};

/// Summarizes the final rows of the successful runs.
AggregateSummary aggregate(const RunConfig& config, const std::vector<SeedOutcome>& runs);

/// V* by value iteration to sup-norm accuracy 1e-8, optionally cached on disk
/// under `cache_dir` by MDP digest.
ValueTable optimal_values(const TabularMdp& mdp, const std::optional<std::filesystem::path>& cache_dir = {});

/// One run per seed, spread over up to `workers` threads (0 = hardware
/// concurrency). V* is computed once. Deterministic given the seeds.
ExperimentResult run_experiment(const RunConfig& config, const std::vector<std::uint64_t>& seeds,
                                std::size_t workers = 0,
                                const std::optional<std::filesystem::path>& cache_dir = {});

inline constexpr const char* kCsvHeader = "step,value_error_l2,value_error_sup,avg_reward,elapsed_s";

/// CSV with header kCsvHeader and 17-significant-digit values.
void emit_csv(const RunTrace& trace, const std::filesystem::path& path);
std::vector<MetricRow> parse_csv(const std::filesystem::path& path);
void emit_rollout_csv(const RunTrace& trace, const std::filesystem::path& path);
void emit_summary(const AggregateSummary& summary, const std::filesystem::path& path);

/// Writes <name>_seed<k>.csv per successful seed, <name>_summary.json, and
/// rollout / abort sidecars when present. Returns the files written.
std::vector<std::filesystem::path> write_experiment(const ExperimentResult& result,
                                                    const RunConfig& config,
                                                    const std::filesystem::path& out_dir);

/// A sweep expands `grid` (config key or JSON pointer -> list of values) over
/// `base` by cartesian product.
std::vector<RunConfig> expand_sweep(const nlohmann::json& sweep,
                                    const std::filesystem::path& base_dir = {});

/// Table-1-style comparison: one line per summary with mu +- sigma columns.
std::string comparison_table(const std::vector<AggregateSummary>& summaries);

/// Output directory: explicit flag, else $CALAB_OUTPUT_DIR, else `fallback`.
std::filesystem::path resolve_output_dir(const std::optional<std::filesystem::path>& flag,
                                         const std::filesystem::path& fallback);

}  // namespace calab
