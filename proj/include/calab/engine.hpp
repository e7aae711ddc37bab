#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "calab/gibbs.hpp"
#include "calab/mdp.hpp"
#include "calab/sampler.hpp"
#include "calab/schedules.hpp"

namespace calab {

/// Which recursion runs on the slow schedule `a`.
///   CriticActor: values use a (slow), logits use b (fast).
///   ActorCritic: values use b (fast), logits use a (slow).
enum class Mode { CriticActor, ActorCritic };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

struct EngineConfig {
  Mode mode = Mode::CriticActor;
  StepSchedule schedule_a = StepSchedule::power(0.95, 1.0, 100);  // slow
  StepSchedule schedule_b = StepSchedule::power(0.75, 1.0, 100);  // fast
  double theta0 = 10.0;
  std::uint64_t total_steps = 0;
  std::uint64_t metric_period = 1000;
  std::uint64_t seed = 0;
  SamplerSpec sampler;
  /// Record wall-clock time in traces; off gives byte-reproducible output.
  bool record_time = true;
  /// Greedy-policy rollout evaluator; 0 disables it.
  std::uint64_t rollout_period = 0;
  std::uint64_t rollout_horizon = 200;
  std::uint64_t rollout_episodes = 10;

  void validate(const TabularMdp& mdp) const;
};

/// The transition the critic consumed in one step: (Y_n, phi_n, xi_n, g).
struct StepOutcome {
  std::size_t state = 0;
  std::size_t action = 0;
  std::size_t next = 0;
  double cost = 0.0;
};

/// Full mutable state of one critic-actor or actor-critic run.
struct EngineState {
  EngineState(const TabularMdp& mdp, const EngineConfig& config);

  ValueTable v;
  ThetaTable theta;
  UpdateCounters counters;
  RngStreams rng;
  Mode mode;
  StepSchedule schedule_a;
  StepSchedule schedule_b;
  SamplerSpec sampler;
  std::size_t trajectory_state = 0;
  double reward_sum = 0.0;  // sum of -g over consumed transitions

  std::uint64_t step() const { return counters.n(); }
  double average_reward() const {
    return counters.n() == 0 ? 0.0 : reward_sum / double(counters.n());
  }

  // Derived from `sampler`; rebuilt on restore.
  DiscreteSampler y_law;
  DiscreteSampler z_law;
  std::vector<double> scratch;
};

/// One step of the critic-actor recursions. Requires mode == CriticActor.
StepOutcome ca_step(EngineState& state, const TabularMdp& mdp);
/// One step with the timescales reversed. Requires mode == ActorCritic.
StepOutcome ac_step(EngineState& state, const TabularMdp& mdp);
/// Dispatches on state.mode.
StepOutcome advance(EngineState& state, const TabularMdp& mdp);

/// Set when the slow schedule does not look like o(fast) on a 10^6 prefix.
std::optional<std::string> timescale_warning(const StepSchedule& slow, const StepSchedule& fast);

/// Serialized state, sufficient to resume bit-exactly.
nlohmann::json snapshot(const EngineState& state);
EngineState restore(const TabularMdp& mdp, const nlohmann::json& doc);

struct MetricRow {
  std::uint64_t step = 0;
  double value_error_l2 = 0.0;
  double value_error_sup = 0.0;
  double avg_reward = 0.0;
  double elapsed_seconds = 0.0;
};

struct RolloutRow {
  std::uint64_t step = 0;
  double avg_reward = 0.0;
};

struct RunTrace {
  std::vector<MetricRow> rows;
  std::vector<RolloutRow> rollouts;
  ValueTable final_value;
  nlohmann::json final_snapshot;
};

/// Raised when V or theta stops being finite; carries the offending snapshot.
class RunAborted : public std::runtime_error {
 public:
  RunAborted(const std::string& what, nlohmann::json snapshot)
      : std::runtime_error(what), snapshot_(std::move(snapshot)) {}
  const nlohmann::json& snapshot() const { return snapshot_; }

 private:
  nlohmann::json snapshot_;
};

/// Runs config.total_steps steps, recording metrics against `v_star` at step 0,
/// every metric_period steps, and at the final step.
RunTrace run(const EngineConfig& config, const TabularMdp& mdp, const ValueTable& v_star);
/// As above, solving for V* first.
RunTrace run(const EngineConfig& config, const TabularMdp& mdp);

/// Only the logit recursion, with V frozen at `v`.
ThetaTable fast_actor_fixed_v(const TabularMdp& mdp, const ValueTable& v, std::uint64_t steps,
                              const StepSchedule& schedule_b, double theta0, std::uint64_t seed);

/// Mean per-step reward (-g) of the greedy policy argmax_a theta(i, a) over
/// rollouts from uniform start states.
double greedy_rollout_reward(const TabularMdp& mdp, const ThetaTable& theta,
                             std::uint64_t horizon, std::uint64_t episodes, std::uint64_t seed);

}  // namespace calab
