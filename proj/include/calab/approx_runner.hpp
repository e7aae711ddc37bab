#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "calab/engine.hpp"

namespace calab {

enum class ApproxAlgorithm { QLinear, LinearCa, LinearAc, NnCa, NnAc, DqnLite };

struct ApproxSpec {
  /// Aggregation divisor for linear features.
  std::size_t block = 10;
  /// Network input: "index" (scaled state number) or "coords" (per-axis).
  std::string input = "index";
  /// Frozen target network refresh period for DQN-lite; 0 disables it.
  std::uint64_t target_period = 0;

  void validate() const;
};

nlohmann::json to_json(const ApproxSpec& spec);
ApproxSpec approx_from_json(const nlohmann::json& doc);

/// Runs a function-approximation learner on `mdp`. Transitions come from the
/// engine's samplers (state Y_n, action from the actor or uniform for
/// Q-learners, successor from p); step sizes are indexed by the global step.
/// `grid_dims` feeds the "coords" input encoding and may be empty otherwise.
RunTrace run_approx(ApproxAlgorithm algorithm, const EngineConfig& config, const ApproxSpec& spec,
                    const TabularMdp& mdp, const ValueTable& v_star,
                    const std::vector<std::size_t>& grid_dims = {});

}  // namespace calab
