#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "calab/mdp.hpp"

namespace calab {

enum class ActionSet {
  AxisMoves,        // +/-1 along each axis: 2d actions
  AxisMoves2d4,     // AxisMoves restricted to 2-D grids
  KingMovesWithStay // every offset in {+1, 0, -1}^d, stay included: 3^d actions
};

std::string to_string(ActionSet set);
ActionSet action_set_from_string(const std::string& name);

/// Grid World layout and reward structure. Rewards are stored in the MDP as
/// costs g = -reward.
struct GridSpec {
  std::vector<std::size_t> dims;
  ActionSet actions = ActionSet::AxisMoves;
  /// Goal cells as coordinates; empty means the maximal-coordinate corner.
  std::vector<std::vector<std::size_t>> goals;
  double step_reward = -1.0;
  double goal_reward = 100.0;
  /// With this probability the chosen move is replaced by a uniformly random
  /// action from the set.
  double p_slip = 0.1;
  double discount = 0.9;
  bool absorbing_goal = true;

  std::size_t n_states() const;
  std::size_t n_actions() const;
  void validate() const;
};

/// Per-action coordinate offsets, in action-index order.
std::vector<std::vector<int>> action_offsets(const GridSpec& spec);

/// Row-major coordinates of a flat index (last axis fastest).
std::vector<std::size_t> state_coords(std::size_t index, const GridSpec& spec);
std::size_t state_index(const std::vector<std::size_t>& coords, const GridSpec& spec);

/// Compiles the grid into a sparse TabularMdp. Moves off the boundary keep the
/// agent in place; goal states absorb with zero cost when configured.
TabularMdp build(const GridSpec& spec);

nlohmann::json to_json(const GridSpec& spec);
GridSpec grid_from_json(const nlohmann::json& doc);

}  // namespace calab
