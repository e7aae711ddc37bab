#include "calab/gridworld.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace calab {

std::string to_string(ActionSet set) {
  switch (set) {
    case ActionSet::AxisMoves: return "axis_moves";
    case ActionSet::AxisMoves2d4: return "axis_moves_2d_4";
    case ActionSet::KingMovesWithStay: return "king_moves_with_stay_9";
  }
  return "unknown";
}

ActionSet action_set_from_string(const std::string& name) {
  if (name == "axis_moves") return ActionSet::AxisMoves;
  if (name == "axis_moves_2d_4") return ActionSet::AxisMoves2d4;
  if (name == "king_moves_with_stay_9" || name == "king_moves_with_stay") {
    return ActionSet::KingMovesWithStay;
  }
  throw ConfigError("unknown action set '" + name + "'");
}

std::size_t GridSpec::n_states() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::size_t GridSpec::n_actions() const {
  switch (actions) {
    case ActionSet::AxisMoves:
    case ActionSet::AxisMoves2d4: return 2 * dims.size();
    case ActionSet::KingMovesWithStay: {
      std::size_t n = 1;
      for (std::size_t k = 0; k < dims.size(); ++k) n *= 3;
      return n;
    }
  }
  return 0;
}

void GridSpec::validate() const {
  if (dims.empty()) throw ConfigError("grid needs at least one axis");
  for (auto d : dims) {
    if (d == 0) throw ConfigError("grid axis sizes must be positive");
  }
  if (actions == ActionSet::AxisMoves2d4 && dims.size() != 2) {
    throw ConfigError("axis_moves_2d_4 needs a 2-D grid");
  }
  if (actions == ActionSet::KingMovesWithStay && dims.size() != 2) {
    throw ConfigError("king_moves_with_stay_9 needs a 2-D grid");
  }
  if (!(p_slip >= 0.0 && p_slip <= 1.0)) throw ConfigError("p_slip must lie in [0, 1]");
  if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("discount must lie in (0, 1)");
  for (const auto& g : goals) {
    if (g.size() != dims.size()) throw ConfigError("goal coordinates must match the grid rank");
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (g[k] >= dims[k]) throw ConfigError("goal lies outside the grid");
    }
  }
}

std::vector<std::vector<int>> action_offsets(const GridSpec& spec) {
  const std::size_t d = spec.dims.size();
  std::vector<std::vector<int>> out;
  if (spec.actions == ActionSet::KingMovesWithStay) {
    // (+1,+1), (+1,0), (+1,-1), (0,+1), ... , (-1,-1)
    const std::size_t n = spec.n_actions();
    for (std::size_t code = 0; code < n; ++code) {
      std::vector<int> off(d);
      std::size_t rest = code;
      for (std::size_t k = d; k-- > 0;) {
        off[k] = 1 - static_cast<int>(rest % 3);
        rest /= 3;
      }
      out.push_back(off);
    }
    return out;
  }
  for (std::size_t k = 0; k < d; ++k) {
    for (int sign : {+1, -1}) {
      std::vector<int> off(d, 0);
      off[k] = sign;
      out.push_back(off);
    }
  }
  return out;
}

std::vector<std::size_t> state_coords(std::size_t index, const GridSpec& spec) {
  if (index >= spec.n_states()) throw std::out_of_range("state index outside the grid");
  std::vector<std::size_t> coords(spec.dims.size());
  for (std::size_t k = spec.dims.size(); k-- > 0;) {
    coords[k] = index % spec.dims[k];
    index /= spec.dims[k];
  }
  return coords;
}

std::size_t state_index(const std::vector<std::size_t>& coords, const GridSpec& spec) {
  if (coords.size() != spec.dims.size()) throw std::out_of_range("coordinate rank mismatch");
  std::size_t index = 0;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    if (coords[k] >= spec.dims[k]) throw std::out_of_range("coordinate outside the grid");
    index = index * spec.dims[k] + coords[k];
  }
  return index;
}

TabularMdp build(const GridSpec& spec) {
  spec.validate();
  const std::size_t n_states = spec.n_states();
  const std::size_t n_actions = spec.n_actions();
  const auto offsets = action_offsets(spec);

  std::vector<bool> is_goal(n_states, false);
  if (spec.goals.empty()) {
    std::vector<std::size_t> corner;
    for (auto d : spec.dims) corner.push_back(d - 1);
    is_goal[state_index(corner, spec)] = true;
  }
  for (const auto& g : spec.goals) is_goal[state_index(g, spec)] = true;

  auto move = [&](const std::vector<std::size_t>& from, const std::vector<int>& off) {
    std::vector<std::size_t> to = from;
    for (std::size_t k = 0; k < from.size(); ++k) {
      const long long c = static_cast<long long>(from[k]) + off[k];
      if (c < 0 || c >= static_cast<long long>(spec.dims[k])) return state_index(from, spec);
      to[k] = static_cast<std::size_t>(c);
    }
    return state_index(to, spec);
  };
  auto cost_of = [&](std::size_t next) {
    return is_goal[next] ? -spec.goal_reward : -spec.step_reward;
  };

  std::vector<std::vector<Successor>> rows(n_states * n_actions);
  for (std::size_t i = 0; i < n_states; ++i) {
    if (is_goal[i] && spec.absorbing_goal) {
      for (std::size_t a = 0; a < n_actions; ++a) rows[i * n_actions + a] = {{i, 1.0, 0.0}};
      continue;
    }
    const auto here = state_coords(i, spec);
    std::vector<std::size_t> landing(n_actions);
    for (std::size_t a = 0; a < n_actions; ++a) landing[a] = move(here, offsets[a]);
    for (std::size_t a = 0; a < n_actions; ++a) {
      std::map<std::size_t, double> mass;
      mass[landing[a]] += 1.0 - spec.p_slip;
      if (spec.p_slip > 0.0) {
        for (std::size_t b = 0; b < n_actions; ++b) mass[landing[b]] += spec.p_slip / double(n_actions);
      }
      auto& row = rows[i * n_actions + a];
      for (const auto& [next, p] : mass) {
        if (p > 0.0) row.push_back({next, p, cost_of(next)});
      }
    }
  }
  return TabularMdp(n_states, n_actions, spec.discount, std::move(rows));
}

nlohmann::json to_json(const GridSpec& spec) {
  return {{"dims", spec.dims},
          {"actions", to_string(spec.actions)},
          {"goals", spec.goals},
          {"step_reward", spec.step_reward},
          {"goal_reward", spec.goal_reward},
          {"p_slip", spec.p_slip},
          {"discount", spec.discount},
          {"absorbing_goal", spec.absorbing_goal}};
}

GridSpec grid_from_json(const nlohmann::json& doc) {
  GridSpec spec;
  try {
    spec.dims = doc.at("dims").get<std::vector<std::size_t>>();
    spec.actions = action_set_from_string(doc.value("actions", std::string("axis_moves")));
    if (doc.contains("goals")) spec.goals = doc.at("goals").get<std::vector<std::vector<std::size_t>>>();
    spec.step_reward = doc.value("step_reward", spec.step_reward);
    spec.goal_reward = doc.value("goal_reward", spec.goal_reward);
    spec.p_slip = doc.value("p_slip", spec.p_slip);
    spec.discount = doc.value("discount", spec.discount);
    spec.absorbing_goal = doc.value("absorbing_goal", spec.absorbing_goal);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed grid spec: ") + e.what());
  }
  if (doc.contains("n_actions") && doc.at("n_actions").get<std::size_t>() != spec.n_actions()) {
    throw ConfigError("n_actions does not match the action set");
  }
  spec.validate();
  return spec;
}

}  // namespace calab
