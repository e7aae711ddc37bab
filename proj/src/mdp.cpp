#include "calab/mdp.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace calab {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

std::string pair_name(std::size_t i, std::size_t a) {
  return "(" + std::to_string(i) + ", " + std::to_string(a) + ")";
}

}  // namespace

TabularMdp::TabularMdp(std::size_t n_states, std::size_t n_actions, double discount,
                       std::vector<std::vector<Successor>> rows)
    : n_states_(n_states), n_actions_(n_actions), discount_(discount) {
  require(n_states > 0, "MDP needs at least one state");
  require(n_actions > 0, "MDP needs at least one action");
  require(discount > 0.0 && discount < 1.0, "discount must lie in (0, 1)");
  require(rows.size() == n_states * n_actions,
          "expected " + std::to_string(n_states * n_actions) + " successor rows, got " +
              std::to_string(rows.size()));

  offsets_.reserve(rows.size() + 1);
  offsets_.push_back(0);
  for (std::size_t row = 0; row < rows.size(); ++row) {
    auto& succ = rows[row];
    const std::size_t i = row / n_actions;
    const std::size_t a = row % n_actions;
    require(!succ.empty(), "state-action " + pair_name(i, a) + " has no successors");
    std::sort(succ.begin(), succ.end(),
              [](const Successor& l, const Successor& r) { return l.next < r.next; });
    double total = 0.0;
    for (std::size_t k = 0; k < succ.size(); ++k) {
      const auto& s = succ[k];
      require(s.next < n_states, "successor index out of range at " + pair_name(i, a));
      require(k == 0 || succ[k - 1].next != s.next,
              "duplicate successor " + std::to_string(s.next) + " at " + pair_name(i, a));
      require(std::isfinite(s.prob) && s.prob >= 0.0, "negative probability at " + pair_name(i, a));
      require(std::isfinite(s.cost), "non-finite cost at " + pair_name(i, a));
      total += s.prob;
    }
    require(std::abs(total - 1.0) <= kRowSumTolerance,
            "transition row " + pair_name(i, a) + " sums to " + std::to_string(total));
    // Rows already at rounding distance from one are kept bit-for-bit so
    // that save/load round trips preserve the digest.
    const bool rescale = std::abs(total - 1.0) > 1e-12;
    for (auto& s : succ) {
      if (rescale) s.prob /= total;
      entries_.push_back(s);
    }
    offsets_.push_back(entries_.size());
  }
}

TabularMdp TabularMdp::from_dense(std::size_t n_states, std::size_t n_actions, double discount,
                                  std::span<const double> trans, std::span<const double> cost) {
  const std::size_t expected = n_states * n_actions * n_states;
  require(trans.size() == expected && cost.size() == expected,
          "dense tensors must have |S|*|U|*|S| entries");
  std::vector<std::vector<Successor>> rows(n_states * n_actions);
  for (std::size_t row = 0; row < rows.size(); ++row) {
    for (std::size_t j = 0; j < n_states; ++j) {
      const double p = trans[row * n_states + j];
      require(p >= 0.0, "negative probability in dense tensor");
      if (p > 0.0) rows[row].push_back({j, p, cost[row * n_states + j]});
    }
  }
  return TabularMdp(n_states, n_actions, discount, std::move(rows));
}

double TabularMdp::transition(std::size_t state, std::size_t action, std::size_t next) const {
  for (const auto& s : successors(state, action)) {
    if (s.next == next) return s.prob;
  }
  return 0.0;
}

double TabularMdp::cost(std::size_t state, std::size_t action, std::size_t next) const {
  for (const auto& s : successors(state, action)) {
    if (s.next == next) return s.cost;
  }
  return 0.0;
}

std::size_t TabularMdp::max_successors() const {
  std::size_t best = 0;
  for (std::size_t row = 0; row + 1 < offsets_.size(); ++row) {
    best = std::max(best, offsets_[row + 1] - offsets_[row]);
  }
  return best;
}

bool TabularMdp::is_deterministic() const { return max_successors() == 1; }

std::uint64_t TabularMdp::digest() const {
  std::string bytes;
  auto put = [&bytes](auto value) {
    const auto raw = std::bit_cast<std::array<char, sizeof(value)>>(value);
    bytes.append(raw.begin(), raw.end());
  };
  put(static_cast<std::uint64_t>(n_states_));
  put(static_cast<std::uint64_t>(n_actions_));
  put(discount_);
  for (auto off : offsets_) put(static_cast<std::uint64_t>(off));
  for (const auto& s : entries_) {
    put(static_cast<std::uint64_t>(s.next));
    put(s.prob);
    put(s.cost);
  }
  return fnv1a(bytes);
}

StochasticPolicy::StochasticPolicy(Matrix probs) : probs_(std::move(probs)) {
  require(probs_.rows() > 0 && probs_.cols() > 0, "policy must be non-empty");
  for (Eigen::Index i = 0; i < probs_.rows(); ++i) {
    double total = 0.0;
    for (Eigen::Index a = 0; a < probs_.cols(); ++a) {
      const double p = probs_(i, a);
      require(std::isfinite(p) && p >= 0.0, "policy has a negative or non-finite entry");
      total += p;
    }
    require(std::abs(total - 1.0) <= kRowSumTolerance,
            "policy row " + std::to_string(i) + " sums to " + std::to_string(total));
  }
}

StochasticPolicy StochasticPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
  Matrix m = Matrix::Constant(static_cast<Eigen::Index>(n_states),
                              static_cast<Eigen::Index>(n_actions), 1.0 / double(n_actions));
  return StochasticPolicy(std::move(m));
}

StochasticPolicy StochasticPolicy::deterministic(std::span<const std::size_t> actions,
                                                 std::size_t n_actions) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(actions.size()),
                          static_cast<Eigen::Index>(n_actions));
  for (std::size_t i = 0; i < actions.size(); ++i) {
    require(actions[i] < n_actions, "action index out of range");
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(actions[i])) = 1.0;
  }
  return StochasticPolicy(std::move(m));
}

QTable expected_stage_cost(const TabularMdp& mdp) {
  QTable out(mdp.n_states(), mdp.n_actions());
  for (std::size_t i = 0; i < mdp.n_states(); ++i) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      double sum = 0.0;
      for (const auto& s : mdp.successors(i, a)) sum += s.prob * s.cost;
      out(i, a) = sum;
    }
  }
  return out;
}

QTable q_from_value(const TabularMdp& mdp, const ValueTable& v) {
  require(static_cast<std::size_t>(v.size()) == mdp.n_states(),
          "value table length does not match the MDP");
  const double gamma = mdp.discount();
  QTable out(mdp.n_states(), mdp.n_actions());
  for (std::size_t i = 0; i < mdp.n_states(); ++i) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      double sum = 0.0;
      for (const auto& s : mdp.successors(i, a)) {
        sum += s.prob * (s.cost + gamma * v[static_cast<Eigen::Index>(s.next)]);
      }
      out(i, a) = sum;
    }
  }
  return out;
}

std::vector<std::size_t> row_argmin(const Matrix& m) {
  std::vector<std::size_t> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < m.cols(); ++a) {
      if (m(i, a) < m(i, best)) best = a;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

ValueTable bellman_policy_backup(const TabularMdp& mdp, const StochasticPolicy& pi,
                                 const ValueTable& v) {
  require(pi.n_states() == mdp.n_states() && pi.n_actions() == mdp.n_actions(),
          "policy dimensions do not match the MDP");
  const QTable q = q_from_value(mdp, v);
  return q.cwiseProduct(pi.probs()).rowwise().sum();
}

GreedyBackup bellman_optimal_backup(const TabularMdp& mdp, const ValueTable& v) {
  const QTable q = q_from_value(mdp, v);
  GreedyBackup out{ValueTable(q.rows()), row_argmin(q)};
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    out.value[i] = q(i, static_cast<Eigen::Index>(out.greedy[static_cast<std::size_t>(i)]));
  }
  return out;
}

nlohmann::json mdp_to_json(const TabularMdp& mdp) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < mdp.n_states(); ++i) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      for (const auto& s : mdp.successors(i, a)) {
        rows.push_back({i, a, s.next, s.prob, s.cost});
      }
    }
  }
  return {{"n_states", mdp.n_states()},
          {"n_actions", mdp.n_actions()},
          {"discount", mdp.discount()},
          {"transitions", std::move(rows)}};
}

TabularMdp mdp_from_json(const nlohmann::json& doc) {
  try {
    const auto n_states = doc.at("n_states").get<std::size_t>();
    const auto n_actions = doc.at("n_actions").get<std::size_t>();
    const auto discount = doc.at("discount").get<double>();
    require(n_states > 0 && n_actions > 0, "n_states and n_actions must be positive");
    std::vector<std::vector<Successor>> rows(n_states * n_actions);
    for (const auto& t : doc.at("transitions")) {
      require(t.is_array() && t.size() == 5, "each transition must be [i, a, j, p, g]");
      const auto i = t[0].get<std::size_t>();
      const auto a = t[1].get<std::size_t>();
      require(i < n_states && a < n_actions, "transition state or action out of range");
      rows[i * n_actions + a].push_back(
          {t[2].get<std::size_t>(), t[3].get<double>(), t[4].get<double>()});
    }
    return TabularMdp(n_states, n_actions, discount, std::move(rows));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed MDP document: ") + e.what());
  }
}

TabularMdp load_mdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open MDP file " + path.string());
  try {
    return mdp_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write MDP file " + path.string());
  out << mdp_to_json(mdp).dump() << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace calab
