#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace calab {

/// Raised for malformed inputs: bad dimensions, invalid parameters, unreadable
/// config or MDP files. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an invariant that the library itself maintains is broken.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// State values, indexed by state. Cost units.
using ValueTable = Eigen::VectorXd;
/// State-action values, |S| x |U|. Cost units.
using QTable = Matrix;

/// One outgoing edge of a state-action pair.
struct Successor {
  std::size_t next = 0;
  double prob = 0.0;
  double cost = 0.0;
};

/// Finite discounted-cost MDP with a uniform action set.
///
/// Transitions are stored as sparse successor lists per (state, action) in a
/// compressed row layout; `transition()` and `cost()` give the dense view.
/// Rows must sum to one within `kRowSumTolerance` and are renormalized on
/// construction so the stored rows sum to one to machine precision.
class TabularMdp {
 public:
  static constexpr double kRowSumTolerance = 1e-9;

  /// `rows[i * n_actions + a]` lists the successors of (i, a).
  TabularMdp(std::size_t n_states, std::size_t n_actions, double discount,
             std::vector<std::vector<Successor>> rows);

  /// Builds from dense row-major tensors indexed [i][a][j]; zero-probability
  /// entries are dropped.
  static TabularMdp from_dense(std::size_t n_states, std::size_t n_actions, double discount,
                               std::span<const double> trans, std::span<const double> cost);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double discount() const { return discount_; }

  std::span<const Successor> successors(std::size_t state, std::size_t action) const {
    const std::size_t row = state * n_actions_ + action;
    return {entries_.data() + offsets_[row], offsets_[row + 1] - offsets_[row]};
  }

  /// Dense view p(i, a, j); zero when j is not a successor.
  double transition(std::size_t state, std::size_t action, std::size_t next) const;
  /// Dense view g(i, a, j); zero when j is not a successor.
  double cost(std::size_t state, std::size_t action, std::size_t next) const;

  std::size_t max_successors() const;
  bool is_deterministic() const;

  /// Stable 64-bit digest of the full model (dimensions, discount, edges).
  std::uint64_t digest() const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  double discount_;
  std::vector<std::size_t> offsets_;
  std::vector<Successor> entries_;
};

/// Row-stochastic |S| x |U| matrix of action probabilities.
class StochasticPolicy {
 public:
  static constexpr double kRowSumTolerance = 1e-12;

  explicit StochasticPolicy(Matrix probs);

  static StochasticPolicy uniform(std::size_t n_states, std::size_t n_actions);
  static StochasticPolicy deterministic(std::span<const std::size_t> actions, std::size_t n_actions);

  const Matrix& probs() const { return probs_; }
  double operator()(std::size_t state, std::size_t action) const { return probs_(state, action); }
  std::size_t n_states() const { return static_cast<std::size_t>(probs_.rows()); }
  std::size_t n_actions() const { return static_cast<std::size_t>(probs_.cols()); }

 private:
  Matrix probs_;
};

/// Result of a Bellman optimality backup: values and the lowest-index argmin.
struct GreedyBackup {
  ValueTable value;
  std::vector<std::size_t> greedy;
};

/// gbar(i, a) = sum_j p(i, a, j) g(i, a, j).
QTable expected_stage_cost(const TabularMdp& mdp);

/// (T_pi V)(i) = sum_a pi(i, a) sum_j p(i, a, j) (g(i, a, j) + gamma V(j)).
ValueTable bellman_policy_backup(const TabularMdp& mdp, const StochasticPolicy& pi,
                                 const ValueTable& v);

/// (T V)(i) = min_a Q(i, a | V); ties go to the lowest action index.
GreedyBackup bellman_optimal_backup(const TabularMdp& mdp, const ValueTable& v);

/// Q(i, a | V) = sum_j p(i, a, j) (g(i, a, j) + gamma V(j)).
QTable q_from_value(const TabularMdp& mdp, const ValueTable& v);

/// Lowest-index argmin of each row.
std::vector<std::size_t> row_argmin(const Matrix& m);

// Structured-text (JSON) MDP format:
//   {"n_states": N, "n_actions": M, "discount": g,
//    "transitions": [[i, a, j, p, g], ...]}
nlohmann::json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const nlohmann::json& doc);
TabularMdp load_mdp(const std::filesystem::path& path);
void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path);

/// 64-bit FNV-1a, used for config and model digests.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex_digest(std::uint64_t value);

}  // namespace calab
