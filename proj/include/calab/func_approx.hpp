#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "calab/engine.hpp"
#include "calab/mdp.hpp"

// Function-approximation learners. Unlike the tabular core these work in the
// reward convention: r = -g, and critics estimate -V.

namespace calab {

/// One-hot state aggregation: state i lights position floor(i / block).
class LinearFeatureMap {
 public:
  LinearFeatureMap(std::size_t n_states, std::size_t block);

  std::size_t n_states() const { return n_states_; }
  std::size_t block() const { return block_; }
  std::size_t dim() const { return (n_states_ + block_ - 1) / block_; }
  std::size_t index(std::size_t state) const { return state / block_; }
  Eigen::VectorXd features(std::size_t state) const;
  double value(const Eigen::VectorXd& w, std::size_t state) const {
    return w[static_cast<Eigen::Index>(index(state))];
  }

 private:
  std::size_t n_states_;
  std::size_t block_;
};

/// Features for a Boltzmann actor over linear logits: the critic features of
/// state i placed in the a-th block of an |U| * dim vector.
class LinearPolicyFeatures {
 public:
  LinearPolicyFeatures(LinearFeatureMap map, std::size_t n_actions);

  const LinearFeatureMap& state_map() const { return map_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t dim() const { return n_actions_ * map_.dim(); }
  std::size_t index(std::size_t state, std::size_t action) const {
    return action * map_.dim() + map_.index(state);
  }
  Eigen::VectorXd features(std::size_t state, std::size_t action) const;
  Eigen::VectorXd logits(const Eigen::VectorXd& theta, std::size_t state) const;
  Eigen::VectorXd policy(const Eigen::VectorXd& theta, std::size_t state) const;

 private:
  LinearFeatureMap map_;
  std::size_t n_actions_;
};

struct Transition {
  std::size_t state = 0;
  std::size_t action = 0;
  double reward = 0.0;
  std::size_t next = 0;
  bool terminal = false;  // no bootstrap from `next`
};

/// r + gamma <w, phi(j)> - <w, phi(i)>.
double td_error(const Eigen::VectorXd& w, const Transition& t, const LinearFeatureMap& map,
                double gamma);

/// w + step * weight * delta * phi(i). `weight` is an importance factor for
/// expected or off-policy sweeps; 1 for plain sampled TD(0).
Eigen::VectorXd td0_linear_step(const Eigen::VectorXd& w, const Transition& t, double step,
                                const LinearFeatureMap& map, double gamma, double weight = 1.0);

/// grad_theta log pi_theta(action | state) for the Boltzmann-over-linear actor.
Eigen::VectorXd softmax_score(const Eigen::VectorXd& theta, std::size_t state, std::size_t action,
                              const LinearPolicyFeatures& feats);

/// theta + step * delta * grad log pi_theta(action | state).
Eigen::VectorXd pg_actor_step(const Eigen::VectorXd& theta, std::size_t state, std::size_t action,
                              double delta, double step, const LinearPolicyFeatures& feats);

/// Semi-gradient Q-learning on per-action rows of `w` (|U| x dim), toward
/// r + gamma max_b Q(j, b).
Matrix qlearn_linear_step(const Matrix& w, const Transition& t, double step,
                          const LinearFeatureMap& map, double gamma);

struct DenseLayer {
  Matrix weight;  // out x in
  Eigen::VectorXd bias;
};

/// Feed-forward network: tanh on every hidden layer, linear output layer.
struct MlpParams {
  std::vector<DenseLayer> layers;

  /// Layer widths {in, h1, ..., out}; weights uniform in [-0.5, 0.5] / sqrt(fan_in),
  /// biases zero.
  static MlpParams init(const std::vector<std::size_t>& widths, std::uint64_t seed);
  static MlpParams zeros(const std::vector<std::size_t>& widths);
  /// The two-hidden-layer, ten-unit architecture used throughout.
  static MlpParams standard(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed);

  std::size_t input_dim() const { return static_cast<std::size_t>(layers.front().weight.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(layers.back().weight.rows()); }
  std::size_t param_count() const;
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);
  /// this += scale * other, layer by layer.
  void add_scaled(const MlpParams& other, double scale);
  bool all_finite() const;
};

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input);

/// Reverse-mode gradient of <upstream, f(input)> with respect to every parameter.
MlpParams mlp_grad(const MlpParams& params, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& upstream);

/// Network input for a state: scaled index (1 input) or per-axis coordinate / size.
class StateEncoder {
 public:
  static StateEncoder index(std::size_t n_states);
  static StateEncoder coords(std::vector<std::size_t> dims);

  std::size_t input_dim() const { return dims_.empty() ? 1 : dims_.size(); }
  Eigen::VectorXd operator()(std::size_t state) const;

 private:
  std::size_t n_states_ = 1;
  std::vector<std::size_t> dims_;
};

struct NnActorCritic {
  MlpParams critic;  // scalar state value, reward convention
  MlpParams actor;   // |U| logits, softmax head
};

/// Softmax head of the actor network.
Eigen::VectorXd nn_policy(const NnActorCritic& net, const StateEncoder& enc, std::size_t state);

/// One online semi-gradient TD(0) critic step plus a policy-gradient actor step
/// on the same transition. CriticActor: critic uses a(n), actor b(n);
/// ActorCritic: the reverse.
void nn_ca_or_ac_step(NnActorCritic& net, const Transition& t, const StateEncoder& enc,
                      double gamma, Mode mode, const StepSchedule& a, const StepSchedule& b,
                      std::uint64_t n);

struct DqnLite {
  MlpParams q;  // |U| action values, reward convention
  std::optional<MlpParams> target;
  std::uint64_t target_period = 0;  // 0: no target network
  std::uint64_t updates = 0;
};

DqnLite make_dqn_lite(MlpParams q, std::uint64_t target_period);

/// Online semi-gradient Q-learning step, no replay.
void dqn_lite_step(DqnLite& agent, const Transition& t, const StateEncoder& enc, double gamma,
                   double step);

nlohmann::json to_json(const MlpParams& params);

}  // namespace calab
