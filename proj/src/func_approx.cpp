#include "calab/func_approx.hpp"

#include <cmath>
#include <random>

namespace calab {

namespace {

void guard_finite(double x, const char* where) {
  if (!std::isfinite(x)) throw RunAborted(std::string("non-finite update in ") + where, nlohmann::json{});
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd out(logits.size());
  softmax_row({logits.data(), static_cast<std::size_t>(logits.size())},
              {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

}  // namespace

LinearFeatureMap::LinearFeatureMap(std::size_t n_states, std::size_t block)
    : n_states_(n_states), block_(block) {
  if (n_states == 0) throw ConfigError("feature map needs at least one state");
  if (block == 0) throw ConfigError("feature block must be at least 1");
}

Eigen::VectorXd LinearFeatureMap::features(std::size_t state) const {
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
  phi[static_cast<Eigen::Index>(index(state))] = 1.0;
  return phi;
}

LinearPolicyFeatures::LinearPolicyFeatures(LinearFeatureMap map, std::size_t n_actions)
    : map_(map), n_actions_(n_actions) {
  if (n_actions == 0) throw ConfigError("policy features need at least one action");
}

Eigen::VectorXd LinearPolicyFeatures::features(std::size_t state, std::size_t action) const {
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
  phi[static_cast<Eigen::Index>(index(state, action))] = 1.0;
  return phi;
}

Eigen::VectorXd LinearPolicyFeatures::logits(const Eigen::VectorXd& theta, std::size_t state) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(n_actions_));
  for (std::size_t a = 0; a < n_actions_; ++a) {
    out[static_cast<Eigen::Index>(a)] = theta[static_cast<Eigen::Index>(index(state, a))];
  }
  return out;
}

Eigen::VectorXd LinearPolicyFeatures::policy(const Eigen::VectorXd& theta, std::size_t state) const {
  return softmax(logits(theta, state));
}

double td_error(const Eigen::VectorXd& w, const Transition& t, const LinearFeatureMap& map,
                double gamma) {
  const double future = t.terminal ? 0.0 : gamma * map.value(w, t.next);
  return t.reward + future - map.value(w, t.state);
}

Eigen::VectorXd td0_linear_step(const Eigen::VectorXd& w, const Transition& t, double step,
                                const LinearFeatureMap& map, double gamma, double weight) {
  if (static_cast<std::size_t>(w.size()) != map.dim()) {
    throw ConfigError("critic weights do not match the feature map");
  }
  Eigen::VectorXd out = w;
  const double delta = td_error(w, t, map, gamma);
  const auto k = static_cast<Eigen::Index>(map.index(t.state));
  out[k] += step * weight * delta;
  guard_finite(out[k], "td0_linear_step");
  return out;
}

Eigen::VectorXd softmax_score(const Eigen::VectorXd& theta, std::size_t state, std::size_t action,
                              const LinearPolicyFeatures& feats) {
  const Eigen::VectorXd pi = feats.policy(theta, state);
  Eigen::VectorXd score = Eigen::VectorXd::Zero(theta.size());
  for (std::size_t b = 0; b < feats.n_actions(); ++b) {
    score[static_cast<Eigen::Index>(feats.index(state, b))] -= pi[static_cast<Eigen::Index>(b)];
  }
  score[static_cast<Eigen::Index>(feats.index(state, action))] += 1.0;
  return score;
}

Eigen::VectorXd pg_actor_step(const Eigen::VectorXd& theta, std::size_t state, std::size_t action,
                              double delta, double step, const LinearPolicyFeatures& feats) {
  if (static_cast<std::size_t>(theta.size()) != feats.dim()) {
    throw ConfigError("actor weights do not match the policy features");
  }
  Eigen::VectorXd out = theta + (step * delta) * softmax_score(theta, state, action, feats);
  guard_finite(out.sum(), "pg_actor_step");
  return out;
}

Matrix qlearn_linear_step(const Matrix& w, const Transition& t, double step,
                          const LinearFeatureMap& map, double gamma) {
  if (static_cast<std::size_t>(w.cols()) != map.dim()) {
    throw ConfigError("Q weights do not match the feature map");
  }
  const auto here = static_cast<Eigen::Index>(map.index(t.state));
  const auto there = static_cast<Eigen::Index>(map.index(t.next));
  const auto a = static_cast<Eigen::Index>(t.action);
  const double future = t.terminal ? 0.0 : gamma * w.col(there).maxCoeff();
  Matrix out = w;
  out(a, here) += step * (t.reward + future - w(a, here));
  guard_finite(out(a, here), "qlearn_linear_step");
  return out;
}

MlpParams MlpParams::zeros(const std::vector<std::size_t>& widths) {
  if (widths.size() < 2) throw ConfigError("network needs an input and an output width");
  MlpParams p;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const auto in = static_cast<Eigen::Index>(widths[k]);
    const auto out = static_cast<Eigen::Index>(widths[k + 1]);
    if (in == 0 || out == 0) throw ConfigError("layer widths must be positive");
    p.layers.push_back({Matrix::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
  return p;
}

MlpParams MlpParams::init(const std::vector<std::size_t>& widths, std::uint64_t seed) {
  MlpParams p = zeros(widths);
  std::mt19937_64 gen(seed);
  for (auto& layer : p.layers) {
    const double scale = 1.0 / std::sqrt(double(layer.weight.cols()));
    for (Eigen::Index k = 0; k < layer.weight.size(); ++k) {
      const double u = double(gen() >> 11) * 0x1.0p-53;
      layer.weight.data()[k] = (u - 0.5) * scale;
    }
  }
  return p;
}

MlpParams MlpParams::standard(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed) {
  return init({input_dim, 10, 10, output_dim}, seed);
}

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Eigen::VectorXd MlpParams::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(param_count()));
  Eigen::Index at = 0;
  for (const auto& l : layers) {
    flat.segment(at, l.weight.size()) = Eigen::Map<const Eigen::VectorXd>(l.weight.data(), l.weight.size());
    at += l.weight.size();
    flat.segment(at, l.bias.size()) = l.bias;
    at += l.bias.size();
  }
  return flat;
}

void MlpParams::unflatten(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != param_count()) {
    throw ConfigError("flat parameter vector has the wrong length");
  }
  Eigen::Index at = 0;
  for (auto& l : layers) {
    Eigen::Map<Eigen::VectorXd>(l.weight.data(), l.weight.size()) = flat.segment(at, l.weight.size());
    at += l.weight.size();
    l.bias = flat.segment(at, l.bias.size());
    at += l.bias.size();
  }
}

void MlpParams::add_scaled(const MlpParams& other, double scale) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].weight += scale * other.layers[k].weight;
    layers[k].bias += scale * other.layers[k].bias;
  }
}

bool MlpParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input) {
  Eigen::VectorXd h = input;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& l = params.layers[k];
    h = l.weight * h + l.bias;
    if (k + 1 < params.layers.size()) h = h.array().tanh();
  }
  return h;
}

MlpParams mlp_grad(const MlpParams& params, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& upstream) {
  const std::size_t depth = params.layers.size();
  // activations[k] is the input to layer k.
  std::vector<Eigen::VectorXd> activations{input};
  for (std::size_t k = 0; k + 1 < depth; ++k) {
    const auto& l = params.layers[k];
    activations.push_back((l.weight * activations.back() + l.bias).array().tanh());
  }
  MlpParams grad = params;
  Eigen::VectorXd delta = upstream;  // d<upstream, f> / d(pre-activation of layer k)
  for (std::size_t k = depth; k-- > 0;) {
    grad.layers[k].weight = delta * activations[k].transpose();
    grad.layers[k].bias = delta;
    if (k == 0) break;
    const Eigen::VectorXd back = params.layers[k].weight.transpose() * delta;
    delta = back.array() * (1.0 - activations[k].array().square());
  }
  return grad;
}

StateEncoder StateEncoder::index(std::size_t n_states) {
  StateEncoder e;
  e.n_states_ = n_states;
  return e;
}

StateEncoder StateEncoder::coords(std::vector<std::size_t> dims) {
  StateEncoder e;
  e.dims_ = std::move(dims);
  e.n_states_ = 1;
  for (auto d : e.dims_) e.n_states_ *= d;
  return e;
}

Eigen::VectorXd StateEncoder::operator()(std::size_t state) const {
  if (dims_.empty()) {
    Eigen::VectorXd x(1);
    x[0] = n_states_ > 1 ? double(state) / double(n_states_ - 1) : 0.0;
    return x;
  }
  Eigen::VectorXd x(static_cast<Eigen::Index>(dims_.size()));
  for (std::size_t k = dims_.size(); k-- > 0;) {
    x[static_cast<Eigen::Index>(k)] = double(state % dims_[k]) / double(dims_[k]);
    state /= dims_[k];
  }
  return x;
}

Eigen::VectorXd nn_policy(const NnActorCritic& net, const StateEncoder& enc, std::size_t state) {
  return softmax(mlp_forward(net.actor, enc(state)));
}

void nn_ca_or_ac_step(NnActorCritic& net, const Transition& t, const StateEncoder& enc,
                      double gamma, Mode mode, const StepSchedule& a, const StepSchedule& b,
                      std::uint64_t n) {
  const double critic_step = mode == Mode::CriticActor ? a(n) : b(n);
  const double actor_step = mode == Mode::CriticActor ? b(n) : a(n);
  const Eigen::VectorXd here = enc(t.state);
  const double v_here = mlp_forward(net.critic, here)[0];
  const double v_next = t.terminal ? 0.0 : mlp_forward(net.critic, enc(t.next))[0];
  const double delta = t.reward + gamma * v_next - v_here;

  const Eigen::VectorXd logits = mlp_forward(net.actor, here);
  Eigen::VectorXd score = -softmax(logits);
  score[static_cast<Eigen::Index>(t.action)] += 1.0;

  const MlpParams critic_grad = mlp_grad(net.critic, here, Eigen::VectorXd::Ones(1));
  const MlpParams actor_grad = mlp_grad(net.actor, here, score);
  net.critic.add_scaled(critic_grad, critic_step * delta);
  net.actor.add_scaled(actor_grad, actor_step * delta);
  if (!net.critic.all_finite() || !net.actor.all_finite()) {
    throw RunAborted("non-finite network parameters", nlohmann::json{});
  }
}

DqnLite make_dqn_lite(MlpParams q, std::uint64_t target_period) {
  DqnLite agent{std::move(q), std::nullopt, target_period, 0};
  if (target_period > 0) agent.target = agent.q;
  return agent;
}

void dqn_lite_step(DqnLite& agent, const Transition& t, const StateEncoder& enc, double gamma,
                   double step) {
  const MlpParams& bootstrap = agent.target ? *agent.target : agent.q;
  const double future = t.terminal ? 0.0 : gamma * mlp_forward(bootstrap, enc(t.next)).maxCoeff();
  const Eigen::VectorXd here = enc(t.state);
  const Eigen::VectorXd q = mlp_forward(agent.q, here);
  const auto a = static_cast<Eigen::Index>(t.action);
  Eigen::VectorXd upstream = Eigen::VectorXd::Zero(q.size());
  upstream[a] = q[a] - (t.reward + future);  // d/dQ of the half squared error
  agent.q.add_scaled(mlp_grad(agent.q, here, upstream), -step);
  if (!agent.q.all_finite()) throw RunAborted("non-finite Q-network parameters", nlohmann::json{});
  ++agent.updates;
  if (agent.target_period > 0 && agent.updates % agent.target_period == 0) agent.target = agent.q;
}

nlohmann::json to_json(const MlpParams& params) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : params.layers) {
    layers.push_back(
        {{"rows", l.weight.rows()},
         {"cols", l.weight.cols()},
         {"weight", std::vector<double>(l.weight.data(), l.weight.data() + l.weight.size())},
         {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return layers;
}

}  // namespace calab
