#include "calab/approx_runner.hpp"

#include <chrono>
#include <cmath>
#include <functional>

#include "calab/func_approx.hpp"

namespace calab {

void ApproxSpec::validate() const {
  if (block == 0) throw ConfigError("approximator block must be at least 1");
  if (input != "index" && input != "coords") {
    throw ConfigError("approximator input must be 'index' or 'coords'");
  }
}

nlohmann::json to_json(const ApproxSpec& spec) {
  return {{"block", spec.block}, {"input", spec.input}, {"target_period", spec.target_period}};
}

ApproxSpec approx_from_json(const nlohmann::json& doc) {
  ApproxSpec spec;
  try {
    spec.block = doc.value("block", spec.block);
    spec.input = doc.value("input", spec.input);
    spec.target_period = doc.value("target_period", spec.target_period);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed approximator: ") + e.what());
  }
  spec.validate();
  return spec;
}

namespace {

std::size_t scaled_index(double u, std::size_t n) {
  return std::min(static_cast<std::size_t>(u * double(n)), n - 1);
}

std::size_t draw(std::span<const double> weights, double u) {
  for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  return weights.size() - 1;
}

// Shared sampling and bookkeeping; the learner supplies the behaviour policy,
// the update and the cost-convention value estimate.
struct Learner {
  std::function<Eigen::VectorXd(std::size_t)> behaviour;
  std::function<void(const Transition&, std::uint64_t)> update;
  std::function<double(std::size_t)> cost_value;
  std::function<nlohmann::json()> weights;
};

RunTrace drive(Learner& learner, const EngineConfig& config, const TabularMdp& mdp,
               const ValueTable& v_star) {
  const std::size_t n_states = mdp.n_states();
  const SamplerSpec& sp = config.sampler;
  const DiscreteSampler y_law =
      sp.mode == SamplerMode::IidCustom ? DiscreteSampler(sp.y_dist) : DiscreteSampler();
  RngStreams rng(config.seed);
  std::size_t trajectory_state = 0;
  double reward_sum = 0.0;
  RunTrace trace;
  const auto start = std::chrono::steady_clock::now();

  auto record = [&](std::uint64_t n) {
    ValueTable est(static_cast<Eigen::Index>(n_states));
    for (std::size_t i = 0; i < n_states; ++i) est[static_cast<Eigen::Index>(i)] = learner.cost_value(i);
    const ValueTable err = est - v_star;
    const double elapsed =
        config.record_time
            ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
            : 0.0;
    trace.rows.push_back({n, err.norm(), err.cwiseAbs().maxCoeff(),
                          n == 0 ? 0.0 : reward_sum / double(n), elapsed});
    trace.final_value = est;
  };

  record(0);
  for (std::uint64_t n = 0; n < config.total_steps; ++n) {
    const double uy = rng.uniform(RngStreams::kY);
    std::size_t y = 0;
    switch (sp.mode) {
      case SamplerMode::IidUniform: y = scaled_index(uy, n_states); break;
      case SamplerMode::IidCustom: y = y_law(uy); break;
      case SamplerMode::OnPolicyTrajectory:
        y = uy < sp.restart_prob ? scaled_index(uy / sp.restart_prob, n_states) : trajectory_state;
        break;
    }
    const Eigen::VectorXd probs = learner.behaviour(y);
    const std::size_t a = draw({probs.data(), static_cast<std::size_t>(probs.size())},
                               rng.uniform(RngStreams::kAction));
    const auto succ = mdp.successors(y, a);
    std::vector<double> p;
    for (const auto& s : succ) p.push_back(s.prob);
    const Successor& nx = succ[draw(p, rng.uniform(RngStreams::kCriticNext))];
    learner.update({y, a, -nx.cost, nx.next, false}, n);
    trajectory_state = nx.next;
    reward_sum -= nx.cost;
    const std::uint64_t done = n + 1;
    if (done % config.metric_period == 0 || done == config.total_steps) record(done);
  }
  trace.final_snapshot = {{"step", config.total_steps},
                          {"weights", learner.weights()},
                          {"rng", rng.save()},
                          {"reward_sum", reward_sum}};
  return trace;
}

}  // namespace

RunTrace run_approx(ApproxAlgorithm algorithm, const EngineConfig& config, const ApproxSpec& spec,
                    const TabularMdp& mdp, const ValueTable& v_star,
                    const std::vector<std::size_t>& grid_dims) {
  config.validate(mdp);
  spec.validate();
  if (static_cast<std::size_t>(v_star.size()) != mdp.n_states()) {
    throw ConfigError("V* length does not match the MDP");
  }
  const std::size_t n_actions = mdp.n_actions();
  const double gamma = mdp.discount();
  const Eigen::VectorXd uniform =
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_actions), 1.0 / double(n_actions));
  const bool ca_order = algorithm == ApproxAlgorithm::LinearCa || algorithm == ApproxAlgorithm::NnCa;
  const Mode mode = ca_order ? Mode::CriticActor : Mode::ActorCritic;

  StateEncoder enc = StateEncoder::index(mdp.n_states());
  if (spec.input == "coords") {
    std::size_t product = 1;
    for (auto d : grid_dims) product *= d;
    if (grid_dims.empty() || product != mdp.n_states()) {
      throw ConfigError("coords input needs grid dimensions matching the MDP");
    }
    enc = StateEncoder::coords(grid_dims);
  }

  switch (algorithm) {
    case ApproxAlgorithm::QLinear: {
      const LinearFeatureMap map(mdp.n_states(), spec.block);
      Matrix w = Matrix::Zero(static_cast<Eigen::Index>(n_actions), static_cast<Eigen::Index>(map.dim()));
      Learner l{
          [&](std::size_t) { return uniform; },
          [&](const Transition& t, std::uint64_t n) {
            w = qlearn_linear_step(w, t, config.schedule_a(n), map, gamma);
          },
          [&](std::size_t i) { return -w.col(static_cast<Eigen::Index>(map.index(i))).maxCoeff(); },
          [&] { return nlohmann::json(std::vector<double>(w.data(), w.data() + w.size())); }};
      return drive(l, config, mdp, v_star);
    }
    case ApproxAlgorithm::LinearCa:
    case ApproxAlgorithm::LinearAc: {
      const LinearFeatureMap map(mdp.n_states(), spec.block);
      const LinearPolicyFeatures feats(map, n_actions);
      Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(map.dim()));
      Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(feats.dim()));
      Learner l{
          [&](std::size_t i) { return feats.policy(theta, i); },
          [&](const Transition& t, std::uint64_t n) {
            const double critic_step = mode == Mode::CriticActor ? config.schedule_a(n) : config.schedule_b(n);
            const double actor_step = mode == Mode::CriticActor ? config.schedule_b(n) : config.schedule_a(n);
            const double delta = td_error(w, t, map, gamma);
            w = td0_linear_step(w, t, critic_step, map, gamma);
            theta = pg_actor_step(theta, t.state, t.action, delta, actor_step, feats);
          },
          [&](std::size_t i) { return -map.value(w, i); },
          [&] {
            return nlohmann::json{{"critic", std::vector<double>(w.data(), w.data() + w.size())},
                                  {"actor", std::vector<double>(theta.data(), theta.data() + theta.size())}};
          }};
      return drive(l, config, mdp, v_star);
    }
    case ApproxAlgorithm::NnCa:
    case ApproxAlgorithm::NnAc: {
      NnActorCritic net{MlpParams::standard(enc.input_dim(), 1, config.seed),
                        MlpParams::standard(enc.input_dim(), n_actions, config.seed + 1)};
      Learner l{
          [&](std::size_t i) { return nn_policy(net, enc, i); },
          [&](const Transition& t, std::uint64_t n) {
            nn_ca_or_ac_step(net, t, enc, gamma, mode, config.schedule_a, config.schedule_b, n);
          },
          [&](std::size_t i) { return -mlp_forward(net.critic, enc(i))[0]; },
          [&] { return nlohmann::json{{"critic", to_json(net.critic)}, {"actor", to_json(net.actor)}}; }};
      return drive(l, config, mdp, v_star);
    }
    case ApproxAlgorithm::DqnLite: {
      DqnLite agent = make_dqn_lite(MlpParams::standard(enc.input_dim(), n_actions, config.seed),
                                    spec.target_period);
      Learner l{
          [&](std::size_t) { return uniform; },
          [&](const Transition& t, std::uint64_t n) {
            dqn_lite_step(agent, t, enc, gamma, config.schedule_a(n));
          },
          [&](std::size_t i) { return -mlp_forward(agent.q, enc(i)).maxCoeff(); },
          [&] { return to_json(agent.q); }};
      return drive(l, config, mdp, v_star);
    }
  }
  throw InternalError("unhandled approximation algorithm");
}

}  // namespace calab
