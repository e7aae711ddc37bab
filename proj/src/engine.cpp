#include "calab/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "calab/exact_dp.hpp"

namespace calab {

std::string to_string(Mode mode) {
  return mode == Mode::CriticActor ? "critic_actor" : "actor_critic";
}

Mode mode_from_string(const std::string& name) {
  if (name == "critic_actor" || name == "ca") return Mode::CriticActor;
  if (name == "actor_critic" || name == "ac") return Mode::ActorCritic;
  throw ConfigError("unknown engine mode '" + name + "'");
}

void EngineConfig::validate(const TabularMdp& mdp) const {
  if (!(theta0 > 0.0) || !std::isfinite(theta0)) throw ConfigError("theta0 must be positive");
  if (metric_period == 0) throw ConfigError("metric_period must be at least 1");
  if (rollout_period > 0 && (rollout_horizon == 0 || rollout_episodes == 0)) {
    throw ConfigError("rollout evaluator needs a positive horizon and episode count");
  }
  sampler.validate(mdp.n_states(), mdp.n_actions());
}

namespace {

std::size_t scaled_index(double u, std::size_t n) {
  return std::min(static_cast<std::size_t>(u * double(n)), n - 1);
}

std::size_t sample_successor(std::span<const Successor> succ, double u) {
  for (std::size_t k = 0; k + 1 < succ.size(); ++k) {
    if (u < succ[k].prob) return k;
    u -= succ[k].prob;
  }
  return succ.size() - 1;
}

std::size_t sample_from_row(std::span<const double> weights, double u) {
  double total = 0.0;
  for (double w : weights) total += w;
  u *= total;
  for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  return weights.size() - 1;
}

StepOutcome one_step(EngineState& st, const TabularMdp& mdp) {
  const std::size_t n_states = mdp.n_states();
  const std::size_t n_actions = mdp.n_actions();
  const double gamma = mdp.discount();
  const SamplerSpec& sp = st.sampler;

  // Y_n
  const double uy = st.rng.uniform(RngStreams::kY);
  std::size_t y = 0;
  switch (sp.mode) {
    case SamplerMode::IidUniform: y = scaled_index(uy, n_states); break;
    case SamplerMode::IidCustom: y = st.y_law(uy); break;
    case SamplerMode::OnPolicyTrajectory:
      y = uy < sp.restart_prob ? scaled_index(uy / sp.restart_prob, n_states) : st.trajectory_state;
      break;
  }

  // phi_n(Y_n) ~ pi_theta(Y_n, .)
  std::span<double> probs(st.scratch.data(), n_actions);
  softmax_row(st.theta.row(y), probs);
  const std::size_t phi = sample_from_row(probs, st.rng.uniform(RngStreams::kAction));

  // Z_n
  const double uz = st.rng.uniform(RngStreams::kZ);
  std::size_t zi = 0;
  std::size_t za = 0;
  if (sp.mode == SamplerMode::OnPolicyTrajectory) {
    zi = y;
    za = phi;
  } else if (sp.z_same_state) {
    zi = y;
    za = sp.mode == SamplerMode::IidCustom
             ? sample_from_row({sp.z_dist.data() + y * n_actions, n_actions}, uz)
             : scaled_index(uz, n_actions);
  } else {
    const std::size_t flat = sp.mode == SamplerMode::IidCustom ? st.z_law(uz)
                                                               : scaled_index(uz, n_states * n_actions);
    zi = flat / n_actions;
    za = flat % n_actions;
  }

  // xi_n ~ p(Y_n, phi_n, .) and eta_n ~ p(Z_n, .), independently.
  const auto critic_succ = mdp.successors(y, phi);
  const Successor& xi = critic_succ[sample_successor(critic_succ, st.rng.uniform(RngStreams::kCriticNext))];
  const auto actor_succ = mdp.successors(zi, za);
  const Successor& eta = actor_succ[sample_successor(actor_succ, st.rng.uniform(RngStreams::kActorNext))];

  // Both increments read the pre-step tables.
  const auto vy = static_cast<Eigen::Index>(y);
  const double critic_delta = xi.cost + gamma * st.v[static_cast<Eigen::Index>(xi.next)] - st.v[vy];
  const double actor_delta =
      st.v[static_cast<Eigen::Index>(zi)] - eta.cost - gamma * st.v[static_cast<Eigen::Index>(eta.next)];

  const std::uint64_t nu1 = st.counters.nu1(y);
  const std::uint64_t nu2 = st.counters.nu2(zi, za);
  const bool critic_slow = st.mode == Mode::CriticActor;
  const double critic_step = critic_slow ? st.schedule_a(nu1) : st.schedule_b(nu1);
  const double actor_step = critic_slow ? st.schedule_b(nu2) : st.schedule_a(nu2);

  st.v[vy] += critic_step * critic_delta;
  st.theta.set(zi, za, st.theta(zi, za) + actor_step * actor_delta);
  st.counters.tick(y, zi, za);
  st.trajectory_state = xi.next;
  st.reward_sum -= xi.cost;

  if (!std::isfinite(st.v[vy]) || !std::isfinite(st.theta(zi, za))) {
    throw RunAborted("non-finite value or logit at step " + std::to_string(st.step()),
                     snapshot(st));
  }
  return {y, phi, xi.next, xi.cost};
}

}  // namespace

EngineState::EngineState(const TabularMdp& mdp, const EngineConfig& config)
    : v(ValueTable::Zero(static_cast<Eigen::Index>(mdp.n_states()))),
      theta(mdp.n_states(), mdp.n_actions(), config.theta0),
      counters(mdp.n_states(), mdp.n_actions()),
      rng(config.seed),
      mode(config.mode),
      schedule_a(config.schedule_a),
      schedule_b(config.schedule_b),
      sampler(config.sampler),
      scratch(mdp.n_actions()) {
  config.validate(mdp);
  if (sampler.mode == SamplerMode::IidCustom) {
    y_law = DiscreteSampler(sampler.y_dist);
    z_law = DiscreteSampler(sampler.z_dist);
  }
}

StepOutcome ca_step(EngineState& state, const TabularMdp& mdp) {
  if (state.mode != Mode::CriticActor) throw ConfigError("ca_step requires critic_actor mode");
  return one_step(state, mdp);
}

StepOutcome ac_step(EngineState& state, const TabularMdp& mdp) {
  if (state.mode != Mode::ActorCritic) throw ConfigError("ac_step requires actor_critic mode");
  return one_step(state, mdp);
}

StepOutcome advance(EngineState& state, const TabularMdp& mdp) { return one_step(state, mdp); }

std::optional<std::string> timescale_warning(const StepSchedule& slow, const StepSchedule& fast) {
  const double early = slow(10'000) / fast(10'000);
  const double late = slow(1'000'000) / fast(1'000'000);
  if (late < 0.9 * early) return std::nullopt;
  return "slow schedule " + slow.name() + " is not o(" + fast.name() +
         "): a(n)/b(n) does not decay over n <= 10^6";
}

nlohmann::json snapshot(const EngineState& st) {
  return {{"step", st.step()},
          {"mode", to_string(st.mode)},
          {"schedule_a", to_json(st.schedule_a)},
          {"schedule_b", to_json(st.schedule_b)},
          {"theta0", st.theta.theta0()},
          {"sampler", to_json(st.sampler)},
          {"v", std::vector<double>(st.v.data(), st.v.data() + st.v.size())},
          {"theta", std::vector<double>(st.theta.values().data(),
                                        st.theta.values().data() + st.theta.values().size())},
          {"counters", st.counters.to_json()},
          {"rng", st.rng.save()},
          {"trajectory_state", st.trajectory_state},
          {"reward_sum", st.reward_sum}};
}

EngineState restore(const TabularMdp& mdp, const nlohmann::json& doc) {
  try {
    EngineConfig cfg;
    cfg.mode = mode_from_string(doc.at("mode").get<std::string>());
    cfg.schedule_a = schedule_from_json(doc.at("schedule_a"));
    cfg.schedule_b = schedule_from_json(doc.at("schedule_b"));
    cfg.theta0 = doc.at("theta0").get<double>();
    cfg.sampler = sampler_from_json(doc.at("sampler"));
    EngineState st(mdp, cfg);

    const auto v = doc.at("v").get<std::vector<double>>();
    const auto theta = doc.at("theta").get<std::vector<double>>();
    if (v.size() != mdp.n_states() || theta.size() != mdp.n_states() * mdp.n_actions()) {
      throw ConfigError("snapshot tables do not match the MDP");
    }
    st.v = Eigen::Map<const ValueTable>(v.data(), static_cast<Eigen::Index>(v.size()));
    st.theta = ThetaTable(Eigen::Map<const Matrix>(theta.data(),
                                                   static_cast<Eigen::Index>(mdp.n_states()),
                                                   static_cast<Eigen::Index>(mdp.n_actions())),
                          cfg.theta0);
    st.counters = UpdateCounters::from_json(doc.at("counters"));
    if (st.counters.n_states() != mdp.n_states() || st.counters.n_actions() != mdp.n_actions()) {
      throw ConfigError("snapshot counters do not match the MDP");
    }
    st.rng.restore(doc.at("rng").get<std::vector<std::string>>());
    st.trajectory_state = doc.at("trajectory_state").get<std::size_t>();
    st.reward_sum = doc.at("reward_sum").get<double>();
    return st;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed snapshot: ") + e.what());
  }
}

RunTrace run(const EngineConfig& config, const TabularMdp& mdp, const ValueTable& v_star) {
  if (static_cast<std::size_t>(v_star.size()) != mdp.n_states()) {
    throw ConfigError("V* length does not match the MDP");
  }
  EngineState st(mdp, config);
  RunTrace trace;
  const auto start = std::chrono::steady_clock::now();
  auto record = [&] {
    const ValueTable err = st.v - v_star;
    const double elapsed =
        config.record_time
            ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
            : 0.0;
    trace.rows.push_back({st.step(), err.norm(), err.cwiseAbs().maxCoeff(), st.average_reward(),
                          elapsed});
  };
  auto rollout = [&] {
    trace.rollouts.push_back(
        {st.step(), greedy_rollout_reward(mdp, st.theta, config.rollout_horizon,
                                          config.rollout_episodes, config.seed ^ st.step())});
  };

  record();
  if (config.rollout_period > 0) rollout();
  for (std::uint64_t n = 1; n <= config.total_steps; ++n) {
    one_step(st, mdp);
    if (n % config.metric_period == 0 || n == config.total_steps) record();
    if (config.rollout_period > 0 && (n % config.rollout_period == 0 || n == config.total_steps)) {
      rollout();
    }
  }
  trace.final_value = st.v;
  trace.final_snapshot = snapshot(st);
  return trace;
}

RunTrace run(const EngineConfig& config, const TabularMdp& mdp) {
  return run(config, mdp, value_iteration(mdp, 1e-10).value);
}

ThetaTable fast_actor_fixed_v(const TabularMdp& mdp, const ValueTable& v, std::uint64_t steps,
                              const StepSchedule& schedule_b, double theta0, std::uint64_t seed) {
  if (steps == 0) throw ConfigError("fast_actor_fixed_v: steps must be at least 1");
  if (static_cast<std::size_t>(v.size()) != mdp.n_states()) {
    throw ConfigError("fast_actor_fixed_v: value table length does not match the MDP");
  }
  const std::size_t n_pairs = mdp.n_states() * mdp.n_actions();
  const double gamma = mdp.discount();
  ThetaTable theta(mdp.n_states(), mdp.n_actions(), theta0);
  std::vector<std::uint64_t> visits(n_pairs, 0);
  RngStreams rng(seed);
  for (std::uint64_t n = 0; n < steps; ++n) {
    const std::size_t flat = scaled_index(rng.uniform(RngStreams::kZ), n_pairs);
    const std::size_t i = flat / mdp.n_actions();
    const std::size_t a = flat % mdp.n_actions();
    const auto succ = mdp.successors(i, a);
    const Successor& eta = succ[sample_successor(succ, rng.uniform(RngStreams::kActorNext))];
    const double delta = v[static_cast<Eigen::Index>(i)] - eta.cost -
                         gamma * v[static_cast<Eigen::Index>(eta.next)];
    theta.set(i, a, theta(i, a) + schedule_b(visits[flat]++) * delta);
    if (!std::isfinite(theta(i, a))) throw RunAborted("non-finite logit", nlohmann::json{});
  }
  return theta;
}

double greedy_rollout_reward(const TabularMdp& mdp, const ThetaTable& theta,
                             std::uint64_t horizon, std::uint64_t episodes, std::uint64_t seed) {
  RngStreams rng(seed);
  double total = 0.0;
  for (std::uint64_t e = 0; e < episodes; ++e) {
    std::size_t s = scaled_index(rng.uniform(RngStreams::kY), mdp.n_states());
    for (std::uint64_t t = 0; t < horizon; ++t) {
      const auto row = theta.row(s);
      const auto a = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      const auto succ = mdp.successors(s, a);
      const Successor& nx = succ[sample_successor(succ, rng.uniform(RngStreams::kCriticNext))];
      total -= nx.cost;
      s = nx.next;
    }
  }
  return total / double(horizon * episodes);
}

}  // namespace calab
