#include <gtest/gtest.h>

#include <cmath>

#include "calab/engine.hpp"
#include "calab/exact_dp.hpp"
#include "calab/gibbs.hpp"
#include "calab/gridworld.hpp"
#include "support/random_mdp.hpp"

using namespace calab;
using calab::testing::random_model;

namespace {

EngineConfig base_config(Mode mode, std::uint64_t seed = 1) {
  EngineConfig c;
  c.mode = mode;
  c.seed = seed;
  c.record_time = false;
  return c;
}

bool same_tables(const EngineState& a, const EngineState& b) {
  return a.v == b.v && a.theta.values() == b.theta.values() && a.counters == b.counters;
}

}  // namespace

TEST(Engine, HandEvaluatedCriticStep) {
  const TabularMdp m(1, 1, 0.5, {{{0, 1.0, 1.0}}});
  EngineConfig c = base_config(Mode::CriticActor);
  c.schedule_a = StepSchedule::power(1.0, 1.0, 1);
  EngineState st(m, c);
  ca_step(st, m);
  EXPECT_DOUBLE_EQ(st.v[0], 1.0);
}

TEST(Engine, NegligibleStepsLeaveStateUnchanged) {
  const TabularMdp m = random_model(4, 2, 0.9, 1).mdp();
  EngineConfig c = base_config(Mode::CriticActor);
  c.schedule_a = StepSchedule::power(1.0, 1e-300, 1);
  c.schedule_b = StepSchedule::power(1.0, 1e-300, 1);
  EngineState st(m, c);
  st.v = ValueTable::LinSpaced(4, 1.0, 4.0);
  const ValueTable before = st.v;
  for (int k = 0; k < 100; ++k) ca_step(st, m);
  EXPECT_EQ(st.v, before);
  EXPECT_LE(st.theta.values().cwiseAbs().maxCoeff(), 1e-290);
}

TEST(Engine, ProjectionHoldsBoundaryExactly) {
  const TabularMdp m(1, 1, 0.5, {{{0, 1.0, 0.0}}});
  EngineConfig c = base_config(Mode::CriticActor);
  c.theta0 = 3.0;
  EngineState st(m, c);
  st.v[0] = 100.0;  // actor increment 100 - 0 - 50 > 0
  st.theta.set(0, 0, 3.0);
  ca_step(st, m);
  EXPECT_EQ(st.theta(0, 0), 3.0);
}

TEST(Engine, ZeroStepsIsIdentityAndSingleRow) {
  const TabularMdp m = random_model(4, 2, 0.9, 2).mdp();
  EngineConfig c = base_config(Mode::CriticActor);
  const RunTrace t = run(c, m);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].step, 0u);
  EXPECT_EQ(t.final_value.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Engine, ModeGuard) {
  const TabularMdp m = random_model(3, 2, 0.9, 3).mdp();
  EngineState st(m, base_config(Mode::ActorCritic));
  EXPECT_THROW(ca_step(st, m), ConfigError);
  EXPECT_NO_THROW(ac_step(st, m));
}

TEST(Engine, SwappedSchedulesGiveIdenticalArithmetic) {
  const TabularMdp m = random_model(6, 3, 0.9, 4).mdp();
  const StepSchedule x = StepSchedule::power(0.9, 1.0, 10), y = StepSchedule::power(0.6, 1.0, 10);
  EngineConfig ca = base_config(Mode::CriticActor, 77), ac = base_config(Mode::ActorCritic, 77);
  ca.schedule_a = x, ca.schedule_b = y;
  ac.schedule_a = y, ac.schedule_b = x;
  EngineState s1(m, ca), s2(m, ac);
  for (int k = 0; k < 5000; ++k) {
    ca_step(s1, m);
    ac_step(s2, m);
  }
  EXPECT_TRUE(same_tables(s1, s2));
}

TEST(Engine, ClippingAndLocalityEveryStep) {
  const TabularMdp m = random_model(5, 3, 0.9, 5).mdp();
  EngineConfig c = base_config(Mode::CriticActor, 3);
  c.theta0 = 0.5;
  c.schedule_b = StepSchedule::power(0.3, 5.0, 1);
  EngineState st(m, c);
  for (int k = 0; k < 3000; ++k) {
    const ValueTable v0 = st.v;
    const Matrix th0 = st.theta.values();
    const StepOutcome o = ca_step(st, m);
    ASSERT_LE(st.theta.values().cwiseAbs().maxCoeff(), 0.5);
    for (Eigen::Index i = 0; i < 5; ++i) {
      if (std::size_t(i) != o.state) ASSERT_EQ(st.v[i], v0[i]);
    }
    ASSERT_LE(((st.theta.values() - th0).array() != 0.0).count(), 1);
    ASSERT_EQ(st.counters.n(), std::uint64_t(k + 1));
  }
}

TEST(Engine, SnapshotResumeIsBitExact) {
  const TabularMdp m = random_model(6, 3, 0.9, 6).mdp();
  for (Mode mode : {Mode::CriticActor, Mode::ActorCritic}) {
    EngineState a(m, base_config(mode, 11));
    for (int k = 0; k < 1000; ++k) advance(a, m);
    EngineState b = restore(m, nlohmann::json::parse(snapshot(a).dump()));
    for (int k = 0; k < 1000; ++k) {
      advance(a, m);
      advance(b, m);
    }
    EXPECT_TRUE(same_tables(a, b));
    EXPECT_EQ(a.reward_sum, b.reward_sum);
  }
}

TEST(Engine, CriticIncrementIsUnbiased) {
  // With a(0) = 1 one step writes a single sample of (T_pi V)(Y) into V(Y).
  const auto d = random_model(3, 2, 0.8, 7);
  const TabularMdp m = d.mdp();
  Matrix logits(3, 2);
  logits << 0.5, -0.5, 1.0, 0.0, -2.0, 2.0;
  ValueTable v0(3);
  v0 << 1.0, 2.0, -1.0;
  const ValueTable want = bellman_policy_backup(m, gibbs(ThetaTable(logits, 5.0)), v0);
  EngineConfig c = base_config(Mode::CriticActor);
  c.schedule_a = StepSchedule::power(1.0, 1.0, 1);
  std::vector<double> sum(3, 0.0), sq(3, 0.0);
  std::vector<int> count(3, 0);
  for (std::uint64_t s = 0; s < 30000; ++s) {
    c.seed = s;
    EngineState st(m, c);
    st.v = v0;
    st.theta = ThetaTable(logits, 5.0);
    const StepOutcome o = ca_step(st, m);
    const double x = st.v[Eigen::Index(o.state)];
    sum[o.state] += x, sq[o.state] += x * x, ++count[o.state];
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const double mean = sum[i] / count[i];
    const double sd = std::sqrt(sq[i] / count[i] - mean * mean);
    EXPECT_NEAR(mean, want[Eigen::Index(i)], 4.0 * sd / std::sqrt(double(count[i])) + 1e-12);
  }
}

TEST(Engine, RunsAreDeterministic) {
  const TabularMdp m = random_model(5, 2, 0.9, 8).mdp();
  EngineConfig c = base_config(Mode::CriticActor, 5);
  c.total_steps = 20000;
  const RunTrace a = run(c, m), b = run(c, m);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    EXPECT_EQ(a.rows[k].value_error_l2, b.rows[k].value_error_l2);
    EXPECT_EQ(a.rows[k].avg_reward, b.rows[k].avg_reward);
  }
  EXPECT_EQ(a.final_value, b.final_value);
}

TEST(Engine, TraceRowsIncreaseAndIncludeFinalStep) {
  const TabularMdp m = random_model(5, 2, 0.9, 9).mdp();
  EngineConfig c = base_config(Mode::ActorCritic, 5);
  c.total_steps = 2500;
  c.metric_period = 1000;
  c.record_time = true;
  const RunTrace t = run(c, m);
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.rows.back().step, 2500u);
  for (std::size_t k = 1; k < t.rows.size(); ++k) {
    EXPECT_GT(t.rows[k].step, t.rows[k - 1].step);
    EXPECT_GE(t.rows[k].elapsed_seconds, t.rows[k - 1].elapsed_seconds);
  }
}

TEST(Engine, DeterministicGridErrorDecreases) {
  GridSpec g;
  g.dims = {5, 5};
  g.p_slip = 0.0;
  const TabularMdp m = build(g);
  EngineConfig c = base_config(Mode::CriticActor, 2);
  c.total_steps = 1'000'000;
  c.metric_period = 100'000;
  const RunTrace t = run(c, m);
  EXPECT_LT(t.rows.back().value_error_sup, 0.1 * t.rows.front().value_error_sup);
}

TEST(Engine, OtherSamplersRun) {
  const TabularMdp m = random_model(4, 2, 0.9, 10).mdp();
  EngineConfig c = base_config(Mode::CriticActor, 2);
  c.total_steps = 5000;
  c.sampler.mode = SamplerMode::OnPolicyTrajectory;
  EXPECT_NO_THROW(run(c, m));
  c.sampler.mode = SamplerMode::IidCustom;
  c.sampler.y_dist = {0.1, 0.2, 0.3, 0.4};
  c.sampler.z_dist = std::vector<double>(8, 0.125);
  c.sampler.z_same_state = true;
  EXPECT_NO_THROW(run(c, m));
  c.sampler.y_dist = {0.0, 0.2, 0.3, 0.5};
  EXPECT_THROW(run(c, m), ConfigError);
}

TEST(Engine, TimescaleWarning) {
  const StepSchedule s = StepSchedule::power(0.6, 1.0, 1);
  EXPECT_TRUE(timescale_warning(s, s).has_value());
  EXPECT_FALSE(timescale_warning(StepSchedule::power(0.95, 1, 100), StepSchedule::power(0.75, 1, 100)).has_value());
}

TEST(FastActor, FlatAdvantageStaysUniform) {
  // Identical deterministic actions: with V = V* every increment is zero.
  const TabularMdp m(2, 3, 0.9,
                     {{{1, 1.0, 1.0}}, {{1, 1.0, 1.0}}, {{1, 1.0, 1.0}},
                      {{0, 1.0, 2.0}}, {{0, 1.0, 2.0}}, {{0, 1.0, 2.0}}});
  const ValueTable v = value_iteration(m, 1e-14).value;
  const ThetaTable t = fast_actor_fixed_v(m, v, 20000, StepSchedule::power(0.55, 1, 100), 10.0, 3);
  const StochasticPolicy pi = gibbs(t);
  EXPECT_LE((pi.probs().array() - 1.0 / 3.0).abs().maxCoeff(), 1e-6);
}

namespace {

TabularMdp deterministic_model() {
  std::mt19937_64 rng(12);
  const std::size_t n = 10, u = 3;
  std::vector<std::vector<Successor>> rows;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < u; ++a) rows.push_back({{rng() % n, 1.0, double(rng() % 1000) / 100.0}});
  return TabularMdp(n, u, 0.9, rows);
}

}  // namespace

TEST(FastActor, NonMinimizersReachLowerCorner) {
  // At V = V* the minimizer has k = 0 and no drift; every other logit is
  // pushed to -theta0, so the minimizer still carries the largest mass.
  const TabularMdp m = deterministic_model();
  const ValueTable v = value_iteration(m, 1e-13).value;
  const QTable k = k_ia(m, v);
  const auto best = row_argmin(k);
  const ThetaTable t = fast_actor_fixed_v(m, v, 200000, StepSchedule::power(0.55, 1, 100), 10.0, 4);
  int hit = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    bool corner = true;
    for (std::size_t a = 0; a < 3; ++a) {
      if (a != best[i] && k(Eigen::Index(i), Eigen::Index(a)) > 1e-9) corner &= t(i, a) == -10.0;
    }
    hit += corner && t(i, best[i]) > -10.0;
  }
  EXPECT_GE(hit, 9);
}

TEST(FastActor, MinimizersReachUpperCornerWhenValueOverestimates) {
  // With V = V* + c the minimizer's k is -c (1 - gamma) < 0, so its logit
  // climbs to +theta0.
  const TabularMdp m = deterministic_model();
  const ValueTable v = value_iteration(m, 1e-13).value.array() + 1.0;
  const auto best = row_argmin(k_ia(m, v));
  const ThetaTable t = fast_actor_fixed_v(m, v, 200000, StepSchedule::power(0.55, 1, 100), 10.0, 4);
  int hit = 0;
  for (std::size_t i = 0; i < 10; ++i) hit += t(i, best[i]) == 10.0;
  EXPECT_GE(hit, 9);
}

TEST(Rollout, GreedyRewardOnGoalGrid) {
  GridSpec g;
  g.dims = {3, 3};
  g.p_slip = 0.0;
  const TabularMdp m = build(g);
  const ValueTable v = value_iteration(m, 1e-12).value;
  const auto [theta, pi] = attractor_policy(m, v, 10.0);
  const auto [bad, _] = attractor_policy(m, -v, 10.0);
  EXPECT_GT(greedy_rollout_reward(m, theta, 50, 20, 1), greedy_rollout_reward(m, bad, 50, 20, 1));
}
