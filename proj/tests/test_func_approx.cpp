#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "calab/approx_runner.hpp"
#include "calab/exact_dp.hpp"
#include "calab/func_approx.hpp"
#include "support/random_mdp.hpp"

using namespace calab;

namespace {

// max |analytic - numeric| / max(1, |numeric|) for <upstream, f> over all params.
double mlp_fd_error(const MlpParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& up, double h) {
  const Eigen::VectorXd analytic = mlp_grad(p, x, up).flatten();
  Eigen::VectorXd flat = p.flatten();
  MlpParams probe = p;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < flat.size(); ++k) {
    const double keep = flat[k];
    flat[k] = keep + h;
    probe.unflatten(flat);
    const double fp = up.dot(mlp_forward(probe, x));
    flat[k] = keep - h;
    probe.unflatten(flat);
    const double fm = up.dot(mlp_forward(probe, x));
    flat[k] = keep;
    const double numeric = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[k] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

}  // namespace

TEST(LinearTd, ZeroStepOrZeroErrorIsIdentity) {
  const LinearFeatureMap map(4, 1);
  const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(4, 1.0, 4.0);
  EXPECT_EQ(td0_linear_step(w, {0, 0, 1.0, 1, false}, 0.0, map, 0.9), w);
  // r + 0.5 * w(1) - w(0) = 0 when r = 0 and w(0) = 0.5 * w(1).
  Eigen::VectorXd v(2);
  v << 1.0, 2.0;
  EXPECT_EQ(td0_linear_step(v, {0, 0, 0.0, 1, false}, 0.3, LinearFeatureMap(2, 1), 0.5), v);
}

TEST(LinearTd, AggregationSharesWeights) {
  const LinearFeatureMap map(10, 4);
  EXPECT_EQ(map.dim(), 3u);
  EXPECT_EQ(map.index(7), 1u);
  EXPECT_EQ(map.features(9).sum(), 1.0);
}

TEST(LinearTd, ExpectedSweepsReachPolicyValue) {
  const auto d = calab::testing::random_model(6, 2, 0.9, 3);
  const TabularMdp m = d.mdp();
  const StochasticPolicy pi = StochasticPolicy::uniform(6, 2);
  const ValueTable target = policy_evaluation(m, pi);
  const LinearFeatureMap map(6, 1);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(6);
  for (int sweep = 0; sweep < 400; ++sweep) {
    // Synchronous expected update: Jacobi form over all (i, a, j).
    Eigen::VectorXd next = w;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t a = 0; a < 2; ++a)
        for (const auto& s : m.successors(i, a)) {
          const Transition t{i, a, -s.cost, s.next, false};
          next += td0_linear_step(w, t, 1.0, map, 0.9, pi(i, a) * s.prob) - w;
        }
    w = next;
  }
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(-w[Eigen::Index(i)], target[Eigen::Index(i)], 1e-4);
}

TEST(PolicyGradient, ZeroDeltaIsIdentity) {
  const LinearPolicyFeatures f(LinearFeatureMap(3, 1), 2);
  const Eigen::VectorXd th = Eigen::VectorXd::Random(6);
  EXPECT_EQ(pg_actor_step(th, 1, 0, 0.0, 0.5, f), th);
}

TEST(PolicyGradient, PositiveDeltaRaisesChosenLogit) {
  const LinearPolicyFeatures f(LinearFeatureMap(1, 1), 2);
  const Eigen::VectorXd th = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd next = pg_actor_step(th, 0, 0, 1.0, 0.1, f);
  EXPECT_GT(next[Eigen::Index(f.index(0, 0))], 0.0);
  EXPECT_GT(f.policy(next, 0)[0], 0.5);
}

TEST(PolicyGradient, ScoreMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const LinearPolicyFeatures f(LinearFeatureMap(7, 2), 3);
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    Eigen::VectorXd th(static_cast<Eigen::Index>(f.dim()));
    for (Eigen::Index k = 0; k < th.size(); ++k) th[k] = std::normal_distribution<double>(0, 2)(rng);
    const std::size_t s = rng() % 7, a = rng() % 3;
    const Eigen::VectorXd score = softmax_score(th, s, a, f);
    for (Eigen::Index k = 0; k < th.size(); ++k) {
      Eigen::VectorXd hi = th, lo = th;
      hi[k] += 1e-6, lo[k] -= 1e-6;
      const double num = (std::log(f.policy(hi, s)[Eigen::Index(a)]) - std::log(f.policy(lo, s)[Eigen::Index(a)])) / 2e-6;
      worst = std::max(worst, std::abs(score[k] - num) / std::max(1.0, std::abs(num)));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(LinearQ, StepZeroAndTerminal) {
  const LinearFeatureMap map(2, 1);
  Matrix w = Matrix::Constant(2, 2, 3.0);
  EXPECT_EQ(qlearn_linear_step(w, {0, 1, 1.0, 1, false}, 0.0, map, 0.9), w);
  const Matrix next = qlearn_linear_step(w, {0, 1, 5.0, 1, true}, 1.0, map, 0.9);
  EXPECT_DOUBLE_EQ(next(1, 0), 5.0);
}

TEST(LinearQ, TwoStateChainReachesOptimum) {
  // 0 -a0-> 1 costs 1, 0 -a1-> 0 costs 2, 1 -a0-> 0 costs 0, 1 -a1-> 1 costs 3.
  const TabularMdp m(2, 2, 0.9, {{{1, 1.0, 1.0}}, {{0, 1.0, 2.0}}, {{0, 1.0, 0.0}}, {{1, 1.0, 3.0}}});
  const QTable qstar = q_from_value(m, value_iteration(m, 1e-13).value);
  const LinearFeatureMap map(2, 1);
  Matrix w = Matrix::Zero(2, 2);
  for (int sweep = 0; sweep < 600; ++sweep)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t a = 0; a < 2; ++a) {
        const auto s = m.successors(i, a)[0];
        w = qlearn_linear_step(w, {i, a, -s.cost, s.next, false}, 1.0, map, 0.9);
      }
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index a = 0; a < 2; ++a) EXPECT_NEAR(-w(a, i), qstar(i, a), 1e-3);
}

TEST(Mlp, ZeroWeightsGiveZeroOutput) {
  const MlpParams p = MlpParams::zeros({3, 10, 10, 2});
  EXPECT_EQ(mlp_forward(p, Eigen::VectorXd::Ones(3)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  double worst = 0.0;
  for (std::uint64_t draw = 0; draw < 100; ++draw) {
    const MlpParams p = MlpParams::init({2, 10, 10, 3}, 1000 + draw);
    Eigen::VectorXd x(2), up(3);
    for (auto* v : {&x, &up})
      for (Eigen::Index k = 0; k < v->size(); ++k) (*v)[k] = std::uniform_real_distribution<double>(-1, 1)(rng);
    worst = std::max(worst, mlp_fd_error(p, x, up, 1e-5));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Mlp, SingleLinearLayerGradientIsOuterProduct) {
  MlpParams p = MlpParams::init({3, 2}, 4);
  Eigen::VectorXd x(3), up(2);
  x << 1.0, -2.0, 0.5;
  up << 0.3, -0.7;
  const MlpParams g = mlp_grad(p, x, up);
  EXPECT_LE((g.layers[0].weight - up * x.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((g.layers[0].bias - up).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Mlp, FlattenRoundTrip) {
  MlpParams p = MlpParams::standard(2, 3, 1);
  MlpParams q = MlpParams::zeros({2, 10, 10, 3});
  q.unflatten(p.flatten());
  EXPECT_EQ(q.flatten(), p.flatten());
  EXPECT_EQ(p.param_count(), std::size_t(2 * 10 + 10 + 10 * 10 + 10 + 10 * 3 + 3));
}

TEST(NnActorCritic, ZeroStepsIsIdentity) {
  const TabularMdp m(2, 2, 0.9, {{{1, 1.0, 1.0}}, {{0, 1.0, 2.0}}, {{0, 1.0, 0.0}}, {{1, 1.0, 3.0}}});
  const StateEncoder enc = StateEncoder::index(2);
  NnActorCritic net{MlpParams::standard(1, 1, 1), MlpParams::standard(1, 2, 2)};
  const auto c0 = net.critic.flatten(), a0 = net.actor.flatten();
  const StepSchedule tiny = StepSchedule::power(1.0, 1e-300, 1);
  nn_ca_or_ac_step(net, {0, 1, -2.0, 0, false}, enc, 0.9, Mode::CriticActor, tiny, tiny, 0);
  EXPECT_LE((net.critic.flatten() - c0).cwiseAbs().maxCoeff(), 1e-290);
  EXPECT_LE((net.actor.flatten() - a0).cwiseAbs().maxCoeff(), 1e-290);
}

TEST(NnActorCritic, SwappedSchedulesMatchAcrossModes) {
  const StateEncoder enc = StateEncoder::index(3);
  NnActorCritic a{MlpParams::standard(1, 1, 1), MlpParams::standard(1, 2, 2)};
  NnActorCritic b = a;
  const StepSchedule x = StepSchedule::power(0.9, 0.01, 10), y = StepSchedule::power(0.6, 0.001, 10);
  for (std::uint64_t n = 0; n < 200; ++n) {
    const Transition t{n % 3, n % 2, -double(n % 5), (n + 1) % 3, false};
    nn_ca_or_ac_step(a, t, enc, 0.9, Mode::CriticActor, x, y, n);
    nn_ca_or_ac_step(b, t, enc, 0.9, Mode::ActorCritic, y, x, n);
  }
  EXPECT_EQ(a.critic.flatten(), b.critic.flatten());
  EXPECT_EQ(a.actor.flatten(), b.actor.flatten());
}

TEST(NnActorCritic, SmallMdpCriticInducesOptimalPolicy) {
  // Three states in a line; action 1 moves right, action 0 stays. Reaching
  // state 2 is cheap, staying elsewhere is expensive.
  const TabularMdp m(3, 2, 0.9,
                     {{{0, 1.0, 5.0}}, {{1, 1.0, 1.0}}, {{1, 1.0, 5.0}}, {{2, 1.0, 1.0}},
                      {{2, 1.0, 0.0}}, {{2, 1.0, 0.0}}});
  const auto opt = policy_iteration(m);
  EngineConfig c;
  c.mode = Mode::CriticActor;
  c.total_steps = 200'000;
  c.metric_period = 200'000;
  c.seed = 3;
  c.record_time = false;
  c.schedule_a = StepSchedule::power(0.6, 0.05, 100);
  c.schedule_b = StepSchedule::power(0.55, 0.1, 100);
  const RunTrace t = run_approx(ApproxAlgorithm::NnCa, c, ApproxSpec{}, m, opt.value);
  // Greedy policy induced by the critic through one-step lookahead.
  const QTable q = q_from_value(m, t.final_value);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(row_argmin(q)[i], opt.actions[i]) << "state " << i;
}

TEST(Dqn, TargetNetworkRefresh) {
  DqnLite agent = make_dqn_lite(MlpParams::standard(1, 2, 1), 3);
  ASSERT_TRUE(agent.target.has_value());
  const StateEncoder enc = StateEncoder::index(2);
  for (int k = 0; k < 3; ++k) dqn_lite_step(agent, {0, 0, 1.0, 1, false}, enc, 0.9, 0.1);
  EXPECT_EQ(agent.target->flatten(), agent.q.flatten());
  dqn_lite_step(agent, {0, 0, 1.0, 1, false}, enc, 0.9, 0.1);
  EXPECT_NE(agent.target->flatten(), agent.q.flatten());
}

TEST(ApproxRunner, AllAlgorithmsRunDeterministically) {
  const auto d = calab::testing::random_model(12, 3, 0.9, 21);
  const TabularMdp m = d.mdp();
  const ValueTable v = value_iteration(m, 1e-12).value;
  EngineConfig c;
  c.total_steps = 3000;
  c.metric_period = 1000;
  c.record_time = false;
  c.schedule_a = StepSchedule::power(0.95, 0.05, 100);
  c.schedule_b = StepSchedule::power(0.75, 0.05, 100);
  ApproxSpec spec;
  spec.block = 4;
  for (auto alg : {ApproxAlgorithm::QLinear, ApproxAlgorithm::LinearCa, ApproxAlgorithm::LinearAc,
                   ApproxAlgorithm::NnCa, ApproxAlgorithm::NnAc, ApproxAlgorithm::DqnLite}) {
    const RunTrace a = run_approx(alg, c, spec, m, v), b = run_approx(alg, c, spec, m, v);
    ASSERT_EQ(a.rows.size(), 4u);
    EXPECT_EQ(a.final_value, b.final_value);
    EXPECT_EQ(a.final_snapshot.dump(), b.final_snapshot.dump());
  }
}
