#include <gtest/gtest.h>

#include <cmath>

#include "calab/exact_dp.hpp"
#include "calab/gibbs.hpp"
#include "support/random_mdp.hpp"

using namespace calab;
using calab::testing::random_model;

namespace {

// Scalar bisection on the corner gap written out from scratch.
double bisect_theta0(std::size_t n, double eps) {
  auto gap = [n](double t) {
    const double off = double(n - 1) * std::exp(-t);
    return off / (std::exp(t) + off);
  };
  double lo = 0.0, hi = 1.0;
  while (gap(hi) >= eps) hi *= 2.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) < eps ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

TEST(Gibbs, ZeroRowIsUniform) {
  const StochasticPolicy pi = gibbs(ThetaTable(2, 4, 1.0));
  for (std::size_t a = 0; a < 4; ++a) EXPECT_DOUBLE_EQ(pi(1, a), 0.25);
}

TEST(Gibbs, MatchesDirectSoftmax) {
  Matrix t(1, 2);
  t << 5.0, -5.0;
  const StochasticPolicy pi = gibbs(ThetaTable(t, 10.0));
  const double e = std::exp(5.0), f = std::exp(-5.0);
  EXPECT_NEAR(pi(0, 0), e / (e + f), 1e-15);
  EXPECT_NEAR(pi(0, 1), f / (e + f), 1e-15);
  EXPECT_NEAR(pi(0, 1), 4.54e-5, 1e-7);
}

TEST(Gibbs, ShiftInvariance) {
  Matrix t(1, 3), s(1, 3);
  t << 0.3, -1.2, 2.0;
  s = t.array() + 1.7;
  const StochasticPolicy a = gibbs(ThetaTable(t, 10.0)), b = gibbs(ThetaTable(s, 10.0));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(a(0, k), b(0, k), 1e-12);
}

TEST(Gibbs, RowsStochasticAndPositive) {
  Matrix t = Matrix::Random(6, 4) * 10.0;
  const StochasticPolicy pi = gibbs(ThetaTable(t, 10.0));
  for (Eigen::Index i = 0; i < 6; ++i) {
    EXPECT_NEAR(pi.probs().row(i).sum(), 1.0, 1e-12);
    EXPECT_GT(pi.probs().row(i).minCoeff(), 0.0);
  }
}

TEST(Projection, Clamps) {
  EXPECT_EQ(project(7.0, 5.0), 5.0);
  EXPECT_EQ(project(-9.0, 5.0), -5.0);
  EXPECT_EQ(project(3.0, 5.0), 3.0);
  ThetaTable t(1, 1, 5.0);
  t.set(0, 0, 1e9);
  EXPECT_EQ(t(0, 0), 5.0);
  EXPECT_THROW(ThetaTable(1, 1, 0.0), ConfigError);
}

TEST(Advantage, ZeroValueGivesExpectedCost) {
  const TabularMdp m = random_model(5, 3, 0.9, 1).mdp();
  const ValueTable zero = ValueTable::Zero(5);
  EXPECT_LE((k_ia(m, zero) - expected_stage_cost(m)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((g_ia(m, zero) + k_ia(m, zero)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Advantage, VanishesAtOptimum) {
  const TabularMdp m = random_model(8, 4, 0.9, 2).mdp();
  const QTable k = k_ia(m, value_iteration(m, 1e-13).value);
  for (Eigen::Index i = 0; i < 8; ++i) EXPECT_NEAR(k.row(i).minCoeff(), 0.0, 1e-9);
}

TEST(Advantage, HandArithmetic) {
  const TabularMdp m(1, 1, 0.5, {{{0, 1.0, 2.0}}});
  EXPECT_DOUBLE_EQ(k_ia(m, ValueTable::Constant(1, 4.0))(0, 0), 0.0);
}

TEST(Replicator, VanishesAtAttractorCorners) {
  const TabularMdp m = random_model(6, 3, 0.9, 3).mdp();
  const ValueTable v = value_iteration(m, 1e-12).value;
  const auto [theta, pi] = attractor_policy(m, v, 30.0);
  EXPECT_LE(replicator_rhs(m, v, theta).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Replicator, FlatRowHasNoDrift) {
  const TabularMdp m(1, 3, 0.9, {{{0, 1.0, 1.0}}, {{0, 1.0, 1.0}}, {{0, 1.0, 1.0}}});
  Matrix t(1, 3);
  t << 0.5, -0.2, 1.0;
  EXPECT_LE(replicator_rhs(m, ValueTable::Zero(1), ThetaTable(t, 5.0)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Replicator, SignFavoursLowerAdvantage) {
  // k = (1, 0) at V = 0; interior theta.
  const TabularMdp m(1, 2, 0.9, {{{0, 1.0, 1.0}}, {{0, 1.0, 0.0}}});
  const Matrix rhs = replicator_rhs(m, ValueTable::Zero(1), ThetaTable(1, 2, 5.0));
  EXPECT_LT(rhs(0, 0), 0.0);
  EXPECT_GT(rhs(0, 1), 0.0);
  // Direct formula: -pi_a (k_a - sum_b pi_b k_b) with pi = (1/2, 1/2).
  EXPECT_NEAR(rhs(0, 0), -0.25, 1e-15);
}

TEST(Replicator, ProjectionBlocksOutwardDrift) {
  // At theta = -theta0 on action 0 with k pushing it further down, gamma = 0.
  const TabularMdp m(1, 2, 0.9, {{{0, 1.0, 1.0}}, {{0, 1.0, 0.0}}});
  Matrix t(1, 2);
  t << -5.0, 5.0;
  const ThetaTable theta(t, 5.0);
  const Matrix ind = projection_indicator(theta, k_ia(m, ValueTable::Zero(1)));
  EXPECT_EQ(ind(0, 0), 0.0);
  EXPECT_EQ(ind(0, 1), 0.0);
}

TEST(Attractor, SaturatesForLargeTheta0) {
  const TabularMdp m(1, 2, 0.9, {{{0, 1.0, 1.0}}, {{0, 1.0, 0.0}}});
  const auto [theta, pi] = attractor_policy(m, ValueTable::Zero(1), 50.0);
  EXPECT_LT(pi(0, 0), 1e-40);
  EXPECT_EQ(theta(0, 1), 50.0);
  EXPECT_EQ(theta(0, 0), -50.0);
}

TEST(Attractor, MassOnUniqueMinimizer) {
  const TabularMdp m(1, 4, 0.9, {{{0, 1.0, 3.0}}, {{0, 1.0, 1.0}}, {{0, 1.0, 2.0}}, {{0, 1.0, 4.0}}});
  const double t0 = 2.0;
  const auto [theta, pi] = attractor_policy(m, ValueTable::Zero(1), t0);
  EXPECT_NEAR(pi(0, 1), std::exp(t0) / (std::exp(t0) + 3.0 * std::exp(-t0)), 1e-15);
}

TEST(Attractor, LargeTheta0IsNearOptimal) {
  const auto d = random_model(10, 3, 0.9, 4);
  const TabularMdp m = d.mdp();
  const ValueTable v = value_iteration(m, 1e-13).value;
  const auto [theta, pi] = attractor_policy(m, v, 50.0);
  EXPECT_LE(calab::testing::sup_diff(v, calab::testing::reference_policy_values(d, pi.probs())), 1e-6);
}

TEST(Theta0ForGap, HalfGapWithTwoAlternatives) {
  EXPECT_LE(theta0_for_gap(2, 0.5), 0.6);
  EXPECT_LT(corner_gap(2, theta0_for_gap(2, 0.5)), 0.5);
}

TEST(Theta0ForGap, MatchesClosedFormAndBisection) {
  for (double eps : {1e-2, 1e-4, 1e-8}) {
    const double got = theta0_for_gap(2, eps);
    EXPECT_NEAR(got, 0.5 * std::log((1.0 - eps) / eps), 1e-6);
    EXPECT_NEAR(got, bisect_theta0(2, eps), 1e-6);
  }
  EXPECT_NEAR(theta0_for_gap(5, 1e-3), bisect_theta0(5, 1e-3), 1e-6);
}

TEST(Theta0ForGap, PostCondition) {
  EXPECT_LT(corner_gap(6, theta0_for_gap(6, 1e-3)), 1e-3);
  EXPECT_THROW(theta0_for_gap(1, 0.1), std::invalid_argument);
  EXPECT_THROW(theta0_for_gap(3, 1.0), std::invalid_argument);
}
