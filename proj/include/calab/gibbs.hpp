#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include "calab/mdp.hpp"

namespace calab {

/// Clamp of x onto [-theta0, theta0].
double project(double x, double theta0);

/// Actor logits theta(i, a), each kept inside [-theta0, theta0].
class ThetaTable {
 public:
  ThetaTable(std::size_t n_states, std::size_t n_actions, double theta0);
  /// Entries are projected onto the box on the way in.
  ThetaTable(Matrix theta, double theta0);

  double theta0() const { return theta0_; }
  std::size_t n_states() const { return static_cast<std::size_t>(theta_.rows()); }
  std::size_t n_actions() const { return static_cast<std::size_t>(theta_.cols()); }

  double operator()(std::size_t state, std::size_t action) const {
    return theta_(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(action));
  }
  /// Stores project(value, theta0).
  void set(std::size_t state, std::size_t action, double value) {
    theta_(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(action)) =
        project(value, theta0_);
  }
  std::span<const double> row(std::size_t state) const {
    return {theta_.data() + state * n_actions(), n_actions()};
  }
  const Matrix& values() const { return theta_; }

 private:
  Matrix theta_;
  double theta0_;
};

/// Numerically stable softmax of one logit row into `out`.
void softmax_row(std::span<const double> logits, std::span<double> out);

/// pi_theta(i, a) = exp(theta(i, a)) / sum_b exp(theta(i, b)).
StochasticPolicy gibbs(const ThetaTable& theta);

/// k_ia(V) = Q(i, a | V) - V(i).
QTable k_ia(const TabularMdp& mdp, const ValueTable& v);
/// g_ia(V) = -k_ia(V): the mean drift of the actor recursion at fixed V.
QTable g_ia(const TabularMdp& mdp, const ValueTable& v);

/// gamma_ia(theta): 0 where the projection blocks the drift, 1 elsewhere.
Matrix projection_indicator(const ThetaTable& theta, const QTable& k);

/// Replicator right-hand side
///   -pi(i, a) (k_ia gamma_ia - sum_b pi(i, b) k_ib gamma_ib).
Matrix replicator_rhs(const TabularMdp& mdp, const ValueTable& v, const ThetaTable& theta);

/// The replicator attractor: +theta0 on the lowest-index minimizer of k_i.(V),
/// -theta0 elsewhere, together with its Gibbs policy.
std::pair<ThetaTable, StochasticPolicy> attractor_policy(const TabularMdp& mdp,
                                                         const ValueTable& v, double theta0);

/// 1 - e^t / (e^t + (n - 1) e^-t): the mass a corner logit of size t leaves off
/// the favoured alternative among n.
double corner_gap(std::size_t n_alternatives, double theta0);

/// Smallest theta0 (up to rounding) with corner_gap(n, theta0) < eps.
/// Throws std::invalid_argument unless eps is in (0, 1) and n >= 2.
double theta0_for_gap(std::size_t n_alternatives, double eps);

}  // namespace calab
