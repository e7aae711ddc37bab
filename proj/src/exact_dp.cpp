#include "calab/exact_dp.hpp"

#include <cmath>

namespace calab {

namespace {

double sup_norm(const Eigen::VectorXd& x) { return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff(); }

SolveReport make_report(ValueTable value, std::vector<std::size_t> actions, std::size_t n_actions,
                        std::size_t iterations, double residual, bool converged) {
  auto policy = StochasticPolicy::deterministic(actions, n_actions);
  return SolveReport{std::move(value), std::move(policy), std::move(actions),
                     iterations,       residual,          converged};
}

}  // namespace

SolveReport value_iteration(const TabularMdp& mdp, double tol, std::size_t max_iter) {
  if (!(tol > 0.0)) throw ConfigError("value_iteration: tol must be positive");
  ValueTable v = ValueTable::Zero(static_cast<Eigen::Index>(mdp.n_states()));
  GreedyBackup backup{v, std::vector<std::size_t>(mdp.n_states(), 0)};
  double residual = 0.0;
  std::size_t iter = 0;
  while (iter < max_iter) {
    backup = bellman_optimal_backup(mdp, v);
    ++iter;
    residual = sup_norm(backup.value - v);
    v = backup.value;
    if (residual <= tol) {
      return make_report(std::move(v), std::move(backup.greedy), mdp.n_actions(), iter, residual,
                         true);
    }
  }
  return make_report(std::move(v), std::move(backup.greedy), mdp.n_actions(), iter, residual,
                     false);
}

ValueTable policy_evaluation(const TabularMdp& mdp, const StochasticPolicy& pi) {
  if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions()) {
    throw ConfigError("policy_evaluation: policy dimensions do not match the MDP");
  }
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  const double gamma = mdp.discount();

  Eigen::VectorXd gbar = expected_stage_cost(mdp).cwiseProduct(pi.probs()).rowwise().sum();

  if (mdp.n_states() <= kDenseSolveLimit) {
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    for (std::size_t i = 0; i < mdp.n_states(); ++i) {
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
        const double w = pi(i, a);
        if (w == 0.0) continue;
        for (const auto& s : mdp.successors(i, a)) {
          system(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s.next)) -=
              gamma * w * s.prob;
        }
      }
    }
    ValueTable v = system.partialPivLu().solve(gbar);
    if (!v.allFinite()) throw InternalError("policy_evaluation: linear solve failed");
    // One refinement pass against the factorization's rounding.
    const ValueTable r = gbar - system * v;
    v += system.partialPivLu().solve(r);
    return v;
  }

  // Fixed-point iteration of T_pi; a contraction with modulus gamma.
  ValueTable v = ValueTable::Zero(n);
  for (std::size_t iter = 0; iter < 1'000'000; ++iter) {
    ValueTable next = bellman_policy_backup(mdp, pi, v);
    const double change = sup_norm(next - v);
    v = std::move(next);
    if (change <= 1e-10 * (1.0 - gamma)) return v;
  }
  throw InternalError("policy_evaluation: iterative solve did not converge");
}

double policy_residual(const TabularMdp& mdp, const StochasticPolicy& pi, const ValueTable& v) {
  return sup_norm(bellman_policy_backup(mdp, pi, v) - v);
}

SolveReport policy_iteration(const TabularMdp& mdp, std::size_t max_iter) {
  std::vector<std::size_t> actions(mdp.n_states(), 0);
  ValueTable v;
  double residual = 0.0;
  for (std::size_t iter = 1; iter <= max_iter; ++iter) {
    const auto pi = StochasticPolicy::deterministic(actions, mdp.n_actions());
    v = policy_evaluation(mdp, pi);
    const QTable q = q_from_value(mdp, v);
    bool changed = false;
    residual = 0.0;
    for (std::size_t i = 0; i < mdp.n_states(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      std::size_t best = actions[i];
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
        if (q(row, static_cast<Eigen::Index>(a)) < q(row, static_cast<Eigen::Index>(best))) best = a;
      }
      // Switch only on an improvement larger than evaluation round-off.
      const double current = q(row, static_cast<Eigen::Index>(actions[i]));
      const double gain = current - q(row, static_cast<Eigen::Index>(best));
      const double noise = 1e-12 * (1.0 + std::abs(current));
      if (best != actions[i] && gain > noise) {
        actions[i] = best;
        changed = true;
      }
      residual = std::max(residual, std::abs(q.row(row).minCoeff() - v[row]));
    }
    if (!changed) {
      return make_report(std::move(v), std::move(actions), mdp.n_actions(), iter, residual, true);
    }
  }
  return make_report(std::move(v), std::move(actions), mdp.n_actions(), max_iter, residual, false);
}

double prop1_bound(const TabularMdp& mdp, const StochasticPolicy& pi_hat,
                   const StochasticPolicy& pi_star) {
  if (pi_hat.n_states() != mdp.n_states() || pi_star.n_states() != mdp.n_states() ||
      pi_hat.n_actions() != mdp.n_actions() || pi_star.n_actions() != mdp.n_actions()) {
    throw ConfigError("prop1_bound: policy dimensions do not match the MDP");
  }
  const double max_l1 = (pi_hat.probs() - pi_star.probs()).cwiseAbs().rowwise().sum().maxCoeff();
  const double max_gbar = expected_stage_cost(mdp).cwiseAbs().maxCoeff();
  const double slack = 1.0 - mdp.discount();
  return max_l1 * max_gbar / (slack * slack);
}

}  // namespace calab
