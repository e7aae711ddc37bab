#pragma once

#include <cstddef>
#include <vector>

#include "calab/mdp.hpp"

namespace calab {

/// Output of the exact solvers.
struct SolveReport {
  ValueTable value;
  StochasticPolicy policy;           // one-hot rows
  std::vector<std::size_t> actions;  // the one-hot positions
  std::size_t iterations = 0;
  double residual = 0.0;  // sup-norm of the last backup change
  bool converged = false;
};

/// Value iteration stopped once ||T V - V||_inf <= tol. The returned value is
/// the last backup T V, so it lies within tol * gamma / (1 - gamma) of V*.
/// When max_iter runs out, the best iterate comes back with converged = false.
SolveReport value_iteration(const TabularMdp& mdp, double tol, std::size_t max_iter = 1'000'000);

/// Howard policy iteration from the all-zeros policy. A state switches action
/// only on a strict improvement, so ties cannot cycle.
SolveReport policy_iteration(const TabularMdp& mdp, std::size_t max_iter = 10'000);

/// Largest state count solved by dense LU; above it evaluation iterates T_pi.
inline constexpr std::size_t kDenseSolveLimit = 2000;

/// V_pi from (I - gamma P_pi) V = gbar_pi.
ValueTable policy_evaluation(const TabularMdp& mdp, const StochasticPolicy& pi);

/// ||T_pi V - V||_inf.
double policy_residual(const TabularMdp& mdp, const StochasticPolicy& pi, const ValueTable& v);

/// max_i ||pi_hat(i,.) - pi_star(i,.)||_1 * max_i ||gbar(i,.)||_inf / (1 - gamma)^2.
double prop1_bound(const TabularMdp& mdp, const StochasticPolicy& pi_hat,
                   const StochasticPolicy& pi_star);

}  // namespace calab
