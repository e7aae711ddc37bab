#include "calab/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace calab {

double project(double x, double theta0) { return std::clamp(x, -theta0, theta0); }

ThetaTable::ThetaTable(std::size_t n_states, std::size_t n_actions, double theta0)
    : ThetaTable(Matrix::Zero(static_cast<Eigen::Index>(n_states),
                              static_cast<Eigen::Index>(n_actions)),
                 theta0) {}

ThetaTable::ThetaTable(Matrix theta, double theta0) : theta_(std::move(theta)), theta0_(theta0) {
  if (!(theta0 > 0.0) || !std::isfinite(theta0)) {
    throw ConfigError("theta0 must be positive and finite");
  }
  if (theta_.rows() == 0 || theta_.cols() == 0) throw ConfigError("theta table must be non-empty");
  theta_ = theta_.unaryExpr([theta0](double x) { return project(x, theta0); });
}

void softmax_row(std::span<const double> logits, std::span<double> out) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t a = 0; a < logits.size(); ++a) {
    out[a] = std::exp(logits[a] - top);
    total += out[a];
  }
  for (auto& p : out) p /= total;
}

StochasticPolicy gibbs(const ThetaTable& theta) {
  Matrix probs(theta.n_states(), theta.n_actions());
  for (std::size_t i = 0; i < theta.n_states(); ++i) {
    softmax_row(theta.row(i), {probs.data() + i * theta.n_actions(), theta.n_actions()});
  }
  return StochasticPolicy(std::move(probs));
}

QTable k_ia(const TabularMdp& mdp, const ValueTable& v) {
  QTable k = q_from_value(mdp, v);
  k.colwise() -= v;
  return k;
}

QTable g_ia(const TabularMdp& mdp, const ValueTable& v) { return -k_ia(mdp, v); }

Matrix projection_indicator(const ThetaTable& theta, const QTable& k) {
  Matrix gate = Matrix::Ones(k.rows(), k.cols());
  const double t0 = theta.theta0();
  for (std::size_t i = 0; i < theta.n_states(); ++i) {
    for (std::size_t a = 0; a < theta.n_actions(); ++a) {
      const double th = theta(i, a);
      const double kv = k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a));
      if ((th == t0 && kv <= 0.0) || (th == -t0 && kv >= 0.0)) {
        gate(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = 0.0;
      }
    }
  }
  return gate;
}

Matrix replicator_rhs(const TabularMdp& mdp, const ValueTable& v, const ThetaTable& theta) {
  const QTable k = k_ia(mdp, v);
  const Matrix pi = gibbs(theta).probs();
  const Matrix drift = k.cwiseProduct(projection_indicator(theta, k));
  const Eigen::VectorXd mean = pi.cwiseProduct(drift).rowwise().sum();
  Matrix centred = drift;
  centred.colwise() -= mean;
  return -pi.cwiseProduct(centred);
}

std::pair<ThetaTable, StochasticPolicy> attractor_policy(const TabularMdp& mdp,
                                                         const ValueTable& v, double theta0) {
  const QTable k = k_ia(mdp, v);
  const auto best = row_argmin(k);
  Matrix logits = Matrix::Constant(k.rows(), k.cols(), -theta0);
  for (std::size_t i = 0; i < best.size(); ++i) {
    logits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best[i])) = theta0;
  }
  ThetaTable theta(std::move(logits), theta0);
  auto pi = gibbs(theta);
  return {std::move(theta), std::move(pi)};
}

double corner_gap(std::size_t n_alternatives, double theta0) {
  // (n - 1) e^-t / (e^t + (n - 1) e^-t), written to avoid overflow.
  const double rest = double(n_alternatives - 1) * std::exp(-2.0 * theta0);
  return rest / (1.0 + rest);
}

double theta0_for_gap(std::size_t n_alternatives, double eps) {
  if (n_alternatives < 2) throw std::invalid_argument("theta0_for_gap: need at least 2 alternatives");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("theta0_for_gap: eps must be in (0, 1)");
  // gap < eps  <=>  e^{2t} > (n - 1)(1 - eps) / eps.
  const double boundary = 0.5 * std::log(double(n_alternatives - 1) * (1.0 - eps) / eps);
  double t = std::max(boundary, 0.0);
  // Step past the boundary until the strict inequality holds in floating point.
  t = std::nextafter(t, std::numeric_limits<double>::infinity());
  while (corner_gap(n_alternatives, t) >= eps) {
    t = t + std::max(1e-12, std::abs(t) * 1e-12);
  }
  return t;
}

}  // namespace calab
