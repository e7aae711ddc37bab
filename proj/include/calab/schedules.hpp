#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "calab/sampler.hpp"

namespace calab {

/// Step-size families. With m = floor(n / block) and K1 = scale:
///   Power     K1 / (m + 1)^exponent
///   IdealA    K1 / (m + 1)
///   IdealB    K1 log(m + 2) / (m + 2)
///   InvNLog   K1 / ((m + 2) log(m + 2))
enum class ScheduleFamily { Power, IdealA, IdealB, InvNLog };

class StepSchedule {
 public:
  static StepSchedule power(double exponent, double scale = 1.0, std::uint64_t block = 1);
  static StepSchedule ideal_a(double scale = 1.0, std::uint64_t block = 1);
  static StepSchedule ideal_b(double scale = 1.0, std::uint64_t block = 1);
  static StepSchedule inv_n_log(double scale = 1.0, std::uint64_t block = 1);

  /// Accepts power, scaled (= power), ideal_a, ideal_b, log_over_n (= ideal_b)
  /// and inv_n_log. Throws ConfigError for unknown names or invalid params.
  static StepSchedule from_name(const std::string& family, double exponent, double scale,
                                std::uint64_t block);

  double operator()(std::uint64_t n) const;

  ScheduleFamily family() const { return family_; }
  double exponent() const { return exponent_; }
  double scale() const { return scale_; }
  std::uint64_t block() const { return block_; }
  std::string name() const;

  /// Analytic classification: sum_n s(n) = infinity.
  bool diverges() const;
  /// Analytic classification: sum_n s(n)^2 < infinity.
  bool square_summable() const;

  bool operator==(const StepSchedule&) const = default;

 private:
  StepSchedule(ScheduleFamily family, double exponent, double scale, std::uint64_t block);

  ScheduleFamily family_;
  double exponent_;
  double scale_;
  std::uint64_t block_;
};

double step_value(const StepSchedule& s, std::uint64_t n);

nlohmann::json to_json(const StepSchedule& s);
StepSchedule schedule_from_json(const nlohmann::json& doc);

/// Occupation counts nu1(i, n), nu2(i, a, n) and the global step n.
class UpdateCounters {
 public:
  UpdateCounters() = default;
  UpdateCounters(std::size_t n_states, std::size_t n_actions);

  /// Records one step that updated state y and pair (zi, za).
  /// Throws std::out_of_range on bad indices.
  void tick(std::size_t y, std::size_t zi, std::size_t za);

  std::uint64_t nu1(std::size_t state) const { return nu1_[state]; }
  std::uint64_t nu2(std::size_t state, std::size_t action) const {
    return nu2_[state * n_actions_ + action];
  }
  std::uint64_t n() const { return n_; }
  std::size_t n_states() const { return nu1_.size(); }
  std::size_t n_actions() const { return n_actions_; }

  const std::vector<std::uint64_t>& state_counts() const { return nu1_; }
  const std::vector<std::uint64_t>& pair_counts() const { return nu2_; }

  nlohmann::json to_json() const;
  static UpdateCounters from_json(const nlohmann::json& doc);

  bool operator==(const UpdateCounters&) const = default;

 private:
  std::size_t n_actions_ = 0;
  std::vector<std::uint64_t> nu1_;
  std::vector<std::uint64_t> nu2_;
  std::uint64_t n_ = 0;
};

enum class VerdictStatus { Pass, Fail, Informational };

struct ConditionVerdict {
  std::string condition;
  VerdictStatus status;
  std::string detail;
};

/// One Assumption 2(ii) window sample: the ratio of step-size mass accumulated
/// by two counters over [n, N(n, x)].
struct WindowSample {
  double x = 0.0;
  std::uint64_t n = 0;
  std::optional<std::uint64_t> window_end;  // unset when N(n, x) exceeds the prefix
  double state_ratio = 0.0;
  double pair_ratio = 0.0;
};

/// Prefix-scale evidence for the step-size and frequent-update assumptions.
struct AssumptionReport {
  std::uint64_t prefix = 0;
  std::optional<std::uint64_t> a_last_increase;
  std::optional<std::uint64_t> b_last_increase;
  std::vector<std::uint64_t> grid;         // log-spaced checkpoints
  std::vector<double> ratio_a_over_b;      // a(n) / b(n) on the grid
  std::vector<double> sup_ratio_x;         // x values for the sup a([xn]) / a(n) check
  std::vector<double> a_sup_ratio;
  std::vector<double> b_sup_ratio;
  std::vector<double> a_partial_sum_dev;   // max_y |A([yn]) / A(n) - 1| on the grid
  std::vector<double> b_partial_sum_dev;
  double a_square_sum = 0.0;
  double b_square_sum = 0.0;
  double kappa_states = 0.0;  // min_i nu1(i, prefix) / prefix
  double kappa_pairs = 0.0;   // min_(i,a) nu2(i, a, prefix) / prefix
  std::vector<WindowSample> windows;
  std::vector<ConditionVerdict> verdicts;

  /// True when no verdict failed (informational entries are ignored).
  bool all_pass() const;
  const ConditionVerdict& verdict(const std::string& condition) const;
  nlohmann::json to_json() const;
};

/// Runs the prefix diagnostics for slow schedule `a` and fast schedule `b`,
/// simulating occupation counts under `sampler` on an |S| x |U| grid. The
/// trajectory sampler mode has no MDP here and is simulated as uniform.
/// Throws ConfigError when prefix < 10^4.
AssumptionReport check_assumptions(const StepSchedule& a, const StepSchedule& b,
                                   std::uint64_t prefix, const SamplerSpec& sampler,
                                   std::size_t n_states, std::size_t n_actions,
                                   std::uint64_t seed = 1);

}  // namespace calab
