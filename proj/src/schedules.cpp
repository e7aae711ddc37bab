#include "calab/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "calab/mdp.hpp"

namespace calab {

StepSchedule::StepSchedule(ScheduleFamily family, double exponent, double scale,
                           std::uint64_t block)
    : family_(family), exponent_(exponent), scale_(scale), block_(block) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("step-size scale K1 must be positive");
  if (block == 0) throw ConfigError("step-size block length K2 must be at least 1");
  if (family == ScheduleFamily::Power && (!(exponent > 0.0) || !std::isfinite(exponent))) {
    throw ConfigError("power step-size exponent must be positive");
  }
}

StepSchedule StepSchedule::power(double exponent, double scale, std::uint64_t block) {
  return {ScheduleFamily::Power, exponent, scale, block};
}
StepSchedule StepSchedule::ideal_a(double scale, std::uint64_t block) {
  return {ScheduleFamily::IdealA, 1.0, scale, block};
}
StepSchedule StepSchedule::ideal_b(double scale, std::uint64_t block) {
  return {ScheduleFamily::IdealB, 1.0, scale, block};
}
StepSchedule StepSchedule::inv_n_log(double scale, std::uint64_t block) {
  return {ScheduleFamily::InvNLog, 1.0, scale, block};
}

StepSchedule StepSchedule::from_name(const std::string& family, double exponent, double scale,
                                     std::uint64_t block) {
  if (family == "power" || family == "scaled") return power(exponent, scale, block);
  if (family == "ideal_a") return ideal_a(scale, block);
  if (family == "ideal_b" || family == "log_over_n") return ideal_b(scale, block);
  if (family == "inv_n_log") return inv_n_log(scale, block);
  throw ConfigError("unknown step-size family '" + family + "'");
}

double StepSchedule::operator()(std::uint64_t n) const {
  const double m = double(n / block_);
  switch (family_) {
    case ScheduleFamily::Power: return scale_ / std::pow(m + 1.0, exponent_);
    case ScheduleFamily::IdealA: return scale_ / (m + 1.0);
    case ScheduleFamily::IdealB: return scale_ * std::log(m + 2.0) / (m + 2.0);
    case ScheduleFamily::InvNLog: return scale_ / ((m + 2.0) * std::log(m + 2.0));
  }
  throw InternalError("unhandled schedule family");
}

std::string StepSchedule::name() const {
  switch (family_) {
    case ScheduleFamily::Power: return "power";
    case ScheduleFamily::IdealA: return "ideal_a";
    case ScheduleFamily::IdealB: return "ideal_b";
    case ScheduleFamily::InvNLog: return "inv_n_log";
  }
  return "unknown";
}

bool StepSchedule::diverges() const {
  return family_ != ScheduleFamily::Power || exponent_ <= 1.0;
}

bool StepSchedule::square_summable() const {
  return family_ != ScheduleFamily::Power || exponent_ > 0.5;
}

double step_value(const StepSchedule& s, std::uint64_t n) { return s(n); }

nlohmann::json to_json(const StepSchedule& s) {
  return {{"family", s.name()}, {"exponent", s.exponent()}, {"k1", s.scale()}, {"k2", s.block()}};
}

StepSchedule schedule_from_json(const nlohmann::json& doc) {
  try {
    return StepSchedule::from_name(doc.at("family").get<std::string>(), doc.value("exponent", 1.0),
                                   doc.value("k1", 1.0), doc.value("k2", std::uint64_t{1}));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed schedule: ") + e.what());
  }
}

UpdateCounters::UpdateCounters(std::size_t n_states, std::size_t n_actions)
    : n_actions_(n_actions), nu1_(n_states, 0), nu2_(n_states * n_actions, 0) {}

void UpdateCounters::tick(std::size_t y, std::size_t zi, std::size_t za) {
  if (y >= nu1_.size() || zi >= nu1_.size() || za >= n_actions_) {
    throw std::out_of_range("UpdateCounters::tick: index out of range");
  }
  ++nu1_[y];
  ++nu2_[zi * n_actions_ + za];
  ++n_;
}

nlohmann::json UpdateCounters::to_json() const {
  return {{"n_actions", n_actions_}, {"nu1", nu1_}, {"nu2", nu2_}, {"n", n_}};
}

UpdateCounters UpdateCounters::from_json(const nlohmann::json& doc) {
  UpdateCounters c;
  c.n_actions_ = doc.at("n_actions").get<std::size_t>();
  c.nu1_ = doc.at("nu1").get<std::vector<std::uint64_t>>();
  c.nu2_ = doc.at("nu2").get<std::vector<std::uint64_t>>();
  c.n_ = doc.at("n").get<std::uint64_t>();
  if (c.nu2_.size() != c.nu1_.size() * c.n_actions_) throw ConfigError("inconsistent counters");
  return c;
}

bool AssumptionReport::all_pass() const {
  return std::none_of(verdicts.begin(), verdicts.end(),
                      [](const ConditionVerdict& v) { return v.status == VerdictStatus::Fail; });
}

const ConditionVerdict& AssumptionReport::verdict(const std::string& condition) const {
  for (const auto& v : verdicts) {
    if (v.condition == condition) return v;
  }
  throw std::out_of_range("no verdict for " + condition);
}

namespace {

const char* status_name(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::Pass: return "pass";
    case VerdictStatus::Fail: return "fail";
    case VerdictStatus::Informational: return "informational";
  }
  return "?";
}

std::vector<double> tabulate(const StepSchedule& s, std::uint64_t prefix) {
  std::vector<double> out(prefix + 1);
  for (std::uint64_t n = 0; n <= prefix; ++n) out[n] = s(n);
  return out;
}

std::optional<std::uint64_t> last_increase(const std::vector<double>& v) {
  std::optional<std::uint64_t> last;
  for (std::uint64_t n = 0; n + 1 < v.size(); ++n) {
    if (v[n + 1] > v[n]) last = n;
  }
  return last;
}

// cumulative[n] = sum_{t < n} v[t]
std::vector<double> cumulative(const std::vector<double>& v) {
  std::vector<double> out(v.size() + 1, 0.0);
  for (std::size_t n = 0; n < v.size(); ++n) out[n + 1] = out[n] + v[n];
  return out;
}

std::vector<std::uint64_t> log_grid(std::uint64_t lo, std::uint64_t hi, std::size_t points) {
  std::vector<std::uint64_t> grid;
  const double llo = std::log(double(lo));
  const double lhi = std::log(double(hi));
  for (std::size_t k = 0; k < points; ++k) {
    const double t = llo + (lhi - llo) * double(k) / double(points - 1);
    const auto n = static_cast<std::uint64_t>(std::llround(std::exp(t)));
    if (grid.empty() || n > grid.back()) grid.push_back(std::min(n, hi));
  }
  return grid;
}

double sup_scaled_ratio(const std::vector<double>& s, double x, std::uint64_t lo, std::uint64_t hi) {
  double best = 0.0;
  for (std::uint64_t n = std::max<std::uint64_t>(lo, 1); n <= hi; ++n) {
    const auto xn = static_cast<std::uint64_t>(std::floor(x * double(n)));
    best = std::max(best, s[xn] / s[n]);
  }
  return best;
}

// max over y in [x, 1] of |A([yn]) / A(n) - 1|, with A(n) = sum_{i <= n} s(i).
double partial_sum_deviation(const std::vector<double>& cum, std::uint64_t n, double x) {
  double worst = 0.0;
  const double total = cum[n + 1];
  for (double y = x; y <= 1.0 + 1e-12; y += 0.025) {
    const auto yn = static_cast<std::uint64_t>(std::floor(std::min(y, 1.0) * double(n)));
    worst = std::max(worst, std::abs(cum[yn + 1] / total - 1.0));
  }
  return worst;
}

bool non_increasing_to_zero(const std::vector<double>& v, double shrink) {
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[k - 1] * (1.0 + 1e-9) + 1e-15) return false;
  }
  return v.size() >= 2 && v.back() <= shrink * v.front();
}

std::string describe(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(4);
  os << "first=" << v.front() << " last=" << v.back();
  return os.str();
}

// Window ratio of Assumption 2(ii) between two counter paths.
struct WindowResult {
  std::optional<std::uint64_t> end;
  double ratio = 0.0;
};

WindowResult window_ratio(const std::vector<std::uint32_t>& lead,
                          const std::vector<std::uint32_t>& other, const std::vector<double>& s,
                          const std::vector<double>& cum, std::uint64_t n, double x) {
  double acc = 0.0;
  std::uint64_t m = n;
  while (acc < x) {
    ++m;
    if (m >= lead.size()) return {};
    acc += s[lead[m]];
  }
  auto mass = [&](const std::vector<std::uint32_t>& path) {
    return cum[path[m] + 1] - cum[path[n]];
  };
  return {m, mass(lead) / mass(other)};
}

}  // namespace

nlohmann::json AssumptionReport::to_json() const {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& c : verdicts) {
    v.push_back({{"condition", c.condition}, {"status", status_name(c.status)}, {"detail", c.detail}});
  }
  nlohmann::json w = nlohmann::json::array();
  for (const auto& s : windows) {
    nlohmann::json row = {{"x", s.x}, {"n", s.n}};
    if (s.window_end) {
      row["window_end"] = *s.window_end;
      row["state_ratio"] = s.state_ratio;
      row["pair_ratio"] = s.pair_ratio;
    } else {
      row["window_end"] = nullptr;
    }
    w.push_back(row);
  }
  auto opt = [](const std::optional<std::uint64_t>& o) {
    return o ? nlohmann::json(*o) : nlohmann::json(nullptr);
  };
  return {{"prefix", prefix},
          {"a_last_increase", opt(a_last_increase)},
          {"b_last_increase", opt(b_last_increase)},
          {"grid", grid},
          {"ratio_a_over_b", ratio_a_over_b},
          {"sup_ratio_x", sup_ratio_x},
          {"a_sup_ratio", a_sup_ratio},
          {"b_sup_ratio", b_sup_ratio},
          {"a_partial_sum_dev", a_partial_sum_dev},
          {"b_partial_sum_dev", b_partial_sum_dev},
          {"a_square_sum", a_square_sum},
          {"b_square_sum", b_square_sum},
          {"kappa_states", kappa_states},
          {"kappa_pairs", kappa_pairs},
          {"windows", w},
          {"verdicts", v},
          {"all_pass", all_pass()}};
}

AssumptionReport check_assumptions(const StepSchedule& a, const StepSchedule& b,
                                   std::uint64_t prefix, const SamplerSpec& sampler,
                                   std::size_t n_states, std::size_t n_actions,
                                   std::uint64_t seed) {
  if (prefix < 10'000) throw ConfigError("check_assumptions: prefix must be at least 10^4");
  if (n_states == 0 || n_actions == 0) throw ConfigError("check_assumptions: empty state space");
  sampler.validate(n_states, n_actions);

  AssumptionReport rep;
  rep.prefix = prefix;
  const auto sa = tabulate(a, prefix);
  const auto sb = tabulate(b, prefix);
  const auto ca = cumulative(sa);
  const auto cb = cumulative(sb);
  auto pass_if = [](bool ok) { return ok ? VerdictStatus::Pass : VerdictStatus::Fail; };

  // Eventually non-increasing: no increase in the last 90% of the prefix.
  rep.a_last_increase = last_increase(sa);
  rep.b_last_increase = last_increase(sb);
  {
    auto late = [prefix](const std::optional<std::uint64_t>& li) {
      return li && *li >= prefix / 10;
    };
    const bool ok = !late(rep.a_last_increase) && !late(rep.b_last_increase);
    std::ostringstream os;
    os << "last increase a=" << (rep.a_last_increase ? std::to_string(*rep.a_last_increase) : "none")
       << " b=" << (rep.b_last_increase ? std::to_string(*rep.b_last_increase) : "none");
    rep.verdicts.push_back({"eventually_non_increasing", pass_if(ok), os.str()});
  }

  // 1(i): divergence cannot be falsified from a finite prefix.
  rep.verdicts.push_back(
      {"1(i)", pass_if(a.diverges() && b.diverges()),
       std::string("not falsifiable at finite prefix; analytic: a ") +
           (a.diverges() ? "divergent" : "summable") + ", b " +
           (b.diverges() ? "divergent" : "summable")});

  // 1(ii): analytic, with the prefix sums of squares for reference.
  for (std::uint64_t n = 0; n <= prefix; ++n) {
    rep.a_square_sum += sa[n] * sa[n];
    rep.b_square_sum += sb[n] * sb[n];
  }
  rep.verdicts.push_back({"1(ii)", pass_if(a.square_summable() && b.square_summable()),
                          "analytic; prefix sums of squares a=" + std::to_string(rep.a_square_sum) +
                              " b=" + std::to_string(rep.b_square_sum)});

  // 1(iii): a(n)/b(n) decreasing toward zero along the checkpoints.
  rep.grid = log_grid(std::max<std::uint64_t>(prefix / 1000, 10), prefix, 31);
  for (auto n : rep.grid) rep.ratio_a_over_b.push_back(sa[n] / sb[n]);
  rep.verdicts.push_back({"1(iii)", pass_if(non_increasing_to_zero(rep.ratio_a_over_b, 0.9)),
                          "a/b " + describe(rep.ratio_a_over_b)});

  // 1(iv): sup_n s([xn]) / s(n) stays bounded; the late half must not exceed
  // the early half.
  rep.sup_ratio_x = {0.25, 0.5, 0.75};
  bool bounded = true;
  for (double x : rep.sup_ratio_x) {
    const double a_head = sup_scaled_ratio(sa, x, 1, prefix / 2);
    const double a_tail = sup_scaled_ratio(sa, x, prefix / 2 + 1, prefix);
    const double b_head = sup_scaled_ratio(sb, x, 1, prefix / 2);
    const double b_tail = sup_scaled_ratio(sb, x, prefix / 2 + 1, prefix);
    rep.a_sup_ratio.push_back(std::max(a_head, a_tail));
    rep.b_sup_ratio.push_back(std::max(b_head, b_tail));
    bounded = bounded && std::isfinite(a_head + b_head) && a_tail <= a_head * 1.01 &&
              b_tail <= b_head * 1.01;
  }
  rep.verdicts.push_back({"1(iv)", pass_if(bounded), "sup ratios at x = 0.25, 0.5, 0.75"});

  // 1(v): A([yn]) / A(n) -> 1 uniformly on y in [0.25, 1].
  for (auto n : rep.grid) {
    rep.a_partial_sum_dev.push_back(partial_sum_deviation(ca, n, 0.25));
    rep.b_partial_sum_dev.push_back(partial_sum_deviation(cb, n, 0.25));
  }
  rep.verdicts.push_back(
      {"1(v)",
       pass_if(non_increasing_to_zero(rep.a_partial_sum_dev, 0.95) &&
               non_increasing_to_zero(rep.b_partial_sum_dev, 0.95)),
       "A dev " + describe(rep.a_partial_sum_dev) + "; B dev " + describe(rep.b_partial_sum_dev)});

  // Assumption 2: simulate the occupation counters.
  SamplerSpec sim = sampler;
  if (sim.mode == SamplerMode::OnPolicyTrajectory) sim = SamplerSpec::uniform();
  std::vector<double> y_law = sim.mode == SamplerMode::IidCustom
                                  ? sim.y_dist
                                  : std::vector<double>(n_states, 1.0 / double(n_states));
  std::vector<double> z_law =
      sim.mode == SamplerMode::IidCustom
          ? sim.z_dist
          : std::vector<double>(n_states * n_actions, 1.0 / double(n_states * n_actions));
  const DiscreteSampler y_draw(y_law);
  const DiscreteSampler z_draw(z_law);
  RngStreams rng(seed);
  UpdateCounters counters(n_states, n_actions);
  const std::size_t last_pair = n_states * n_actions - 1;
  const std::size_t other_state = n_states > 1 ? 1 : 0;
  std::vector<std::uint32_t> path_s0(prefix + 1), path_s1(prefix + 1);
  std::vector<std::uint32_t> path_p0(prefix + 1), path_p1(prefix + 1);
  for (std::uint64_t k = 0; k <= prefix; ++k) {
    path_s0[k] = static_cast<std::uint32_t>(counters.nu1(0));
    path_s1[k] = static_cast<std::uint32_t>(counters.nu1(other_state));
    path_p0[k] = static_cast<std::uint32_t>(counters.pair_counts()[0]);
    path_p1[k] = static_cast<std::uint32_t>(counters.pair_counts()[last_pair]);
    if (k == prefix) break;
    const std::size_t y = y_draw(rng.uniform(RngStreams::kY));
    const std::size_t z = z_draw(rng.uniform(RngStreams::kZ));
    counters.tick(y, z / n_actions, z % n_actions);
  }
  rep.kappa_states = double(*std::min_element(counters.state_counts().begin(),
                                              counters.state_counts().end())) / double(prefix);
  rep.kappa_pairs = double(*std::min_element(counters.pair_counts().begin(),
                                             counters.pair_counts().end())) / double(prefix);
  const double floor_mass = sim.min_atom_mass(n_states, n_actions);
  rep.verdicts.push_back(
      {"2(i)", pass_if(rep.kappa_states >= 0.5 * floor_mass && rep.kappa_pairs >= 0.5 * floor_mass),
       "empirical kappa states=" + std::to_string(rep.kappa_states) +
           " pairs=" + std::to_string(rep.kappa_pairs)});

  // 2(ii): reported only; the limits are almost-sure asymptotics.
  if (n_states > 1 && last_pair > 0) {
    for (double x : {0.5, 1.0}) {
      for (std::uint64_t n : {prefix / 8, prefix / 4, prefix / 2}) {
        WindowSample w{x, n, std::nullopt, 0.0, 0.0};
        const auto st = window_ratio(path_s0, path_s1, sa, ca, n, x);
        const auto pr = window_ratio(path_p0, path_p1, sb, cb, n, x);
        if (st.end && pr.end) {
          w.window_end = std::max(*st.end, *pr.end);
          w.state_ratio = st.ratio;
          w.pair_ratio = pr.ratio;
        }
        rep.windows.push_back(w);
      }
    }
  }
  rep.verdicts.push_back({"2(ii)", VerdictStatus::Informational,
                          "window ratios reported; limit existence is asymptotic"});
  return rep;
}

}  // namespace calab
