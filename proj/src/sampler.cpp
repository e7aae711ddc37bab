#include "calab/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "calab/mdp.hpp"

namespace calab {

namespace {

void check_law(std::span<const double> law, std::size_t expected, const char* name) {
  if (law.size() != expected) {
    throw ConfigError(std::string(name) + " must have " + std::to_string(expected) + " entries");
  }
  double total = 0.0;
  for (double p : law) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw ConfigError(std::string(name) + " must give every atom positive mass");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError(std::string(name) + " must sum to 1");
}

}  // namespace

void SamplerSpec::validate(std::size_t n_states, std::size_t n_actions) const {
  if (mode == SamplerMode::IidCustom) {
    check_law(y_dist, n_states, "y_dist");
    check_law(z_dist, n_states * n_actions, "z_dist");
  }
  if (mode == SamplerMode::OnPolicyTrajectory && !(restart_prob >= 0.0 && restart_prob <= 1.0)) {
    throw ConfigError("restart_prob must lie in [0, 1]");
  }
}

double SamplerSpec::min_atom_mass(std::size_t n_states, std::size_t n_actions) const {
  if (mode == SamplerMode::IidCustom) {
    return std::min(*std::min_element(y_dist.begin(), y_dist.end()),
                    *std::min_element(z_dist.begin(), z_dist.end()));
  }
  return 1.0 / double(n_states * n_actions);
}

std::string to_string(SamplerMode mode) {
  switch (mode) {
    case SamplerMode::IidUniform: return "iid_uniform";
    case SamplerMode::IidCustom: return "iid_custom";
    case SamplerMode::OnPolicyTrajectory: return "on_policy_trajectory";
  }
  return "unknown";
}

SamplerMode sampler_mode_from_string(const std::string& name) {
  if (name == "iid_uniform") return SamplerMode::IidUniform;
  if (name == "iid_custom") return SamplerMode::IidCustom;
  if (name == "on_policy_trajectory") return SamplerMode::OnPolicyTrajectory;
  throw ConfigError("unknown sampler mode '" + name + "'");
}

nlohmann::json to_json(const SamplerSpec& spec) {
  nlohmann::json doc = {{"mode", to_string(spec.mode)},
                        {"z_same_state", spec.z_same_state},
                        {"restart_prob", spec.restart_prob}};
  if (spec.mode == SamplerMode::IidCustom) {
    doc["y_dist"] = spec.y_dist;
    doc["z_dist"] = spec.z_dist;
  }
  return doc;
}

SamplerSpec sampler_from_json(const nlohmann::json& doc) {
  SamplerSpec spec;
  try {
    spec.mode = sampler_mode_from_string(doc.value("mode", std::string("iid_uniform")));
    spec.z_same_state = doc.value("z_same_state", false);
    spec.restart_prob = doc.value("restart_prob", spec.restart_prob);
    if (doc.contains("y_dist")) spec.y_dist = doc.at("y_dist").get<std::vector<double>>();
    if (doc.contains("z_dist")) spec.z_dist = doc.at("z_dist").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed sampler: ") + e.what());
  }
  return spec;
}

RngStreams::RngStreams(std::uint64_t seed) {
  for (std::size_t s = 0; s < kCount; ++s) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s), 0x9e3779b9u};
    engines_[s].seed(seq);
  }
}

std::size_t RngStreams::categorical(Stream s, std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = uniform(s) * total;
  for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  // Rounding can leave u slightly past the last positive weight.
  for (std::size_t k = weights.size(); k-- > 0;) {
    if (weights[k] > 0.0) return k;
  }
  return weights.size() - 1;
}

std::vector<std::string> RngStreams::save() const {
  std::vector<std::string> out;
  for (const auto& e : engines_) {
    std::ostringstream os;
    os << e;
    out.push_back(os.str());
  }
  return out;
}

void RngStreams::restore(const std::vector<std::string>& states) {
  if (states.size() != kCount) throw ConfigError("snapshot has the wrong number of RNG streams");
  for (std::size_t s = 0; s < kCount; ++s) {
    std::istringstream is(states[s]);
    is >> engines_[s];
    if (!is) throw ConfigError("snapshot RNG state is unreadable");
  }
}

DiscreteSampler::DiscreteSampler(std::span<const double> weights) {
  cdf_.resize(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cdf_.begin());
  const double total = cdf_.empty() ? 0.0 : cdf_.back();
  if (!(total > 0.0)) throw ConfigError("discrete law needs positive total mass");
  for (auto& c : cdf_) c /= total;
}

std::size_t DiscreteSampler::operator()(double u) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
}

}  // namespace calab
