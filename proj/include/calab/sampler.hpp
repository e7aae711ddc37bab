#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace calab {

/// How the engine picks the state Y_n whose value is updated and the pair Z_n
/// whose logit is updated.
enum class SamplerMode { IidUniform, IidCustom, OnPolicyTrajectory };

struct SamplerSpec {
  SamplerMode mode = SamplerMode::IidUniform;
  /// Over states; IidCustom only.
  std::vector<double> y_dist;
  /// Over flattened (state, action) pairs, index i * |U| + a; IidCustom only.
  std::vector<double> z_dist;
  /// Draw Z_n at the state Y_n (action from the matching z_dist row).
  bool z_same_state = false;
  /// OnPolicyTrajectory only: chance per step of restarting the trajectory at
  /// a uniform state, so absorbing states do not trap it.
  double restart_prob = 0.01;

  static SamplerSpec uniform() { return {}; }

  /// Throws ConfigError when distributions are unnormalized, have a zero atom,
  /// or have the wrong size.
  void validate(std::size_t n_states, std::size_t n_actions) const;
  /// Smallest atom of the Y and Z laws; the occupation floor kappa for iid modes.
  double min_atom_mass(std::size_t n_states, std::size_t n_actions) const;
};

std::string to_string(SamplerMode mode);
SamplerMode sampler_mode_from_string(const std::string& name);
nlohmann::json to_json(const SamplerSpec& spec);
SamplerSpec sampler_from_json(const nlohmann::json& doc);

/// Independent seeded streams, one per source of randomness in a step, so two
/// runs with the same seed consume identical draws per role.
class RngStreams {
 public:
  enum Stream : std::size_t { kY = 0, kZ, kAction, kCriticNext, kActorNext, kCount };

  explicit RngStreams(std::uint64_t seed);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform(Stream s) { return double(engines_[s]() >> 11) * 0x1.0p-53; }

  /// Index k with probability weights[k] / sum(weights), by inverse CDF.
  std::size_t categorical(Stream s, std::span<const double> weights);

  /// Engine state as text; restoring it reproduces every later draw exactly.
  std::vector<std::string> save() const;
  void restore(const std::vector<std::string>& states);

 private:
  std::array<std::mt19937_64, kCount> engines_;
};

/// Precomputed inverse-CDF sampler over a fixed discrete law.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(std::span<const double> weights);
  std::size_t operator()(double u) const;
  std::size_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

}  // namespace calab
