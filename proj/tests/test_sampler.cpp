#include <gtest/gtest.h>

#include <cmath>

#include "calab/mdp.hpp"
#include "calab/sampler.hpp"

using namespace calab;

TEST(RngStreams, SameSeedSameDraws) {
  RngStreams a(42), b(42);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(a.uniform(RngStreams::kZ), b.uniform(RngStreams::kZ));
}

TEST(RngStreams, StreamsAreIndependentOfEachOther) {
  // Drawing from one stream must not shift another.
  RngStreams a(7), b(7);
  for (int k = 0; k < 10; ++k) a.uniform(RngStreams::kY);
  EXPECT_EQ(a.uniform(RngStreams::kAction), b.uniform(RngStreams::kAction));
  EXPECT_NE(RngStreams(7).uniform(RngStreams::kY), RngStreams(7).uniform(RngStreams::kZ));
}

TEST(RngStreams, SaveRestoreReproduces) {
  RngStreams a(9);
  for (int k = 0; k < 5; ++k) a.uniform(RngStreams::kCriticNext);
  const auto saved = a.save();
  const double next = a.uniform(RngStreams::kCriticNext);
  RngStreams b(1);
  b.restore(saved);
  EXPECT_EQ(b.uniform(RngStreams::kCriticNext), next);
}

TEST(RngStreams, UniformRange) {
  RngStreams a(3);
  double mean = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double u = a.uniform(RngStreams::kY);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u;
  }
  EXPECT_NEAR(mean / 100000.0, 0.5, 0.005);
}

TEST(DiscreteSampler, InverseCdf) {
  const std::vector<double> w{0.25, 0.5, 0.25};
  const DiscreteSampler s(w);
  EXPECT_EQ(s(0.0), 0u);
  EXPECT_EQ(s(0.2499), 0u);
  EXPECT_EQ(s(0.25), 1u);
  EXPECT_EQ(s(0.9999), 2u);
}

TEST(SamplerSpec, Validation) {
  SamplerSpec s;
  s.mode = SamplerMode::IidCustom;
  s.y_dist = {0.5, 0.5};
  s.z_dist = {0.25, 0.25, 0.25, 0.25};
  EXPECT_NO_THROW(s.validate(2, 2));
  EXPECT_DOUBLE_EQ(s.min_atom_mass(2, 2), 0.25);
  s.y_dist = {1.0, 0.0};
  EXPECT_THROW(s.validate(2, 2), ConfigError);
  s.y_dist = {0.5, 0.6};
  EXPECT_THROW(s.validate(2, 2), ConfigError);
}

TEST(SamplerSpec, JsonRoundTrip) {
  SamplerSpec s;
  s.mode = SamplerMode::OnPolicyTrajectory;
  s.restart_prob = 0.05;
  const SamplerSpec back = sampler_from_json(to_json(s));
  EXPECT_EQ(back.mode, s.mode);
  EXPECT_DOUBLE_EQ(back.restart_prob, 0.05);
  EXPECT_THROW(sampler_mode_from_string("bogus"), ConfigError);
}
