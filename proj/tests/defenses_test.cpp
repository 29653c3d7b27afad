// Copyright 2026 The FedListing Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedlisting/defenses.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fedlisting/common.hpp"

namespace fedlisting::defense {
namespace {

double Norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

DefenseConfig Dp(double eps, double delta, double clip, std::uint64_t seed = 1) {
  DefenseConfig c;
  c.kind = DefenseKind::kDp;
  c.epsilon = eps;
  c.delta = delta;
  c.clip_norm = clip;
  c.seed = seed;
  return c;
}

DefenseConfig Noise(double sigma, std::uint64_t seed = 1) {
  DefenseConfig c;
  c.kind = DefenseKind::kNoise;
  c.sigma = sigma;
  c.seed = seed;
  return c;
}

DefenseConfig Compress(double alpha) {
  DefenseConfig c;
  c.kind = DefenseKind::kCompress;
  c.alpha = alpha;
  return c;
}

TEST(GaussianMechanismTest, NoiseMultiplierClosedForm) {
  // sqrt(2 ln(125000)) = 4.8450...
  EXPECT_NEAR(GaussianNoiseMultiplier(1.0, 1e-5), std::sqrt(2.0 * std::log(125000.0)), 1e-12);
  EXPECT_NEAR(GaussianNoiseMultiplier(1.0, 1e-5), 4.845, 1e-3);
  EXPECT_NEAR(GaussianNoiseMultiplier(2.0, 1e-5), 4.845 / 2, 1e-3);
  EXPECT_THROW(GaussianNoiseMultiplier(0.0, 1e-5), ValidationError);
  EXPECT_THROW(GaussianNoiseMultiplier(1.0, 1.0), ValidationError);
}

TEST(GaussianMechanismTest, ClippingContract) {
  std::vector<float> v{6.0f, 8.0f};  // norm 10
  const auto clipped = ClipToNorm(v, 1.0);
  EXPECT_NEAR(Norm(clipped), 1.0, 1e-6);
  EXPECT_NEAR(clipped[0] / clipped[1], 0.75, 1e-6);
  const std::vector<float> inside{0.3f, -0.4f};
  EXPECT_EQ(ClipToNorm(inside, 1.0), inside);
}

TEST(GaussianMechanismTest, ClippingNeverIncreasesNorm) {
  Rng rng(3);
  std::normal_distribution<float> dist(0.0f, 3.0f);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> v(17);
    for (float& x : v) x = dist(rng);
    EXPECT_LE(Norm(ClipToNorm(v, 2.0)), std::min(Norm(v), 2.0) + 1e-5);
  }
}

TEST(GaussianMechanismTest, HugeEpsilonIsIdentityWithinClip) {
  const std::vector<float> v{0.25f, -0.5f, 0.125f};
  EXPECT_EQ(DpGaussian(v, Dp(1e15, 1e-5, 1.0)), v);
}

TEST(GaussianMechanismTest, NoiseScaleFollowsClipNorm) {
  const std::vector<float> zeros(200000, 0.0f);
  auto empirical_std = [](const std::vector<float>& out) {
    double s = 0.0;
    for (float x : out) s += static_cast<double>(x) * x;
    return std::sqrt(s / static_cast<double>(out.size()));
  };
  DefenseConfig scaled = Dp(10.0, 1e-5, 0.5);
  EXPECT_NEAR(empirical_std(DpGaussian(zeros, scaled)), 0.4845 * 0.5, 0.01 * 0.24);
  scaled.scale_noise_by_clip = false;
  EXPECT_NEAR(empirical_std(DpGaussian(zeros, scaled)), 0.4845, 0.01 * 0.48);
  EXPECT_THROW(DpGaussian(zeros, Dp(-1.0, 1e-5, 1.0)), ValidationError);
  EXPECT_THROW(DpGaussian(zeros, Noise(1.0)), ValidationError);
}

TEST(NoisyGradientTest, ZeroSigmaIsIdentityAndSeedDeterminism) {
  const std::vector<float> v{1.0f, -2.0f, 3.5f};
  EXPECT_EQ(NoisyGradient(v, Noise(0.0)), v);
  EXPECT_EQ(NoisyGradient(v, Noise(0.7, 9)), NoisyGradient(v, Noise(0.7, 9)));
  EXPECT_NE(NoisyGradient(v, Noise(0.7, 9)), NoisyGradient(v, Noise(0.7, 10)));
}

TEST(NoisyGradientTest, EmpiricalStdAtOneMillionCoordinates) {
  const std::vector<float> v(1000000, 0.5f);
  const auto out = NoisyGradient(v, Noise(1.0, 123));
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = static_cast<double>(out[i]) - v[i];
    sum += d;
    sq += d * d;
  }
  const double n = static_cast<double>(v.size());
  const double stddev = std::sqrt(sq / n - (sum / n) * (sum / n));
  EXPECT_GE(stddev, 0.99);
  EXPECT_LE(stddev, 1.01);
}

TEST(NoiseTest, MeanPreservingOverSeeds) {
  const std::vector<float> v{0.5f, -1.0f, 2.0f, 0.0f};
  constexpr int kSeeds = 10000;
  for (const DefenseConfig& base : {Noise(0.8), Dp(2.0, 1e-5, 10.0)}) {
    const double sigma = base.kind == DefenseKind::kNoise
                             ? base.sigma
                             : GaussianNoiseMultiplier(2.0, 1e-5) * 10.0;
    std::vector<double> mean(v.size(), 0.0);
    for (int s = 0; s < kSeeds; ++s) {
      DefenseConfig cfg = base;
      cfg.seed = static_cast<std::uint64_t>(s);
      const auto out = cfg.kind == DefenseKind::kNoise ? NoisyGradient(v, cfg) : DpGaussian(v, cfg);
      for (std::size_t i = 0; i < v.size(); ++i) mean[i] += out[i] / kSeeds;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_NEAR(mean[i], v[i], 3.0 * sigma / std::sqrt(kSeeds));
    }
  }
}

TEST(CompressTopKTest, HandExampleAndIdentity) {
  const std::vector<float> v{3.0f, -1.0f, 4.0f, 2.0f};
  EXPECT_EQ(CompressTopK(v, Compress(0.5)), (std::vector<float>{3.0f, 0.0f, 4.0f, 0.0f}));
  EXPECT_EQ(CompressTopK(v, Compress(1.0)), v);
  EXPECT_EQ(CompressTopK(v, Compress(0.25)), (std::vector<float>{0.0f, 0.0f, 4.0f, 0.0f}));
}

TEST(CompressTopKTest, TiesKeepLowerIndexAndErrors) {
  const std::vector<float> v{1.0f, -1.0f, 1.0f, 1.0f};
  EXPECT_EQ(CompressTopK(v, Compress(0.5)), (std::vector<float>{1.0f, -1.0f, 0.0f, 0.0f}));
  EXPECT_THROW(CompressTopK(std::vector<float>{}, Compress(0.5)), ValidationError);
  EXPECT_THROW(CompressTopK(v, Compress(0.0)), ValidationError);
  EXPECT_THROW(CompressTopK(v, Compress(1.5)), ValidationError);
}

TEST(CompressTopKTest, KeepsExactlyCeilAlphaNUnscaled) {
  Rng rng(4);
  std::uniform_real_distribution<float> dist(0.1f, 5.0f);
  for (double alpha : {0.1, 0.25, 0.3, 0.5, 0.7, 0.9}) {
    for (std::size_t n : {1u, 7u, 10u, 119u, 1000u}) {
      std::vector<float> v(n);
      for (float& x : v) x = dist(rng) * (rng() % 2 ? 1.0f : -1.0f);
      const auto out = CompressTopK(v, Compress(alpha));
      const auto expected = static_cast<std::size_t>(std::ceil(alpha * n - 1e-9));
      EXPECT_EQ(static_cast<std::size_t>(std::count_if(out.begin(), out.end(),
                                                       [](float x) { return x != 0.0f; })),
                expected)
          << alpha << " " << n;
      float min_kept = 1e9f, max_dropped = 0.0f;
      for (std::size_t i = 0; i < n; ++i) {
        if (out[i] != 0.0f) {
          EXPECT_EQ(out[i], v[i]);
          min_kept = std::min(min_kept, std::abs(v[i]));
        } else {
          max_dropped = std::max(max_dropped, std::abs(v[i]));
        }
      }
      EXPECT_GE(min_kept, max_dropped);
    }
  }
}

TEST(ApplyDefenseTest, NoneIsBitIdentical) {
  const auto delta = nn::InitGnn(nn::Architecture::kGcn, 6, 4, 3, 1);
  EXPECT_EQ(ApplyDefense(delta, DefenseConfig{}), delta);
}

TEST(ApplyDefenseTest, CompressionActsOnWholeDelta) {
  const auto delta = nn::InitGnn(nn::Architecture::kGcn, 6, 4, 3, 1);
  const auto out = ApplyDefense(delta, Compress(0.5));
  ASSERT_TRUE(out.SameShape(delta));
  const auto flat = nn::FlattenAll(out);
  const auto in_flat = nn::FlattenAll(delta);
  const auto nonzero_in = std::count_if(in_flat.begin(), in_flat.end(),
                                        [](float x) { return x != 0.0f; });
  const auto nonzero_out = std::count_if(flat.begin(), flat.end(),
                                         [](float x) { return x != 0.0f; });
  // Zero biases in the Glorot init stay zero, so count against the full size.
  EXPECT_EQ(static_cast<std::size_t>(nonzero_out),
            std::min<std::size_t>(nonzero_in, (flat.size() + 1) / 2));
}

TEST(ApplyDefenseTest, DpWithHugeClipAndTinyNoiseIsNearIdentity) {
  const auto delta = nn::InitGnn(nn::Architecture::kSage, 6, 4, 3, 2);
  // Noise std = multiplier * clip ~ 4.8e-5.
  const auto out = ApplyDefense(delta, Dp(1e8, 1e-5, 1e3, 7));
  const auto a = nn::FlattenAll(delta);
  const auto b = nn::FlattenAll(out);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(double(a[i]) - b[i]));
  EXPECT_LT(worst, 1e-3);
  EXPECT_GT(worst, 0.0);
}

TEST(DefenseConfigTest, ParseAndValidate) {
  EXPECT_EQ(ParseDefenseKind("compress"), DefenseKind::kCompress);
  EXPECT_EQ(ToString(DefenseKind::kDp), "dp");
  EXPECT_THROW(ParseDefenseKind("foo"), ValidationError);
  EXPECT_THROW(Noise(-1.0).Validate(), ValidationError);
  EXPECT_THROW(Dp(1.0, 1e-5, 0.0).Validate(), ValidationError);
  EXPECT_NO_THROW(DefenseConfig{}.Validate());
}

}  // namespace
}  // namespace fedlisting::defense
