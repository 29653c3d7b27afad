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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fedlisting/common.hpp"

namespace fedlisting::defense {
namespace {

std::vector<float> AddGaussian(std::span<const float> v, double stddev, std::uint64_t seed) {
  std::vector<float> out(v.begin(), v.end());
  if (stddev == 0.0) return out;
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, stddev);
  for (float& x : out) x = static_cast<float>(x + noise(rng));
  return out;
}

}  // namespace

std::string_view ToString(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::kNone: return "none";
    case DefenseKind::kDp: return "dp";
    case DefenseKind::kNoise: return "noise";
    case DefenseKind::kCompress: return "compress";
  }
  return "unknown";
}

DefenseKind ParseDefenseKind(std::string_view name) {
  if (name == "none") return DefenseKind::kNone;
  if (name == "dp") return DefenseKind::kDp;
  if (name == "noise") return DefenseKind::kNoise;
  if (name == "compress") return DefenseKind::kCompress;
  throw ValidationError("unknown defense kind: " + std::string(name));
}

void DefenseConfig::Validate() const {
  switch (kind) {
    case DefenseKind::kNone:
      return;
    case DefenseKind::kDp:
      if (!(epsilon > 0.0)) throw ValidationError("DP requires epsilon > 0");
      if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("DP requires 0 < delta < 1");
      if (!(clip_norm > 0.0)) throw ValidationError("DP requires clip_norm > 0");
      return;
    case DefenseKind::kNoise:
      if (!(sigma >= 0.0)) throw ValidationError("noise requires sigma >= 0");
      return;
    case DefenseKind::kCompress:
      if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ValidationError("compression requires 0 < alpha <= 1");
      }
      return;
  }
}

double GaussianNoiseMultiplier(double epsilon, double delta) {
  if (!(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0)) {
    throw ValidationError("Gaussian mechanism requires epsilon > 0 and 0 < delta < 1");
  }
  return std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

std::vector<float> ClipToNorm(std::span<const float> v, double clip_norm) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  std::vector<float> out(v.begin(), v.end());
  if (norm <= clip_norm) return out;
  const double scale = clip_norm / norm;
  for (float& x : out) x = static_cast<float>(x * scale);
  return out;
}

std::vector<float> DpGaussian(std::span<const float> update, const DefenseConfig& cfg) {
  if (cfg.kind != DefenseKind::kDp) throw ValidationError("DpGaussian needs a DP config");
  cfg.Validate();
  const double multiplier = GaussianNoiseMultiplier(cfg.epsilon, cfg.delta);
  const double stddev = cfg.scale_noise_by_clip ? multiplier * cfg.clip_norm : multiplier;
  return AddGaussian(ClipToNorm(update, cfg.clip_norm), stddev, cfg.seed);
}

std::vector<float> NoisyGradient(std::span<const float> update, const DefenseConfig& cfg) {
  if (cfg.kind != DefenseKind::kNoise) throw ValidationError("NoisyGradient needs a noise config");
  cfg.Validate();
  return AddGaussian(update, cfg.sigma, cfg.seed);
}

std::vector<float> CompressTopK(std::span<const float> update, const DefenseConfig& cfg) {
  if (cfg.kind != DefenseKind::kCompress) {
    throw ValidationError("CompressTopK needs a compression config");
  }
  cfg.Validate();
  const std::size_t n = update.size();
  if (n == 0) throw ValidationError("cannot compress an empty update");
  // Guard against alpha * n landing a hair above an integer.
  const auto keep = static_cast<std::size_t>(
      std::ceil(cfg.alpha * static_cast<double>(n) - 1e-9));
  std::vector<float> out(n, 0.0f);
  if (keep >= n) {
    std::copy(update.begin(), update.end(), out.begin());
    return out;
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  auto larger = [&update](std::uint32_t a, std::uint32_t b) {
    const float ma = std::abs(update[a]);
    const float mb = std::abs(update[b]);
    return ma != mb ? ma > mb : a < b;
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep),
                   order.end(), larger);
  for (std::size_t i = 0; i < keep; ++i) out[order[i]] = update[order[i]];
  return out;
}

nn::ModelParams ApplyDefense(const nn::ModelParams& delta, const DefenseConfig& cfg) {
  cfg.Validate();
  if (cfg.kind == DefenseKind::kNone) return delta;
  const std::vector<float> flat = nn::FlattenAll(delta);
  std::vector<float> defended;
  switch (cfg.kind) {
    case DefenseKind::kDp: defended = DpGaussian(flat, cfg); break;
    case DefenseKind::kNoise: defended = NoisyGradient(flat, cfg); break;
    case DefenseKind::kCompress: defended = CompressTopK(flat, cfg); break;
    case DefenseKind::kNone: break;
  }
  return nn::UnflattenAll(defended, delta);
}

}  // namespace fedlisting::defense
