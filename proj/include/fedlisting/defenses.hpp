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

// Client-side transforms applied to a parameter update before upload.

#ifndef FEDLISTING_DEFENSES_HPP_
#define FEDLISTING_DEFENSES_HPP_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fedlisting/nnkernels.hpp"

namespace fedlisting::defense {

enum class DefenseKind : std::uint8_t { kNone, kDp, kNoise, kCompress };

std::string_view ToString(DefenseKind kind);
// "none", "dp", "noise", "compress".
DefenseKind ParseDefenseKind(std::string_view name);

struct DefenseConfig {
  DefenseKind kind = DefenseKind::kNone;
  // Gaussian mechanism.
  double epsilon = 1.0;
  double delta = 1e-5;
  double clip_norm = 1.0;
  // When false the noise std is the bare multiplier, without the clip-norm
  // sensitivity factor.
  bool scale_noise_by_clip = true;
  // Plain noisy update.
  double sigma = 0.0;
  // Fraction of entries kept by compression.
  double alpha = 1.0;
  // Seeds the noise stream. Callers derive a distinct value per client/round.
  std::uint64_t seed = 0;

  // Throws ValidationError when the fields for `kind` are out of range.
  void Validate() const;

  bool operator==(const DefenseConfig&) const = default;
};

// sqrt(2 ln(1.25 / delta)) / epsilon.
double GaussianNoiseMultiplier(double epsilon, double delta);

// Scales v to at most clip_norm in L2; vectors already inside are returned
// unchanged.
std::vector<float> ClipToNorm(std::span<const float> v, double clip_norm);

// Clip, then add N(0, (multiplier * clip_norm)^2) per coordinate.
std::vector<float> DpGaussian(std::span<const float> update, const DefenseConfig& cfg);

// Adds N(0, sigma^2) per coordinate.
std::vector<float> NoisyGradient(std::span<const float> update, const DefenseConfig& cfg);

// Keeps the ceil(alpha * n) largest-magnitude entries; equal magnitudes keep
// the lower index first.
std::vector<float> CompressTopK(std::span<const float> update, const DefenseConfig& cfg);

// Applies the configured transform to the whole flattened delta.
nn::ModelParams ApplyDefense(const nn::ModelParams& delta, const DefenseConfig& cfg);

}  // namespace fedlisting::defense

#endif  // FEDLISTING_DEFENSES_HPP_
