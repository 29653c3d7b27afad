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

// Label-distribution inference from recorded last-layer deltas: the attack
// dataset, the composite distribution loss, the simplex-headed MLP, metrics
// and the random-guess baseline.
//
// Attack dataset file: u32 samples, u32 feat_len, u32 T, then per sample
// feat_len float32 features followed by T float32 target proportions.

#ifndef FEDLISTING_ATTACK_HPP_
#define FEDLISTING_ATTACK_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fedlisting/federation.hpp"
#include "fedlisting/nnkernels.hpp"
#include "fedlisting/partitioning.hpp"

namespace fedlisting::attack {

using partition::LabelDistribution;

// Additive smoothing inside the KL terms of JS.
inline constexpr double kJsEpsilon = 1e-12;

struct AttackSample {
  std::vector<float> features;
  LabelDistribution target;

  bool operator==(const AttackSample&) const = default;
};

struct LossWeights {
  double a = 0.0;  // mean absolute error
  double b = 0.5;  // squared variance gap
  double c = 0.5;  // Jensen-Shannon

  void Validate() const;
  bool operator==(const LossWeights&) const = default;
};

struct AttackMetrics {
  double manhattan = 0.0;
  double js = 0.0;
  double cosine = 0.0;

  bool operator==(const AttackMetrics&) const = default;
};

// concat(g^1, ..., g^R).
std::vector<float> FlattenRecord(const federation::GradientRecord& record);

// One sample per client per run, in run then client order. Throws
// ValidationError when runs disagree on R or the delta length.
std::vector<AttackSample> BuildAttackDataset(std::span<const federation::FedRunResult> runs);

// JS(p || q) with base-2 logs; KL terms use (x + eps) / (m + eps).
double JsDivergence(std::span<const double> p, std::span<const double> q);

// a * mean|y - yhat| + b * (Var(y) - Var(yhat))^2 + c * JS(y || yhat), with
// population variance over the T entries.
double CompositeLoss(std::span<const double> y, std::span<const double> yhat,
                     const LossWeights& w);
// d CompositeLoss / d yhat. The L1 subgradient at equality is 0.
std::vector<double> CompositeLossGrad(std::span<const double> y, std::span<const double> yhat,
                                      const LossWeights& w);

// Manhattan distance, JS divergence and cosine similarity.
AttackMetrics ComputeMetrics(std::span<const double> y, std::span<const double> yhat);

// |N(0,1)| draws normalized to sum 1.
LabelDistribution RandomGuessBaseline(std::size_t num_classes, std::uint64_t seed);

// Per-dimension z-score with training-set statistics; std floored at 1e-8.
struct Standardizer {
  std::vector<float> mean;
  std::vector<float> stddev;

  static Standardizer Fit(std::span<const AttackSample> samples);
  std::vector<float> Apply(std::span<const float> features) const;
  bool operator==(const Standardizer&) const = default;
};

struct AttackHyper {
  std::size_t epochs = 300;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::vector<std::size_t> hidden{256, 128};
  std::uint64_t seed = 0;
};

struct AttackModel {
  nn::ModelParams mlp;
  Standardizer standardizer;
  // All training features identical while targets differ.
  bool degenerate = false;

  bool operator==(const AttackModel&) const = default;
};

// Mean training composite loss per epoch, for diagnostics.
struct TrainLog {
  std::vector<double> epoch_loss;
};

// Feature -> hidden... -> T with ReLU between layers and a softmax head,
// trained by Adam on the mean composite loss over shuffled mini-batches.
AttackModel TrainAttackModel(std::span<const AttackSample> samples, const LossWeights& w,
                             const AttackHyper& hyper, TrainLog* log = nullptr);

// Standardizes raw features with the stored statistics, then predicts.
LabelDistribution InferDistribution(const AttackModel& model, std::span<const float> features);
LabelDistribution InferDistribution(const AttackModel& model,
                                    const federation::GradientRecord& record);

// Seeded shuffle, then the first round(val_fraction * n) samples (at least
// one, at most n - 1) go to validation.
struct DatasetSplit {
  std::vector<AttackSample> train;
  std::vector<AttackSample> validation;
};
DatasetSplit SplitDataset(std::span<const AttackSample> samples, double val_fraction,
                          std::uint64_t seed);

// Mean metrics of the model over `samples`.
AttackMetrics Evaluate(const AttackModel& model, std::span<const AttackSample> samples);

struct GridCandidate {
  LossWeights weights;
  double validation_loss = 0.0;  // reference composite, weights (1, 1, 1)
  double validation_cosine = 0.0;
};

struct GridSearchResult {
  LossWeights best;
  std::vector<GridCandidate> candidates;
};

// Every (a, b, c) on {0, step, ..., 1}^3 except the origin, each trained on
// a fixed 80/20 split. Candidates are ranked by a common reference loss
// (all weights 1) on the validation part, then by higher validation cosine,
// then lexicographically.
GridSearchResult GridSearchWeights(std::span<const AttackSample> samples, double step,
                                   const AttackHyper& hyper);

void WriteAttackDataset(std::span<const AttackSample> samples, const std::filesystem::path& path);
std::vector<AttackSample> ReadAttackDataset(const std::filesystem::path& path);

// Checkpoint followed by u32 feat_len, mean and stddev float32 vectors and a
// degenerate flag byte.
void WriteAttackModel(const AttackModel& model, const std::filesystem::path& path);
AttackModel ReadAttackModel(const std::filesystem::path& path);

}  // namespace fedlisting::attack

#endif  // FEDLISTING_ATTACK_HPP_
