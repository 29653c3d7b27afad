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

#include "fedlisting/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "binary_io.hpp"
#include "fedlisting/common.hpp"

namespace fedlisting::attack {
namespace {

void CheckSameLength(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size() || y.empty()) {
    throw ValidationError("distributions differ in length or are empty");
  }
}

double Kl2(std::span<const double> p, std::span<const double> m) {
  double s = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t] > 0.0) s += p[t] * std::log2((p[t] + kJsEpsilon) / (m[t] + kJsEpsilon));
  }
  return s;
}

double PopulationVariance(std::span<const double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

// Row-wise softmax in double.
std::vector<double> Softmax(std::span<const float> logits) {
  const float top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double denom = 0.0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    p[t] = std::exp(static_cast<double>(logits[t]) - top);
    denom += p[t];
  }
  for (double& x : p) x /= denom;
  return p;
}

DenseMatrix StandardizedMatrix(std::span<const AttackSample> samples, const Standardizer& s) {
  const std::size_t d = s.mean.size();
  DenseMatrix x(samples.size(), d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto row = s.Apply(samples[i].features);
    std::copy(row.begin(), row.end(), x.row(i).begin());
  }
  return x;
}

void CheckDataset(std::span<const AttackSample> samples) {
  if (samples.empty()) return;
  const std::size_t d = samples[0].features.size();
  const std::size_t t = samples[0].target.size();
  for (const auto& s : samples) {
    if (s.features.size() != d) throw ValidationError("attack samples differ in feature length");
    if (s.target.size() != t) throw ValidationError("attack samples differ in class count");
  }
}

}  // namespace

void LossWeights::Validate() const {
  for (double v : {a, b, c}) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("loss weights must lie in [0, 1]");
  }
  if (a == 0.0 && b == 0.0 && c == 0.0) throw ValidationError("loss weights are all zero");
}

std::vector<float> FlattenRecord(const federation::GradientRecord& record) {
  std::vector<float> out;
  for (const auto& g : record.rounds) out.insert(out.end(), g.begin(), g.end());
  return out;
}

std::vector<AttackSample> BuildAttackDataset(std::span<const federation::FedRunResult> runs) {
  std::vector<AttackSample> out;
  std::size_t rounds = 0, len = 0;
  bool first = true;
  for (const auto& run : runs) {
    if (run.records.size() != run.distributions.size()) {
      throw ValidationError("run has mismatched records and distributions");
    }
    for (std::size_t k = 0; k < run.records.size(); ++k) {
      const auto& rec = run.records[k];
      const std::size_t l = rec.rounds.empty() ? 0 : rec.rounds[0].size();
      for (const auto& g : rec.rounds) {
        if (g.size() != l) throw ValidationError("ragged gradient record");
      }
      if (first) {
        rounds = rec.rounds.size();
        len = l;
        first = false;
      } else if (rec.rounds.size() != rounds || l != len) {
        throw ValidationError("shadow runs disagree on rounds (" + std::to_string(rounds) +
                              " vs " + std::to_string(rec.rounds.size()) +
                              ") or delta length (" + std::to_string(len) + " vs " +
                              std::to_string(l) + ")");
      }
      out.push_back({FlattenRecord(rec), run.distributions[k]});
    }
  }
  return out;
}

double JsDivergence(std::span<const double> p, std::span<const double> q) {
  CheckSameLength(p, q);
  std::vector<double> m(p.size());
  for (std::size_t t = 0; t < p.size(); ++t) m[t] = 0.5 * (p[t] + q[t]);
  return 0.5 * Kl2(p, m) + 0.5 * Kl2(q, m);
}

double CompositeLoss(std::span<const double> y, std::span<const double> yhat,
                     const LossWeights& w) {
  CheckSameLength(y, yhat);
  const double t = static_cast<double>(y.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) l1 += std::abs(y[i] - yhat[i]);
  const double gap = PopulationVariance(y) - PopulationVariance(yhat);
  return w.a * l1 / t + w.b * gap * gap + w.c * JsDivergence(y, yhat);
}

std::vector<double> CompositeLossGrad(std::span<const double> y, std::span<const double> yhat,
                                      const LossWeights& w) {
  CheckSameLength(y, yhat);
  const std::size_t n = y.size();
  const double t = static_cast<double>(n);
  const double mean_hat = std::accumulate(yhat.begin(), yhat.end(), 0.0) / t;
  const double gap = PopulationVariance(y) - PopulationVariance(yhat);
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = y[i] - yhat[i];
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    g[i] -= w.a * sign / t;
    g[i] -= w.b * 2.0 * gap * (2.0 / t) * (yhat[i] - mean_hat);
    // The p-side KL only reaches yhat through the midpoint.
    const double m = 0.5 * (y[i] + yhat[i]);
    g[i] += w.c * (0.5 * std::log2((yhat[i] + kJsEpsilon) / (m + kJsEpsilon)) +
                   (yhat[i] / (yhat[i] + kJsEpsilon) - m / (m + kJsEpsilon)) /
                       (2.0 * std::numbers::ln2));
  }
  return g;
}

AttackMetrics ComputeMetrics(std::span<const double> y, std::span<const double> yhat) {
  CheckSameLength(y, yhat);
  AttackMetrics m;
  double dot = 0.0, ny = 0.0, nh = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    m.manhattan += std::abs(y[i] - yhat[i]);
    dot += y[i] * yhat[i];
    ny += y[i] * y[i];
    nh += yhat[i] * yhat[i];
  }
  if (ny == 0.0 || nh == 0.0) throw ValidationError("cosine similarity of a zero vector");
  m.cosine = dot / (std::sqrt(ny) * std::sqrt(nh));
  m.js = JsDivergence(y, yhat);
  return m;
}

LabelDistribution RandomGuessBaseline(std::size_t num_classes, std::uint64_t seed) {
  if (num_classes == 0) throw ValidationError("baseline needs at least one class");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabelDistribution p(num_classes);
  double total = 0.0;
  while (total <= 0.0) {
    total = 0.0;
    for (double& x : p) {
      x = std::abs(normal(rng));
      total += x;
    }
  }
  for (double& x : p) x /= total;
  return p;
}

Standardizer Standardizer::Fit(std::span<const AttackSample> samples) {
  if (samples.empty()) throw ValidationError("cannot standardize an empty dataset");
  CheckDataset(samples);
  const std::size_t d = samples[0].features.size();
  std::vector<double> mean(d, 0.0), sq(d, 0.0);
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += s.features[j];
  }
  const double n = static_cast<double>(samples.size());
  for (double& m : mean) m /= n;
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = s.features[j] - mean[j];
      sq[j] += c * c;
    }
  }
  Standardizer out;
  out.mean.resize(d);
  out.stddev.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    out.mean[j] = static_cast<float>(mean[j]);
    out.stddev[j] = static_cast<float>(std::max(std::sqrt(sq[j] / n), 1e-8));
  }
  return out;
}

std::vector<float> Standardizer::Apply(std::span<const float> features) const {
  if (features.size() != mean.size()) {
    throw ValidationError("feature length " + std::to_string(features.size()) +
                          " does not match the model input " + std::to_string(mean.size()));
  }
  std::vector<float> out(features.size());
  for (std::size_t j = 0; j < features.size(); ++j) {
    out[j] = (features[j] - mean[j]) / stddev[j];
  }
  return out;
}

AttackModel TrainAttackModel(std::span<const AttackSample> samples, const LossWeights& w,
                             const AttackHyper& hyper, TrainLog* log) {
  w.Validate();
  if (samples.size() < 2) throw ValidationError("attack training needs at least 2 samples");
  if (hyper.batch_size == 0) throw ValidationError("attack batch size must be >= 1");
  CheckDataset(samples);
  const std::size_t t = samples[0].target.size();
  AttackModel model;
  model.standardizer = Standardizer::Fit(samples);
  bool same_features = true, same_targets = true;
  for (const auto& s : samples) {
    same_features = same_features && s.features == samples[0].features;
    same_targets = same_targets && s.target == samples[0].target;
  }
  model.degenerate = same_features && !same_targets;

  const DenseMatrix x = StandardizedMatrix(samples, model.standardizer);
  model.mlp = nn::InitMlp(x.cols, hyper.hidden, t, DeriveSeed(hyper.seed, {TagHash("attack_init")}));
  nn::AdamState adam = nn::AdamState::For(model.mlp, hyper.learning_rate);
  Rng rng(DeriveSeed(hyper.seed, {TagHash("attack_batches")}));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0u);

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      const std::size_t b = end - start;
      DenseMatrix batch(b, x.cols);
      for (std::size_t i = 0; i < b; ++i) {
        const auto src = x.row(order[start + i]);
        std::copy(src.begin(), src.end(), batch.row(i).begin());
      }
      const auto fwd = nn::MlpForward(model.mlp, batch);
      DenseMatrix dlogits(b, t);
      for (std::size_t i = 0; i < b; ++i) {
        const auto& y = samples[order[start + i]].target;
        const auto yhat = Softmax(fwd.logits.row(i));
        epoch_loss += CompositeLoss(y, yhat, w);
        const auto dy = CompositeLossGrad(y, yhat, w);
        double inner = 0.0;
        for (std::size_t c = 0; c < t; ++c) inner += dy[c] * yhat[c];
        for (std::size_t c = 0; c < t; ++c) {
          dlogits.at(i, c) = static_cast<float>(yhat[c] * (dy[c] - inner) / static_cast<double>(b));
        }
      }
      const auto grads = nn::MlpBackward(model.mlp, fwd.cache, dlogits);
      nn::AdamStep(model.mlp, grads, adam);
    }
    if (log) log->epoch_loss.push_back(epoch_loss / static_cast<double>(samples.size()));
  }
  return model;
}

LabelDistribution InferDistribution(const AttackModel& model, std::span<const float> features) {
  const auto z = model.standardizer.Apply(features);
  DenseMatrix input(1, z.size());
  std::copy(z.begin(), z.end(), input.values.begin());
  const auto fwd = nn::MlpForward(model.mlp, input);
  return Softmax(fwd.logits.row(0));
}

LabelDistribution InferDistribution(const AttackModel& model,
                                    const federation::GradientRecord& record) {
  return InferDistribution(model, FlattenRecord(record));
}

DatasetSplit SplitDataset(std::span<const AttackSample> samples, double val_fraction,
                          std::uint64_t seed) {
  if (samples.size() < 2) throw ValidationError("need at least 2 samples to split");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ValidationError("validation fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(DeriveSeed(seed, {TagHash("attack_split")}));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(samples.size()))),
      1, samples.size() - 1);
  DatasetSplit out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? out.validation : out.train).push_back(samples[order[i]]);
  }
  return out;
}

AttackMetrics Evaluate(const AttackModel& model, std::span<const AttackSample> samples) {
  if (samples.empty()) throw ValidationError("no samples to evaluate");
  AttackMetrics mean;
  for (const auto& s : samples) {
    const auto m = ComputeMetrics(s.target, InferDistribution(model, s.features));
    mean.manhattan += m.manhattan;
    mean.js += m.js;
    mean.cosine += m.cosine;
  }
  const double n = static_cast<double>(samples.size());
  mean.manhattan /= n;
  mean.js /= n;
  mean.cosine /= n;
  return mean;
}

GridSearchResult GridSearchWeights(std::span<const AttackSample> samples, double step,
                                   const AttackHyper& hyper) {
  if (!(step > 0.0 && step <= 1.0)) throw ValidationError("grid step must lie in (0, 1]");
  const double count = 1.0 / step;
  const auto levels = static_cast<std::size_t>(std::llround(count));
  if (std::abs(count - static_cast<double>(levels)) > 1e-9) {
    throw ValidationError("grid step must divide 1");
  }
  const auto split = SplitDataset(samples, 0.2, hyper.seed);
  GridSearchResult result;
  for (std::size_t i = 0; i <= levels; ++i) {
    for (std::size_t j = 0; j <= levels; ++j) {
      for (std::size_t k = 0; k <= levels; ++k) {
        if (i == 0 && j == 0 && k == 0) continue;
        result.candidates.push_back({{i * step, j * step, k * step}, 0.0, 0.0});
      }
    }
  }
  const LossWeights reference{1.0, 1.0, 1.0};
  ParallelFor(result.candidates.size(), [&](std::size_t idx) {
    auto& cand = result.candidates[idx];
    const auto model = TrainAttackModel(split.train, cand.weights, hyper);
    double loss = 0.0, cosine = 0.0;
    for (const auto& s : split.validation) {
      const auto yhat = InferDistribution(model, s.features);
      loss += CompositeLoss(s.target, yhat, reference);
      cosine += ComputeMetrics(s.target, yhat).cosine;
    }
    cand.validation_loss = loss / static_cast<double>(split.validation.size());
    cand.validation_cosine = cosine / static_cast<double>(split.validation.size());
  });
  // Candidates are generated in lexicographic order, so the first minimum
  // under (loss, -cosine) wins remaining ties.
  const auto best = std::min_element(
      result.candidates.begin(), result.candidates.end(),
      [](const GridCandidate& x, const GridCandidate& y) {
        if (x.validation_loss != y.validation_loss) return x.validation_loss < y.validation_loss;
        return x.validation_cosine > y.validation_cosine;
      });
  result.best = best->weights;
  return result;
}

void WriteAttackDataset(std::span<const AttackSample> samples, const std::filesystem::path& path) {
  CheckDataset(samples);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const auto n = static_cast<std::uint32_t>(samples.size());
  const auto d = static_cast<std::uint32_t>(samples.empty() ? 0 : samples[0].features.size());
  const auto t = static_cast<std::uint32_t>(samples.empty() ? 0 : samples[0].target.size());
  binary_io::Put(out, n);
  binary_io::Put(out, d);
  binary_io::Put(out, t);
  for (const auto& s : samples) {
    binary_io::Put(out, std::span<const float>(s.features));
    std::vector<float> target(s.target.begin(), s.target.end());
    binary_io::Put(out, std::span<const float>(target));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<AttackSample> ReadAttackDataset(const std::filesystem::path& path) {
  binary_io::Cursor cur(binary_io::ReadFile(path), path.string());
  const auto n = cur.Read<std::uint32_t>();
  const auto d = cur.Read<std::uint32_t>();
  const auto t = cur.Read<std::uint32_t>();
  if (cur.remaining() != std::uint64_t{n} * (d + t) * sizeof(float)) {
    throw FormatError("size mismatch in " + path.string());
  }
  std::vector<AttackSample> out(n);
  std::vector<float> target(t);
  for (auto& s : out) {
    s.features.resize(d);
    cur.Read(std::span<float>(s.features));
    cur.Read(std::span<float>(target));
    s.target.assign(target.begin(), target.end());
  }
  return out;
}

void WriteAttackModel(const AttackModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  nn::WriteCheckpoint(out, model.mlp);
  binary_io::Put(out, static_cast<std::uint32_t>(model.standardizer.mean.size()));
  binary_io::Put(out, std::span<const float>(model.standardizer.mean));
  binary_io::Put(out, std::span<const float>(model.standardizer.stddev));
  binary_io::Put(out, static_cast<std::uint8_t>(model.degenerate));
  if (!out) throw IoError("write failed: " + path.string());
}

AttackModel ReadAttackModel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("missing file: " + path.string());
  AttackModel model;
  model.mlp = nn::ReadCheckpoint(in);
  std::vector<char> rest{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  binary_io::Cursor cur(std::move(rest), path.string());
  const auto d = cur.Read<std::uint32_t>();
  model.standardizer.mean.resize(d);
  model.standardizer.stddev.resize(d);
  cur.Read(std::span<float>(model.standardizer.mean));
  cur.Read(std::span<float>(model.standardizer.stddev));
  model.degenerate = cur.Read<std::uint8_t>() != 0;
  if (cur.remaining() != 0) throw FormatError("trailing bytes in " + path.string());
  if (model.mlp.layers.empty() || model.mlp.layers[0].in_dim() != d) {
    throw FormatError("standardizer length does not match the model in " + path.string());
  }
  return model;
}

}  // namespace fedlisting::attack
