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

// Numeric kernels for the two-layer client GNNs and the attack MLP.
//
// Every layer has a hand-written adjoint; there is no autodiff engine. The
// client model is always `layer1 -> ReLU -> layer2` with raw logits out:
//   GCN   H' = Ahat (H W) + b
//   SAGE  H' = [H || mean_{N(v)} H] W + b      (isolated node: zero mean)
//   GIN   H' = ReLU((H + A H) W + b)          (hidden layer only)
// The GIN output layer omits its internal ReLU so logits stay unconstrained.

#ifndef FEDLISTING_NNKERNELS_HPP_
#define FEDLISTING_NNKERNELS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedlisting/graphstore.hpp"
#include "fedlisting/tensor.hpp"

namespace fedlisting::nn {

enum class LayerKind : std::uint8_t { kGcn = 0, kSage = 1, kGin = 2, kDense = 3 };

enum class Architecture : std::uint8_t { kGcn, kSage, kGin, kMlp };

std::string_view ToString(Architecture arch);
// Accepts "gcn", "sage", "gin", "mlp" (case-insensitive).
Architecture ParseArchitecture(std::string_view name);

struct LayerParams {
  LayerKind kind = LayerKind::kDense;
  DenseMatrix weight;  // in_dim x out_dim; SAGE in_dim is 2x the embedding dim
  std::vector<float> bias;

  std::size_t in_dim() const { return weight.rows; }
  std::size_t out_dim() const { return weight.cols; }
  bool operator==(const LayerParams&) const = default;
};

// Also used to carry gradients and parameter deltas of identical shape.
struct ModelParams {
  Architecture arch = Architecture::kGcn;
  std::vector<LayerParams> layers;

  std::size_t ParameterCount() const;
  std::size_t output_dim() const { return layers.back().out_dim(); }
  bool SameShape(const ModelParams& other) const;
  // All-zero tensor set with this shape.
  ModelParams ZerosLike() const;
  bool operator==(const ModelParams&) const = default;
};

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
ModelParams InitGnn(Architecture arch, std::size_t in_dim, std::size_t hidden_dim,
                    std::size_t num_classes, std::uint64_t seed);
ModelParams InitMlp(std::size_t in_dim, std::span<const std::size_t> hidden,
                    std::size_t out_dim, std::uint64_t seed);

// Intermediates recorded by a forward pass. Tied to the exact parameter
// values it was computed with; a backward pass with different parameters is
// rejected.
class ForwardCache {
 public:
  bool valid() const { return valid_; }

 private:
  friend struct CacheAccess;
  bool valid_ = false;
  std::uint64_t param_digest_ = 0;
  Architecture arch_ = Architecture::kGcn;
  const graphstore::Graph* graph_ = nullptr;
  const graphstore::NormalizedAdjacency* ahat_ = nullptr;
  const DenseMatrix* input_ = nullptr;     // first-layer input (not owned)
  std::vector<DenseMatrix> layer_inputs_;  // index 0 unused when input_ set
  std::vector<DenseMatrix> aggregated_;    // per layer, kind-specific
  std::vector<DenseMatrix> pre_activation_;
  std::size_t rows_ = 0;
};

struct ForwardResult {
  DenseMatrix logits;
  ForwardCache cache;
};

// `ahat` must be NormalizeAdjacency(g) for GCN; it is ignored otherwise. The
// graph and ahat must outlive the returned cache.
ForwardResult GnnForward(const ModelParams& params, const graphstore::Graph& g,
                         const graphstore::NormalizedAdjacency& ahat);

// Exact gradients of the loss whose logit-gradient is `dlogits`.
ModelParams GnnBackward(const ModelParams& params, const ForwardCache& cache,
                        const DenseMatrix& dlogits);

// Dense stack `Linear -> ReLU -> ... -> Linear` on a batch of row vectors.
// `input` must outlive the cache.
ForwardResult MlpForward(const ModelParams& params, const DenseMatrix& input);
ModelParams MlpBackward(const ModelParams& params, const ForwardCache& cache,
                        const DenseMatrix& dout);

struct LossResult {
  double loss = 0.0;
  DenseMatrix dlogits;
};

// Mean over `mask` rows of -log softmax(logits_u)[labels_u]. Rows outside the
// mask get zero gradient.
LossResult SoftmaxCrossEntropy(const DenseMatrix& logits,
                               std::span<const std::uint32_t> labels,
                               std::span<const std::uint32_t> mask);

// Row-wise argmax, ties toward the lowest index.
std::vector<std::uint32_t> ArgmaxRows(const DenseMatrix& m);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<float>> first_moment;   // per tensor
  std::vector<std::vector<float>> second_moment;  // per tensor

  // Zero moments shaped like `params`.
  static AdamState For(const ModelParams& params, double learning_rate);
};

// One bias-corrected Adam update in place.
void AdamStep(ModelParams& params, const ModelParams& grads, AdamState& state);

// Last layer weight (row-major) followed by its bias.
std::vector<float> FlattenLastLayer(const ModelParams& params);
LayerParams UnflattenLayer(std::span<const float> flat, LayerKind kind,
                           std::size_t in_dim, std::size_t out_dim);
std::size_t LastLayerSize(const ModelParams& params);

// Every tensor in layer order (weight, bias, weight, bias, ...).
std::vector<float> FlattenAll(const ModelParams& params);
// Inverse of FlattenAll using `shape` for the layout.
ModelParams UnflattenAll(std::span<const float> flat, const ModelParams& shape);

// Length-prefixed binary checkpoint: u32 layer count, then per layer a kind
// byte, u32 in_dim, u32 out_dim, weights (f32 row-major), bias (f32).
void WriteCheckpoint(std::ostream& out, const ModelParams& params);
ModelParams ReadCheckpoint(std::istream& in);

}  // namespace fedlisting::nn

#endif  // FEDLISTING_NNKERNELS_HPP_
