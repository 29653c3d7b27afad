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

#include "fedlisting/nnkernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <random>

#include "fedlisting/common.hpp"

namespace fedlisting::nn {

struct CacheAccess {
  static bool& valid(ForwardCache& c) { return c.valid_; }
  static std::uint64_t& digest(ForwardCache& c) { return c.param_digest_; }
  static Architecture& arch(ForwardCache& c) { return c.arch_; }
  static const graphstore::Graph*& graph(ForwardCache& c) { return c.graph_; }
  static const graphstore::NormalizedAdjacency*& ahat(ForwardCache& c) { return c.ahat_; }
  static const DenseMatrix*& input(ForwardCache& c) { return c.input_; }
  static std::vector<DenseMatrix>& inputs(ForwardCache& c) { return c.layer_inputs_; }
  static std::vector<DenseMatrix>& agg(ForwardCache& c) { return c.aggregated_; }
  static std::vector<DenseMatrix>& pre(ForwardCache& c) { return c.pre_activation_; }
  static std::size_t& rows(ForwardCache& c) { return c.rows_; }
  static bool valid(const ForwardCache& c) { return c.valid_; }
  static std::uint64_t digest(const ForwardCache& c) { return c.param_digest_; }
  static Architecture arch(const ForwardCache& c) { return c.arch_; }
  static const graphstore::Graph* graph(const ForwardCache& c) { return c.graph_; }
  static const graphstore::NormalizedAdjacency* ahat(const ForwardCache& c) {
    return c.ahat_;
  }
  static const DenseMatrix* input(const ForwardCache& c) { return c.input_; }
  static const std::vector<DenseMatrix>& inputs(const ForwardCache& c) {
    return c.layer_inputs_;
  }
  static const std::vector<DenseMatrix>& agg(const ForwardCache& c) { return c.aggregated_; }
  static const std::vector<DenseMatrix>& pre(const ForwardCache& c) {
    return c.pre_activation_;
  }
  static std::size_t rows(const ForwardCache& c) { return c.rows_; }
};

namespace {

using graphstore::Graph;
using graphstore::NormalizedAdjacency;

std::uint64_t ParamDigest(const ModelParams& p) {
  std::uint64_t h = Mix64(static_cast<std::uint64_t>(p.arch) + 1);
  auto absorb = [&h](std::span<const float> xs) {
    for (float x : xs) {
      std::uint32_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      h = Mix64(h ^ bits);
    }
  };
  for (const auto& layer : p.layers) {
    h = Mix64(h ^ (layer.in_dim() << 20) ^ layer.out_dim());
    absorb(layer.weight.values);
    absorb(layer.bias);
  }
  return h;
}

// out = a * b. Zero entries of `a` are skipped, which makes sparse bag-of-words
// inputs cheap without a separate sparse path.
DenseMatrix MatMul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows, b.cols);
  const std::size_t m = b.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    float* o = out.values.data() + i * m;
    const float* ar = a.values.data() + i * a.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const float s = ar[k];
      if (s == 0.0f) continue;
      const float* br = b.values.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += s * br[j];
    }
  }
  return out;
}

// out = a^T * b, with a: n x p, b: n x m.
DenseMatrix MatMulTransA(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.cols, b.cols);
  const std::size_t m = b.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const float* ar = a.values.data() + i * a.cols;
    const float* br = b.values.data() + i * m;
    for (std::size_t p = 0; p < a.cols; ++p) {
      const float s = ar[p];
      if (s == 0.0f) continue;
      float* o = out.values.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += s * br[j];
    }
  }
  return out;
}

// out = a * b^T, with a: n x m, b: p x m.
DenseMatrix MatMulTransB(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const float* ar = a.values.data() + i * a.cols;
    for (std::size_t p = 0; p < b.rows; ++p) {
      const float* br = b.values.data() + p * b.cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < a.cols; ++j) acc += static_cast<double>(ar[j]) * br[j];
      out.at(i, p) = static_cast<float>(acc);
    }
  }
  return out;
}

void AddBias(DenseMatrix& z, std::span<const float> bias) {
  for (std::size_t i = 0; i < z.rows; ++i) {
    float* r = z.values.data() + i * z.cols;
    for (std::size_t j = 0; j < z.cols; ++j) r[j] += bias[j];
  }
}

std::vector<float> ColumnSums(const DenseMatrix& m) {
  std::vector<double> acc(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const float* r = m.values.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) acc[j] += r[j];
  }
  return {acc.begin(), acc.end()};
}

DenseMatrix Relu(const DenseMatrix& z) {
  DenseMatrix out = z;
  for (float& v : out.values) v = v > 0.0f ? v : 0.0f;
  return out;
}

// grad *= (pre > 0)
void ReluBackwardInPlace(DenseMatrix& grad, const DenseMatrix& pre) {
  for (std::size_t i = 0; i < grad.values.size(); ++i) {
    if (!(pre.values[i] > 0.0f)) grad.values[i] = 0.0f;
  }
}

// out = S * h for a weighted CSR S.
DenseMatrix SpMM(const CsrMatrix& s, const DenseMatrix& h) {
  DenseMatrix out(s.rows, h.cols);
  const std::size_t m = h.cols;
  for (std::size_t i = 0; i < s.rows; ++i) {
    std::vector<double> acc(m, 0.0);
    const auto idx = s.RowIndices(i);
    const auto val = s.RowValues(i);
    for (std::size_t e = 0; e < idx.size(); ++e) {
      const float* hr = h.values.data() + idx[e] * m;
      for (std::size_t j = 0; j < m; ++j) acc[j] += static_cast<double>(val[e]) * hr[j];
    }
    for (std::size_t j = 0; j < m; ++j) out.at(i, j) = static_cast<float>(acc[j]);
  }
  return out;
}

// out = (A + I) h for the unit-weight symmetric adjacency A.
DenseMatrix SumSelfAndNeighbors(const CsrMatrix& a, const DenseMatrix& h) {
  DenseMatrix out(a.rows, h.cols);
  const std::size_t m = h.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    std::vector<double> acc(h.values.begin() + i * m, h.values.begin() + (i + 1) * m);
    for (std::uint32_t nb : a.RowIndices(i)) {
      const float* hr = h.values.data() + nb * m;
      for (std::size_t j = 0; j < m; ++j) acc[j] += hr[j];
    }
    for (std::size_t j = 0; j < m; ++j) out.at(i, j) = static_cast<float>(acc[j]);
  }
  return out;
}

// [H || D^{-1} A H]; isolated nodes get a zero neighbor mean.
DenseMatrix ConcatNeighborMean(const CsrMatrix& a, const DenseMatrix& h) {
  const std::size_t m = h.cols;
  DenseMatrix out(h.rows, 2 * m);
  for (std::size_t i = 0; i < h.rows; ++i) {
    std::copy_n(h.values.data() + i * m, m, out.values.data() + i * 2 * m);
    const auto nbrs = a.RowIndices(i);
    if (nbrs.empty()) continue;
    std::vector<double> acc(m, 0.0);
    for (std::uint32_t nb : nbrs) {
      const float* hr = h.values.data() + nb * m;
      for (std::size_t j = 0; j < m; ++j) acc[j] += hr[j];
    }
    const double inv = 1.0 / static_cast<double>(nbrs.size());
    float* dst = out.values.data() + i * 2 * m + m;
    for (std::size_t j = 0; j < m; ++j) dst[j] = static_cast<float>(acc[j] * inv);
  }
  return out;
}

// Adjoint of ConcatNeighborMean: dH = dC[:, :m] + (D^{-1} A)^T dC[:, m:].
DenseMatrix ConcatNeighborMeanBackward(const CsrMatrix& a, const DenseMatrix& dc) {
  const std::size_t m = dc.cols / 2;
  std::vector<double> acc(dc.rows * m, 0.0);
  for (std::size_t i = 0; i < dc.rows; ++i) {
    const float* self = dc.values.data() + i * dc.cols;
    for (std::size_t j = 0; j < m; ++j) acc[i * m + j] += self[j];
    const auto nbrs = a.RowIndices(i);
    if (nbrs.empty()) continue;
    const double inv = 1.0 / static_cast<double>(nbrs.size());
    const float* mean_grad = self + m;
    for (std::uint32_t nb : nbrs) {
      double* dst = acc.data() + nb * m;
      for (std::size_t j = 0; j < m; ++j) dst[j] += inv * mean_grad[j];
    }
  }
  DenseMatrix out(dc.rows, m);
  for (std::size_t k = 0; k < acc.size(); ++k) out.values[k] = static_cast<float>(acc[k]);
  return out;
}

void CheckLayerInput(const LayerParams& layer, std::size_t input_cols, std::size_t index) {
  const std::size_t expected =
      layer.kind == LayerKind::kSage ? 2 * input_cols : input_cols;
  if (layer.in_dim() != expected || layer.bias.size() != layer.out_dim()) {
    throw ValidationError("layer " + std::to_string(index) + " expects in_dim " +
                          std::to_string(layer.in_dim()) + " but input has " +
                          std::to_string(input_cols) + " columns");
  }
}

LayerParams MakeLayer(LayerKind kind, std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  LayerParams layer;
  layer.kind = kind;
  layer.weight = DenseMatrix(in_dim, out_dim);
  layer.bias.assign(out_dim, 0.0f);
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (float& w : layer.weight.values) w = static_cast<float>(dist(rng));
  return layer;
}

LayerKind KindFor(Architecture arch) {
  switch (arch) {
    case Architecture::kGcn: return LayerKind::kGcn;
    case Architecture::kSage: return LayerKind::kSage;
    case Architecture::kGin: return LayerKind::kGin;
    case Architecture::kMlp: return LayerKind::kDense;
  }
  return LayerKind::kDense;
}

template <typename T>
void WritePod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T ReadPod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("truncated checkpoint");
  return v;
}

}  // namespace

std::string_view ToString(Architecture arch) {
  switch (arch) {
    case Architecture::kGcn: return "gcn";
    case Architecture::kSage: return "sage";
    case Architecture::kGin: return "gin";
    case Architecture::kMlp: return "mlp";
  }
  return "unknown";
}

Architecture ParseArchitecture(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "gcn") return Architecture::kGcn;
  if (lower == "sage" || lower == "graphsage") return Architecture::kSage;
  if (lower == "gin") return Architecture::kGin;
  if (lower == "mlp") return Architecture::kMlp;
  throw ValidationError("unknown architecture: " + std::string(name));
}

std::size_t ModelParams::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.values.size() + l.bias.size();
  return n;
}

bool ModelParams::SameShape(const ModelParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.kind != b.kind || a.in_dim() != b.in_dim() || a.out_dim() != b.out_dim() ||
        a.bias.size() != b.bias.size()) {
      return false;
    }
  }
  return true;
}

ModelParams ModelParams::ZerosLike() const {
  ModelParams z = *this;
  for (auto& l : z.layers) {
    std::fill(l.weight.values.begin(), l.weight.values.end(), 0.0f);
    std::fill(l.bias.begin(), l.bias.end(), 0.0f);
  }
  return z;
}

ModelParams InitGnn(Architecture arch, std::size_t in_dim, std::size_t hidden_dim,
                    std::size_t num_classes, std::uint64_t seed) {
  if (arch == Architecture::kMlp) throw ValidationError("InitGnn needs a GNN architecture");
  if (in_dim == 0 || hidden_dim == 0 || num_classes == 0) {
    throw ValidationError("InitGnn dims must be positive");
  }
  Rng rng(seed);
  const LayerKind kind = KindFor(arch);
  const std::size_t widen = kind == LayerKind::kSage ? 2 : 1;
  ModelParams p;
  p.arch = arch;
  p.layers.push_back(MakeLayer(kind, widen * in_dim, hidden_dim, rng));
  p.layers.push_back(MakeLayer(kind, widen * hidden_dim, num_classes, rng));
  return p;
}

ModelParams InitMlp(std::size_t in_dim, std::span<const std::size_t> hidden,
                    std::size_t out_dim, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams p;
  p.arch = Architecture::kMlp;
  std::size_t prev = in_dim;
  for (std::size_t h : hidden) {
    p.layers.push_back(MakeLayer(LayerKind::kDense, prev, h, rng));
    prev = h;
  }
  p.layers.push_back(MakeLayer(LayerKind::kDense, prev, out_dim, rng));
  return p;
}

ForwardResult GnnForward(const ModelParams& params, const Graph& g,
                         const NormalizedAdjacency& ahat) {
  if (params.arch == Architecture::kMlp || params.layers.empty()) {
    throw ValidationError("GnnForward needs GNN parameters");
  }
  if (params.arch == Architecture::kGcn && ahat.matrix.rows != g.num_nodes()) {
    throw ValidationError("normalized adjacency does not match graph");
  }
  ForwardResult result;
  ForwardCache& c = result.cache;
  using A = CacheAccess;
  A::arch(c) = params.arch;
  A::graph(c) = &g;
  A::ahat(c) = &ahat;
  A::input(c) = &g.features();
  A::rows(c) = g.num_nodes();
  const std::size_t num_layers = params.layers.size();
  A::inputs(c).resize(num_layers);
  A::agg(c).resize(num_layers);
  A::pre(c).resize(num_layers);

  const CsrMatrix& adj = g.adjacency();
  const DenseMatrix* h = &g.features();
  DenseMatrix activated;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const LayerParams& layer = params.layers[l];
    CheckLayerInput(layer, h->cols, l);
    DenseMatrix z;
    switch (layer.kind) {
      case LayerKind::kGcn:
        z = SpMM(ahat.matrix, MatMul(*h, layer.weight));
        break;
      case LayerKind::kSage:
        A::agg(c)[l] = ConcatNeighborMean(adj, *h);
        z = MatMul(A::agg(c)[l], layer.weight);
        break;
      case LayerKind::kGin:
        A::agg(c)[l] = SumSelfAndNeighbors(adj, *h);
        z = MatMul(A::agg(c)[l], layer.weight);
        break;
      case LayerKind::kDense:
        throw ValidationError("dense layer inside a GNN");
    }
    AddBias(z, layer.bias);
    A::pre(c)[l] = z;
    const bool last = l + 1 == num_layers;
    if (last) {
      result.logits = std::move(z);
    } else {
      // Hidden GIN layers already end in ReLU; the inter-layer ReLU is then
      // idempotent, so one activation covers both.
      activated = Relu(z);
      A::inputs(c)[l + 1] = activated;
      h = &A::inputs(c)[l + 1];
    }
  }
  A::digest(c) = ParamDigest(params);
  A::valid(c) = true;
  return result;
}

ModelParams GnnBackward(const ModelParams& params, const ForwardCache& cache,
                        const DenseMatrix& dlogits) {
  using A = CacheAccess;
  if (!A::valid(cache) || A::arch(cache) == Architecture::kMlp) {
    throw ContractError("GnnBackward called without a matching forward cache");
  }
  if (A::arch(cache) != params.arch || A::digest(cache) != ParamDigest(params)) {
    throw ContractError("stale forward cache: parameters changed since forward");
  }
  if (dlogits.rows != A::rows(cache) || dlogits.cols != params.output_dim()) {
    throw ValidationError("dlogits shape does not match forward output");
  }
  const Graph& g = *A::graph(cache);
  const CsrMatrix& adj = g.adjacency();
  ModelParams grads = params.ZerosLike();
  DenseMatrix dz = dlogits;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const LayerParams& layer = params.layers[l];
    const DenseMatrix& h = l == 0 ? *A::input(cache) : A::inputs(cache)[l];
    if (l + 1 < params.layers.size()) ReluBackwardInPlace(dz, A::pre(cache)[l]);
    grads.layers[l].bias = ColumnSums(dz);
    const bool need_input_grad = l > 0;
    DenseMatrix dh;
    switch (layer.kind) {
      case LayerKind::kGcn: {
        // Ahat is symmetric, so its adjoint is itself.
        DenseMatrix dhw = SpMM(A::ahat(cache)->matrix, dz);
        grads.layers[l].weight = MatMulTransA(h, dhw);
        if (need_input_grad) dh = MatMulTransB(dhw, layer.weight);
        break;
      }
      case LayerKind::kSage: {
        grads.layers[l].weight = MatMulTransA(A::agg(cache)[l], dz);
        if (need_input_grad) {
          dh = ConcatNeighborMeanBackward(adj, MatMulTransB(dz, layer.weight));
        }
        break;
      }
      case LayerKind::kGin: {
        grads.layers[l].weight = MatMulTransA(A::agg(cache)[l], dz);
        if (need_input_grad) {
          dh = SumSelfAndNeighbors(adj, MatMulTransB(dz, layer.weight));
        }
        break;
      }
      case LayerKind::kDense:
        throw ContractError("dense layer inside a GNN");
    }
    dz = std::move(dh);
  }
  return grads;
}

ForwardResult MlpForward(const ModelParams& params, const DenseMatrix& input) {
  if (params.arch != Architecture::kMlp || params.layers.empty()) {
    throw ValidationError("MlpForward needs MLP parameters");
  }
  ForwardResult result;
  ForwardCache& c = result.cache;
  using A = CacheAccess;
  A::arch(c) = Architecture::kMlp;
  A::input(c) = &input;
  A::rows(c) = input.rows;
  const std::size_t num_layers = params.layers.size();
  A::inputs(c).resize(num_layers);
  A::pre(c).resize(num_layers);
  const DenseMatrix* h = &input;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const LayerParams& layer = params.layers[l];
    CheckLayerInput(layer, h->cols, l);
    DenseMatrix z = MatMul(*h, layer.weight);
    AddBias(z, layer.bias);
    if (l + 1 == num_layers) {
      result.logits = std::move(z);
    } else {
      A::inputs(c)[l + 1] = Relu(z);
      A::pre(c)[l] = std::move(z);
      h = &A::inputs(c)[l + 1];
    }
  }
  A::digest(c) = ParamDigest(params);
  A::valid(c) = true;
  return result;
}

ModelParams MlpBackward(const ModelParams& params, const ForwardCache& cache,
                        const DenseMatrix& dout) {
  using A = CacheAccess;
  if (!A::valid(cache) || A::arch(cache) != Architecture::kMlp) {
    throw ContractError("MlpBackward called without a matching forward cache");
  }
  if (A::digest(cache) != ParamDigest(params)) {
    throw ContractError("stale forward cache: parameters changed since forward");
  }
  if (dout.rows != A::rows(cache) || dout.cols != params.output_dim()) {
    throw ValidationError("output gradient shape does not match forward output");
  }
  ModelParams grads = params.ZerosLike();
  DenseMatrix dz = dout;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    if (l + 1 < params.layers.size()) ReluBackwardInPlace(dz, A::pre(cache)[l]);
    const DenseMatrix& h = l == 0 ? *A::input(cache) : A::inputs(cache)[l];
    grads.layers[l].bias = ColumnSums(dz);
    grads.layers[l].weight = MatMulTransA(h, dz);
    if (l > 0) dz = MatMulTransB(dz, params.layers[l].weight);
  }
  return grads;
}

LossResult SoftmaxCrossEntropy(const DenseMatrix& logits,
                               std::span<const std::uint32_t> labels,
                               std::span<const std::uint32_t> mask) {
  if (mask.empty()) throw ValidationError("cross-entropy over an empty mask");
  if (labels.size() != logits.rows) {
    throw ValidationError("label count does not match logit rows");
  }
  LossResult r;
  r.dlogits = DenseMatrix(logits.rows, logits.cols);
  const double inv_count = 1.0 / static_cast<double>(mask.size());
  const std::size_t t = logits.cols;
  std::vector<double> p(t);
  double total = 0.0;
  for (std::uint32_t u : mask) {
    if (u >= logits.rows) throw ValidationError("mask index out of range");
    const std::uint32_t y = labels[u];
    if (y >= t) throw ValidationError("label out of range");
    const auto row = logits.row(u);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < t; ++j) {
      p[j] = std::exp(static_cast<double>(row[j]) - mx);
      sum += p[j];
    }
    total += -((static_cast<double>(row[y]) - mx) - std::log(sum));
    auto drow = r.dlogits.row(u);
    for (std::size_t j = 0; j < t; ++j) {
      const double grad = p[j] / sum - (j == y ? 1.0 : 0.0);
      drow[j] = static_cast<float>(grad * inv_count);
    }
  }
  r.loss = total * inv_count;
  return r;
}

std::vector<std::uint32_t> ArgmaxRows(const DenseMatrix& m) {
  std::vector<std::uint32_t> out(m.rows, 0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const auto row = m.row(i);
    out[i] = static_cast<std::uint32_t>(std::max_element(row.begin(), row.end()) -
                                        row.begin());
  }
  return out;
}

AdamState AdamState::For(const ModelParams& params, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (const auto& l : params.layers) {
    s.first_moment.emplace_back(l.weight.values.size(), 0.0f);
    s.first_moment.emplace_back(l.bias.size(), 0.0f);
  }
  s.second_moment = s.first_moment;
  return s;
}

void AdamStep(ModelParams& params, const ModelParams& grads, AdamState& state) {
  if (!params.SameShape(grads) || state.first_moment.size() != 2 * params.layers.size()) {
    throw ValidationError("Adam step with mismatched shapes");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double corr1 = 1.0 - std::pow(state.beta1, t);
  const double corr2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](std::span<float> theta, std::span<const float> g, std::vector<float>& m,
                    std::vector<float>& v) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i];
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double step = state.learning_rate * (mi / corr1) / (std::sqrt(vi / corr2) + state.eps);
      theta[i] = static_cast<float>(theta[i] - step);
    }
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight.values, grads.layers[l].weight.values,
           state.first_moment[2 * l], state.second_moment[2 * l]);
    update(params.layers[l].bias, grads.layers[l].bias, state.first_moment[2 * l + 1],
           state.second_moment[2 * l + 1]);
  }
}

std::size_t LastLayerSize(const ModelParams& params) {
  const auto& last = params.layers.back();
  return last.weight.values.size() + last.bias.size();
}

std::vector<float> FlattenLastLayer(const ModelParams& params) {
  if (params.layers.empty()) throw ValidationError("model has no layers");
  const auto& last = params.layers.back();
  std::vector<float> out;
  out.reserve(LastLayerSize(params));
  out.insert(out.end(), last.weight.values.begin(), last.weight.values.end());
  out.insert(out.end(), last.bias.begin(), last.bias.end());
  return out;
}

LayerParams UnflattenLayer(std::span<const float> flat, LayerKind kind, std::size_t in_dim,
                           std::size_t out_dim) {
  if (flat.size() != in_dim * out_dim + out_dim) {
    throw ValidationError("flattened layer has wrong length");
  }
  LayerParams layer;
  layer.kind = kind;
  layer.weight = DenseMatrix(in_dim, out_dim);
  std::copy_n(flat.begin(), in_dim * out_dim, layer.weight.values.begin());
  layer.bias.assign(flat.begin() + static_cast<std::ptrdiff_t>(in_dim * out_dim), flat.end());
  return layer;
}

std::vector<float> FlattenAll(const ModelParams& params) {
  std::vector<float> out;
  out.reserve(params.ParameterCount());
  for (const auto& l : params.layers) {
    out.insert(out.end(), l.weight.values.begin(), l.weight.values.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

ModelParams UnflattenAll(std::span<const float> flat, const ModelParams& shape) {
  if (flat.size() != shape.ParameterCount()) {
    throw ValidationError("flattened parameter vector has wrong length");
  }
  ModelParams out = shape;
  std::size_t pos = 0;
  for (auto& l : out.layers) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.weight.values.size(),
                l.weight.values.begin());
    pos += l.weight.values.size();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.bias.size(), l.bias.begin());
    pos += l.bias.size();
  }
  return out;
}

void WriteCheckpoint(std::ostream& out, const ModelParams& params) {
  WritePod(out, static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& l : params.layers) {
    WritePod(out, static_cast<std::uint8_t>(l.kind));
    WritePod(out, static_cast<std::uint32_t>(l.in_dim()));
    WritePod(out, static_cast<std::uint32_t>(l.out_dim()));
    out.write(reinterpret_cast<const char*>(l.weight.values.data()),
              static_cast<std::streamsize>(l.weight.values.size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(l.bias.data()),
              static_cast<std::streamsize>(l.bias.size() * sizeof(float)));
  }
  if (!out) throw IoError("checkpoint write failed");
}

ModelParams ReadCheckpoint(std::istream& in) {
  const auto count = ReadPod<std::uint32_t>(in);
  if (count == 0) throw FormatError("checkpoint has no layers");
  ModelParams p;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto kind_byte = ReadPod<std::uint8_t>(in);
    if (kind_byte > static_cast<std::uint8_t>(LayerKind::kDense)) {
      throw FormatError("unknown layer kind in checkpoint");
    }
    LayerParams l;
    l.kind = static_cast<LayerKind>(kind_byte);
    const auto in_dim = ReadPod<std::uint32_t>(in);
    const auto out_dim = ReadPod<std::uint32_t>(in);
    l.weight = DenseMatrix(in_dim, out_dim);
    l.bias.assign(out_dim, 0.0f);
    in.read(reinterpret_cast<char*>(l.weight.values.data()),
            static_cast<std::streamsize>(l.weight.values.size() * sizeof(float)));
    in.read(reinterpret_cast<char*>(l.bias.data()),
            static_cast<std::streamsize>(l.bias.size() * sizeof(float)));
    if (!in) throw FormatError("truncated checkpoint");
    p.layers.push_back(std::move(l));
  }
  switch (p.layers.front().kind) {
    case LayerKind::kGcn: p.arch = Architecture::kGcn; break;
    case LayerKind::kSage: p.arch = Architecture::kSage; break;
    case LayerKind::kGin: p.arch = Architecture::kGin; break;
    case LayerKind::kDense: p.arch = Architecture::kMlp; break;
  }
  return p;
}

}  // namespace fedlisting::nn
