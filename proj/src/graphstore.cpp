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

#include "fedlisting/graphstore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <cstring>

#include "binary_io.hpp"
#include "fedlisting/common.hpp"
#include "json.hpp"

namespace fedlisting {

bool CsrMatrix::Contains(std::size_t r, std::uint32_t c) const {
  const auto idx = RowIndices(r);
  return std::binary_search(idx.begin(), idx.end(), c);
}

namespace graphstore {
namespace {

using Edge = std::pair<std::uint32_t, std::uint32_t>;

// Symmetric CSR with sorted, unique column indices and no diagonal.
CsrMatrix BuildSymmetricCsr(std::size_t n, std::span<const Edge> edges) {
  std::vector<Edge> directed;
  directed.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    if (u == v) continue;
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  CsrMatrix m;
  m.rows = n;
  m.cols = n;
  m.row_ptr.assign(n + 1, 0);
  m.col_idx.reserve(directed.size());
  for (const auto& [u, v] : directed) {
    ++m.row_ptr[u + 1];
    m.col_idx.push_back(v);
  }
  for (std::size_t i = 0; i < n; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
  return m;
}

using binary_io::ReadArray;
using binary_io::ReadFile;
using binary_io::WriteArray;

}  // namespace

Graph Graph::FromEdges(DenseMatrix features, std::vector<std::uint32_t> labels,
                       std::size_t num_classes, std::span<const Edge> edges,
                       std::string name) {
  const std::size_t n = labels.size();
  if (features.rows != n) {
    throw ValidationError("feature rows (" + std::to_string(features.rows) +
                          ") != label count (" + std::to_string(n) + ")");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= num_classes) {
      throw ValidationError("label " + std::to_string(labels[i]) + " at node " +
                            std::to_string(i) + " >= num_classes " +
                            std::to_string(num_classes));
    }
  }
  for (const auto& [u, v] : edges) {
    if (u >= n || v >= n) {
      throw ValidationError("edge endpoint (" + std::to_string(u) + ", " +
                            std::to_string(v) + ") out of range for " +
                            std::to_string(n) + " nodes");
    }
  }
  Graph g;
  g.name_ = std::move(name);
  g.num_classes_ = num_classes;
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  g.adjacency_ = BuildSymmetricCsr(n, edges);
  return g;
}

std::vector<Edge> Graph::UndirectedEdges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (std::size_t u = 0; u < num_nodes(); ++u) {
    for (std::uint32_t v : adjacency_.RowIndices(u)) {
      if (u < v) out.emplace_back(static_cast<std::uint32_t>(u), v);
    }
  }
  return out;
}

void Graph::Validate() const {
  const std::size_t n = num_nodes();
  if (features_.rows != n) throw ValidationError("feature row count != num_nodes");
  if (adjacency_.rows != n || adjacency_.row_ptr.size() != n + 1) {
    throw ValidationError("adjacency shape != num_nodes");
  }
  for (std::size_t u = 0; u < n; ++u) {
    if (labels_[u] >= num_classes_) throw ValidationError("label out of range");
    for (std::uint32_t v : adjacency_.RowIndices(u)) {
      if (v == u) throw ValidationError("stored self-loop at " + std::to_string(u));
      if (v >= n || !adjacency_.Contains(v, static_cast<std::uint32_t>(u))) {
        throw ValidationError("asymmetric edge (" + std::to_string(u) + ", " +
                              std::to_string(v) + ")");
      }
    }
  }
}

NodeSubset NodeSubset::FromUnsorted(std::vector<std::uint32_t> nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return NodeSubset{std::move(nodes)};
}

void NodeSubset::Validate(std::size_t num_nodes) const {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= num_nodes) {
      throw ValidationError("node index " + std::to_string(indices[i]) +
                            " out of range");
    }
    if (i > 0 && indices[i] <= indices[i - 1]) {
      throw ValidationError("node subset not strictly increasing");
    }
  }
}

Graph LoadGraph(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  const std::vector<char> meta_bytes = ReadFile(meta_path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed " + meta_path.string() + ": " + e.what());
  }
  std::size_t n = 0, m = 0, d = 0, t = 0;
  std::string name;
  try {
    n = meta.at("num_nodes").get<std::size_t>();
    m = meta.at("num_edges").get<std::size_t>();
    d = meta.at("num_features").get<std::size_t>();
    t = meta.at("num_classes").get<std::size_t>();
    name = meta.value("name", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad field in " + meta_path.string() + ": " + e.what());
  }

  DenseMatrix features(n, d);
  features.values = ReadArray<float>(dir / "features.bin", n * d);
  std::vector<std::uint32_t> raw_edges = ReadArray<std::uint32_t>(dir / "edges.bin", 2 * m);
  std::vector<std::uint32_t> labels = ReadArray<std::uint32_t>(dir / "labels.bin", n);

  std::vector<Edge> edges(m);
  for (std::size_t i = 0; i < m; ++i) edges[i] = {raw_edges[2 * i], raw_edges[2 * i + 1]};
  return Graph::FromEdges(std::move(features), std::move(labels), t, edges, name);
}

void SaveGraph(const Graph& g, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const auto edges = g.UndirectedEdges();
  std::vector<std::uint32_t> flat;
  flat.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    flat.push_back(u);
    flat.push_back(v);
  }
  nlohmann::json meta = {{"num_nodes", g.num_nodes()},
                         {"num_edges", edges.size()},
                         {"num_features", g.num_features()},
                         {"num_classes", g.num_classes()},
                         {"name", g.name()}};
  {
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << "\n";
  }
  WriteArray<float>(dir / "features.bin", g.features().values);
  WriteArray<std::uint32_t>(dir / "edges.bin", flat);
  WriteArray<std::uint32_t>(dir / "labels.bin", g.labels());
}

NormalizedAdjacency NormalizeAdjacency(const Graph& g) {
  const CsrMatrix& a = g.adjacency();
  const std::size_t n = g.num_nodes();
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(a.RowLength(i) + 1));
  }
  CsrMatrix out;
  out.rows = n;
  out.cols = n;
  out.row_ptr.assign(n + 1, 0);
  out.col_idx.reserve(a.nnz() + n);
  out.values.reserve(a.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool diag_done = false;
    auto emit = [&](std::uint32_t j) {
      out.col_idx.push_back(j);
      out.values.push_back(static_cast<float>(inv_sqrt_deg[i] * inv_sqrt_deg[j]));
    };
    for (std::uint32_t j : a.RowIndices(i)) {
      if (!diag_done && j > i) {
        emit(static_cast<std::uint32_t>(i));
        diag_done = true;
      }
      emit(j);
    }
    if (!diag_done) emit(static_cast<std::uint32_t>(i));
    out.row_ptr[i + 1] = static_cast<std::uint32_t>(out.col_idx.size());
  }
  return NormalizedAdjacency{std::move(out)};
}

Graph InducedSubgraph(const Graph& g, const NodeSubset& s) {
  if (s.empty()) throw ValidationError("induced subgraph of empty node subset");
  s.Validate(g.num_nodes());
  const std::size_t k = s.size();
  std::vector<std::int64_t> remap(g.num_nodes(), -1);
  for (std::size_t i = 0; i < k; ++i) remap[s.indices[i]] = static_cast<std::int64_t>(i);

  DenseMatrix features(k, g.num_features());
  std::vector<std::uint32_t> labels(k);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint32_t u = s.indices[i];
    const auto src = g.features().row(u);
    std::copy(src.begin(), src.end(), features.row(i).begin());
    labels[i] = g.labels()[u];
    for (std::uint32_t v : g.adjacency().RowIndices(u)) {
      if (u < v && remap[v] >= 0) {
        edges.emplace_back(static_cast<std::uint32_t>(i),
                           static_cast<std::uint32_t>(remap[v]));
      }
    }
  }
  return Graph::FromEdges(std::move(features), std::move(labels), g.num_classes(),
                          edges, g.name());
}

Graph GenerateSbm(std::size_t num_nodes, std::size_t num_classes, double p_in,
                  double p_out, std::size_t feature_dim, std::uint64_t seed) {
  if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0)) {
    throw ValidationError("SBM requires 0 <= p_out <= p_in <= 1");
  }
  if (num_classes == 0 || num_nodes < num_classes) {
    throw ValidationError("SBM requires num_nodes >= num_classes >= 1");
  }
  if (feature_dim == 0) throw ValidationError("SBM requires feature_dim >= 1");

  Rng rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_real_distribution<float> noise(0.0f, 0.1f);

  std::vector<std::uint32_t> labels(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    labels[i] = static_cast<std::uint32_t>(i % num_classes);
  }
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < num_nodes; ++u) {
    for (std::size_t v = u + 1; v < num_nodes; ++v) {
      const double p = labels[u] == labels[v] ? p_in : p_out;
      // Always draw so the stream layout is independent of p.
      if (coin(rng) < p) {
        edges.emplace_back(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
      }
    }
  }
  DenseMatrix features(num_nodes, feature_dim);
  for (std::size_t u = 0; u < num_nodes; ++u) {
    for (std::size_t j = 0; j < feature_dim; ++j) features.at(u, j) = noise(rng);
    features.at(u, labels[u] % feature_dim) += 1.0f;
  }
  return Graph::FromEdges(std::move(features), std::move(labels), num_classes, edges,
                          "sbm");
}

}  // namespace graphstore
}  // namespace fedlisting
