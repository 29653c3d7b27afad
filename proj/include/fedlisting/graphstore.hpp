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

// Graph representation and the on-disk dataset directory format.
//
// A dataset directory holds four files, all little-endian:
//   meta.json     {num_nodes, num_edges, num_features, num_classes, name}
//   features.bin  num_nodes x num_features float32, row-major
//   edges.bin     num_edges (u32, u32) pairs, one direction per edge
//   labels.bin    num_nodes u32
// The loader symmetrizes edges, drops self-loops and collapses duplicates.

#ifndef FEDLISTING_GRAPHSTORE_HPP_
#define FEDLISTING_GRAPHSTORE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedlisting/tensor.hpp"

namespace fedlisting::graphstore {

// Node features, symmetric unit-weight adjacency without stored self-loops,
// and one class label per node. Immutable once built.
class Graph {
 public:
  Graph() = default;

  // Builds from an undirected edge list. Edges are symmetrized, self-loops
  // dropped and duplicates collapsed. Throws ValidationError on any endpoint
  // or label out of range, or a feature row count that differs from
  // num_nodes.
  static Graph FromEdges(DenseMatrix features, std::vector<std::uint32_t> labels,
                         std::size_t num_classes,
                         std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                         std::string name = "");

  std::size_t num_nodes() const { return labels_.size(); }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_features() const { return features_.cols; }
  // Undirected edge count (half the stored CSR entries).
  std::size_t num_edges() const { return adjacency_.nnz() / 2; }
  const std::string& name() const { return name_; }

  const DenseMatrix& features() const { return features_; }
  const CsrMatrix& adjacency() const { return adjacency_; }
  const std::vector<std::uint32_t>& labels() const { return labels_; }

  // One (u, v) pair with u < v per undirected edge, sorted.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> UndirectedEdges() const;

  // Re-checks symmetry, absence of self-loops and label range.
  void Validate() const;

 private:
  std::string name_;
  std::size_t num_classes_ = 0;
  DenseMatrix features_;
  CsrMatrix adjacency_;
  std::vector<std::uint32_t> labels_;
};

// Sorted, unique node indices into a parent graph.
struct NodeSubset {
  std::vector<std::uint32_t> indices;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }

  // Sorts and deduplicates.
  static NodeSubset FromUnsorted(std::vector<std::uint32_t> nodes);
  // Throws ValidationError unless strictly increasing and below num_nodes.
  void Validate(std::size_t num_nodes) const;

  bool operator==(const NodeSubset&) const = default;
};

// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
struct NormalizedAdjacency {
  CsrMatrix matrix;
};

Graph LoadGraph(const std::filesystem::path& dir);
void SaveGraph(const Graph& g, const std::filesystem::path& dir);

NormalizedAdjacency NormalizeAdjacency(const Graph& g);

// Subgraph over s relabelled 0..|s|-1 in sorted order, keeping only edges
// with both endpoints in s.
Graph InducedSubgraph(const Graph& g, const NodeSubset& s);

// Stochastic block model with round-robin class assignment. Features are the
// one-hot class signal plus uniform noise in [0, 0.1). Deterministic in seed.
Graph GenerateSbm(std::size_t num_nodes, std::size_t num_classes, double p_in,
                  double p_out, std::size_t feature_dim, std::uint64_t seed);

}  // namespace fedlisting::graphstore

#endif  // FEDLISTING_GRAPHSTORE_HPP_
