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

// In-process horizontal federation: broadcast, local training, FedAvg, and
// the server-side record of every client's last-layer delta per round.
//
// On-disk run layout:
//   gradients.bin    u32 clients, u32 rounds, u32 vec_len, then per client
//                    rounds x vec_len float32
//   labels_dist.csv  client_id,p0,...,p{T-1}
//   accuracy.csv     round,accuracy

#ifndef FEDLISTING_FEDERATION_HPP_
#define FEDLISTING_FEDERATION_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fedlisting/defenses.hpp"
#include "fedlisting/graphstore.hpp"
#include "fedlisting/nnkernels.hpp"
#include "fedlisting/partitioning.hpp"

namespace fedlisting::federation {

using partition::LabelDistribution;

struct ClientState {
  std::uint32_t id = 0;
  graphstore::Graph graph;
  graphstore::NormalizedAdjacency ahat;
  // Local indices of the labeled nodes that define the training loss.
  std::vector<std::uint32_t> labeled;
  LabelDistribution distribution;
  nn::ModelParams params;

  std::size_t num_samples() const { return labeled.size(); }

  // Client owning the induced subgraph on `nodes`, every node labeled.
  static ClientState Make(std::uint32_t id, const graphstore::Graph& parent,
                          const graphstore::NodeSubset& nodes);
};

// Held-out nodes scored after every round.
struct EvalSet {
  graphstore::Graph graph;
  graphstore::NormalizedAdjacency ahat;
  std::vector<std::uint32_t> mask;

  // Induced subgraph on `nodes`; the mask selects the `test` members
  // (a subset of `nodes`) in local indices.
  static EvalSet Make(const graphstore::Graph& parent, const graphstore::NodeSubset& nodes,
                      const graphstore::NodeSubset& test);
};

struct TrainingConfig {
  nn::Architecture arch = nn::Architecture::kGcn;
  std::size_t hidden_dim = 16;
  std::size_t rounds = 50;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  defense::DefenseConfig defense;
  std::uint64_t seed = 0;
  // Train clients of one round on the worker pool.
  bool parallel_clients = true;

  void Validate() const;
};

struct GradientRecord {
  std::uint32_t client_id = 0;
  // One flattened last-layer delta per round.
  std::vector<std::vector<float>> rounds;

  bool operator==(const GradientRecord&) const = default;
};

struct FedRunResult {
  nn::ModelParams global;
  std::vector<double> accuracy;  // per round; empty without an EvalSet
  std::vector<GradientRecord> records;
  std::vector<LabelDistribution> distributions;

  bool operator==(const FedRunResult&) const = default;
};

struct LocalUpdate {
  // Parameters the server receives (defended when a defense is active).
  nn::ModelParams uploaded;
  // flatten_last(global) - flatten_last(uploaded).
  std::vector<float> delta;
};

// Resets the client to `global`, runs `epochs` of shuffled mini-batch Adam
// with a fresh optimizer state, then applies `defense` to the whole update
// (global - trained) before upload. Message passing always spans the full
// client subgraph; batches only select the loss rows.
LocalUpdate LocalTrain(ClientState& client, const nn::ModelParams& global, std::size_t epochs,
                       std::size_t batch_size, double learning_rate,
                       const defense::DefenseConfig& defense, std::uint64_t seed);

// Sum_k w_k theta_k / Sum_k w_k per entry, accumulated in double.
nn::ModelParams FedAvg(std::span<const nn::ModelParams> updates, std::span<const double> weights);

// Global init from the run seed, then per round: broadcast, local training
// (client seeds derived from (seed, client id, round)), delta recording and
// sample-weighted FedAvg. Scores `eval` after every round when given.
FedRunResult RunFederation(std::vector<ClientState>& clients, const TrainingConfig& cfg,
                           const EvalSet* eval = nullptr);

// Fraction of `mask` rows whose argmax logit (ties toward the lower class)
// matches the label.
double Evaluate(const nn::ModelParams& params, const graphstore::Graph& g,
                const graphstore::NormalizedAdjacency& ahat, std::span<const std::uint32_t> mask);
double Evaluate(const nn::ModelParams& params, const graphstore::Graph& g,
                std::span<const std::uint32_t> mask);

// Writes gradients.bin, labels_dist.csv, accuracy.csv and global.ckpt.
void WriteFedRun(const FedRunResult& result, const std::filesystem::path& dir);
FedRunResult ReadFedRun(const std::filesystem::path& dir);

}  // namespace fedlisting::federation

#endif  // FEDLISTING_FEDERATION_HPP_
