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

// Train/auxiliary splits and client partitions with controlled label mixes.

#ifndef FEDLISTING_PARTITIONING_HPP_
#define FEDLISTING_PARTITIONING_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedlisting/graphstore.hpp"

namespace fedlisting::partition {

using graphstore::NodeSubset;

// Per-class proportions; nonnegative and summing to one.
using LabelDistribution = std::vector<double>;

// Throws ValidationError unless d has length num_classes, no negative entry
// and sums to 1 within 1e-6.
void ValidateSimplex(std::span<const double> d, std::size_t num_classes);

// counts / total over a list of class labels.
LabelDistribution ComputeLabelDistribution(std::span<const std::uint32_t> labels,
                                           std::size_t num_classes);
// Same, for the labels of `subset` inside a parent label vector.
LabelDistribution DistributionOf(const NodeSubset& subset,
                                 std::span<const std::uint32_t> labels,
                                 std::size_t num_classes);

enum class Strategy : std::uint8_t { kEqual, kRandom, kSingleClass, kMissingClass };

std::string_view ToString(Strategy s);
// "equal", "random", "single_class", "missing_class".
Strategy ParseStrategy(std::string_view name);

struct PartitionPlan {
  Strategy strategy = Strategy::kRandom;
  std::size_t num_clients = 10;
  // Clients 0..m-1 follow the strategy; the rest are RANDOM.
  std::size_t special_clients = 1;
  std::uint64_t seed = 0;

  void Validate() const;
};

enum class Scenario : std::uint8_t {
  kEqualProportion,
  kRandomSplit,
  kOneClassMissing,
  kSingleClassOnly,
  kOneClassDominant,
};

std::string_view ToString(Scenario s);
// "equal_proportion", "random_split", "one_class_missing",
// "single_class_only", "one_class_dominant".
Scenario ParseScenario(std::string_view name);

struct ScenarioSpec {
  Scenario scenario = Scenario::kEqualProportion;
  // Missing / single / dominant class. Unset draws one uniformly.
  std::optional<std::uint32_t> chosen_class;
  // Share of the dominant class.
  double dominance = 0.5;
  // Apply the scenario to every client instead of the target only.
  bool all_clients = false;

  void Validate(std::size_t num_classes) const;
};

// Disjoint client node sets (parent-graph indices) and their realized label
// distributions.
struct ClientPartition {
  std::vector<NodeSubset> clients;
  std::vector<LabelDistribution> distributions;
};

struct TrainAuxSplit {
  NodeSubset train;
  NodeSubset aux;
};

// Stratified split of all nodes. The aux total is round(aux_fraction * N)
// apportioned over classes by largest remainder, so each class is within one
// node of the exact fraction. Throws ValidationError when a class would end
// up empty on either side.
TrainAuxSplit SplitTrainAux(std::span<const std::uint32_t> labels, std::size_t num_classes,
                            double aux_fraction, std::uint64_t seed);

// Splits `pool` into plan.num_clients disjoint clients with a budget of
// |pool| / C nodes each, shaped by the strategy.
ClientPartition PartitionClients(const NodeSubset& pool, std::span<const std::uint32_t> labels,
                                 std::size_t num_classes, const PartitionPlan& plan);

// Victim partition: client `target_index` realizes the scenario, the others
// are RANDOM (or all clients realize it with spec.all_clients).
ClientPartition MakeTargetScenario(const NodeSubset& pool, std::span<const std::uint32_t> labels,
                                   std::size_t num_classes, const ScenarioSpec& spec,
                                   std::size_t num_clients, std::size_t target_index,
                                   std::uint64_t seed);

// Audit record: {"strategy", "seed", "clients": [{"nodes", "distribution"}]}.
std::string ManifestJson(std::string_view strategy, std::uint64_t seed,
                         const ClientPartition& partition);

}  // namespace fedlisting::partition

#endif  // FEDLISTING_PARTITIONING_HPP_
