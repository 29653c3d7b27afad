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

#include "fedlisting/partitioning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fedlisting/common.hpp"
#include "json.hpp"

namespace fedlisting::partition {
namespace {

using Counts = std::vector<std::size_t>;

// Shuffled per-class node lists drawn down from the back.
class ClassPools {
 public:
  ClassPools(const NodeSubset& pool, std::span<const std::uint32_t> labels,
             std::size_t num_classes, Rng& rng)
      : nodes_(num_classes) {
    for (std::uint32_t u : pool.indices) {
      if (u >= labels.size()) throw ValidationError("pool node out of range");
      if (labels[u] >= num_classes) throw ValidationError("pool label out of range");
      nodes_[labels[u]].push_back(u);
    }
    for (auto& list : nodes_) std::shuffle(list.begin(), list.end(), rng);
  }

  std::size_t num_classes() const { return nodes_.size(); }
  std::size_t available(std::size_t c) const { return nodes_[c].size(); }
  Counts AvailableCounts() const {
    Counts out(nodes_.size());
    for (std::size_t c = 0; c < nodes_.size(); ++c) out[c] = nodes_[c].size();
    return out;
  }

  NodeSubset Take(const Counts& counts) {
    std::vector<std::uint32_t> taken;
    for (std::size_t c = 0; c < nodes_.size(); ++c) {
      if (counts[c] > nodes_[c].size()) throw ContractError("class pool overdrawn");
      taken.insert(taken.end(), nodes_[c].end() - static_cast<std::ptrdiff_t>(counts[c]),
                   nodes_[c].end());
      nodes_[c].resize(nodes_[c].size() - counts[c]);
    }
    return NodeSubset::FromUnsorted(std::move(taken));
  }

 private:
  std::vector<std::vector<std::uint32_t>> nodes_;
};

LabelDistribution DirichletOne(std::size_t num_classes, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  LabelDistribution p(num_classes);
  double total = 0.0;
  do {
    total = 0.0;
    for (double& x : p) {
      x = expo(rng);
      total += x;
    }
  } while (total <= 0.0);
  for (double& x : p) x /= total;
  return p;
}

// Greedy realization of target proportions under class availability: floor
// the exact shares, then hand out the remainder one node at a time to the
// class furthest below its share. Classes with zero target never receive.
Counts Realize(const LabelDistribution& p, std::size_t budget, const Counts& avail) {
  const std::size_t t = p.size();
  Counts counts(t, 0);
  std::size_t used = 0;
  for (std::size_t c = 0; c < t; ++c) {
    counts[c] = std::min(avail[c], static_cast<std::size_t>(std::floor(p[c] * budget)));
    used += counts[c];
  }
  while (used < budget) {
    std::size_t best = t;
    double best_gap = -1e300;
    for (std::size_t c = 0; c < t; ++c) {
      if (p[c] <= 0.0 || counts[c] >= avail[c]) continue;
      const double gap = p[c] * budget - static_cast<double>(counts[c]);
      if (gap > best_gap) {
        best_gap = gap;
        best = c;
      }
    }
    if (best == t) break;
    ++counts[best];
    ++used;
  }
  return counts;
}

Counts RandomCounts(std::size_t budget, const Counts& avail, Rng& rng) {
  return Realize(DirichletOne(avail.size(), rng), budget, avail);
}

// Dirichlet proportions with `missing` zeroed. Every other class with nodes
// left gets at least one, borrowed from the largest class when possible.
// `sharing` special clients (this one included) still need one node of every
// class, so that many are held back from the greedy fill.
Counts MissingCounts(std::size_t budget, const Counts& avail, std::size_t missing,
                     std::size_t sharing, Rng& rng) {
  LabelDistribution p = DirichletOne(avail.size(), rng);
  p[missing] = 0.0;
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x /= total;
  Counts spare(avail.size());
  for (std::size_t c = 0; c < avail.size(); ++c) spare[c] = avail[c] - std::min(avail[c], sharing);
  Counts counts = Realize(p, budget, spare);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (c == missing || counts[c] > 0 || avail[c] == 0) continue;
    const auto largest = static_cast<std::size_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    if (counts[largest] > 1) --counts[largest];
    counts[c] = 1;
  }
  return counts;
}

// `sharing` single-class clients (this one included) still draw from `cls`;
// each takes at most an even share of what is left.
Counts SingleCounts(std::size_t budget, const Counts& avail, std::size_t cls,
                    std::size_t sharing) {
  if (avail[cls] == 0) {
    throw ValidationError("class " + std::to_string(cls) + " exhausted for single-class client");
  }
  Counts counts(avail.size(), 0);
  counts[cls] = std::min(budget, std::max<std::size_t>(1, avail[cls] / sharing));
  return counts;
}

// Per-class quota that lets `clients` clients each hold an exactly uniform
// mix within budget.
std::size_t EqualQuota(std::size_t budget, const Counts& avail, std::size_t clients) {
  std::size_t q = budget / avail.size();
  std::size_t limiting = avail.size();
  for (std::size_t c = 0; c < avail.size(); ++c) {
    if (avail[c] / clients < q) {
      q = avail[c] / clients;
      limiting = c;
    }
  }
  if (q == 0) {
    throw ValidationError(
        limiting < avail.size()
            ? "pool too small for equal proportions: class " + std::to_string(limiting) +
                  " has " + std::to_string(avail[limiting]) + " nodes for " +
                  std::to_string(clients) + " clients"
            : "client budget below the class count for equal proportions");
  }
  return q;
}

std::size_t Budget(const NodeSubset& pool, std::size_t num_clients) {
  if (num_clients == 0) throw ValidationError("need at least one client");
  if (pool.size() < num_clients) {
    throw ValidationError("pool of " + std::to_string(pool.size()) + " nodes is smaller than " +
                          std::to_string(num_clients) + " clients");
  }
  return pool.size() / num_clients;
}

void Append(ClientPartition& out, ClassPools& pools, const Counts& counts, std::size_t client,
            std::span<const std::uint32_t> labels) {
  NodeSubset s = pools.Take(counts);
  if (s.empty()) {
    throw ValidationError("pool exhausted before client " + std::to_string(client));
  }
  out.distributions.push_back(DistributionOf(s, labels, pools.num_classes()));
  out.clients.push_back(std::move(s));
}

std::uint32_t PickClass(const std::optional<std::uint32_t>& chosen, std::size_t num_classes,
                        Rng& rng) {
  if (chosen) return *chosen;
  return static_cast<std::uint32_t>(
      std::uniform_int_distribution<std::size_t>(0, num_classes - 1)(rng));
}

}  // namespace

void ValidateSimplex(std::span<const double> d, std::size_t num_classes) {
  if (d.size() != num_classes) {
    throw ValidationError("distribution has " + std::to_string(d.size()) + " entries, expected " +
                          std::to_string(num_classes));
  }
  double total = 0.0;
  for (double x : d) {
    if (!(x >= 0.0)) throw ValidationError("distribution has a negative or NaN entry");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ValidationError("distribution does not sum to 1");
}

LabelDistribution ComputeLabelDistribution(std::span<const std::uint32_t> labels,
                                           std::size_t num_classes) {
  if (labels.empty()) throw ValidationError("label distribution of an empty set");
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::uint32_t y : labels) {
    if (y >= num_classes) throw ValidationError("label out of range");
    ++counts[y];
  }
  LabelDistribution d(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    d[c] = static_cast<double>(counts[c]) / static_cast<double>(labels.size());
  }
  return d;
}

LabelDistribution DistributionOf(const NodeSubset& subset, std::span<const std::uint32_t> labels,
                                 std::size_t num_classes) {
  std::vector<std::uint32_t> sub;
  sub.reserve(subset.size());
  for (std::uint32_t u : subset.indices) {
    if (u >= labels.size()) throw ValidationError("subset node out of range");
    sub.push_back(labels[u]);
  }
  return ComputeLabelDistribution(sub, num_classes);
}

std::string_view ToString(Strategy s) {
  switch (s) {
    case Strategy::kEqual: return "equal";
    case Strategy::kRandom: return "random";
    case Strategy::kSingleClass: return "single_class";
    case Strategy::kMissingClass: return "missing_class";
  }
  return "unknown";
}

Strategy ParseStrategy(std::string_view name) {
  for (Strategy s : {Strategy::kEqual, Strategy::kRandom, Strategy::kSingleClass,
                     Strategy::kMissingClass}) {
    if (name == ToString(s)) return s;
  }
  throw ValidationError("unknown partition strategy: " + std::string(name));
}

std::string_view ToString(Scenario s) {
  switch (s) {
    case Scenario::kEqualProportion: return "equal_proportion";
    case Scenario::kRandomSplit: return "random_split";
    case Scenario::kOneClassMissing: return "one_class_missing";
    case Scenario::kSingleClassOnly: return "single_class_only";
    case Scenario::kOneClassDominant: return "one_class_dominant";
  }
  return "unknown";
}

Scenario ParseScenario(std::string_view name) {
  for (Scenario s : {Scenario::kEqualProportion, Scenario::kRandomSplit,
                     Scenario::kOneClassMissing, Scenario::kSingleClassOnly,
                     Scenario::kOneClassDominant}) {
    if (name == ToString(s)) return s;
  }
  throw ValidationError("unknown scenario: " + std::string(name));
}

void PartitionPlan::Validate() const {
  if (num_clients == 0) throw ValidationError("partition plan needs at least one client");
  if (special_clients < 1 || special_clients > num_clients) {
    throw ValidationError("special client count must be in [1, num_clients]");
  }
}

void ScenarioSpec::Validate(std::size_t num_classes) const {
  if (chosen_class && *chosen_class >= num_classes) {
    throw ValidationError("scenario class out of range");
  }
  if (!(dominance > 1.0 / static_cast<double>(num_classes) && dominance <= 1.0)) {
    throw ValidationError("dominance fraction must lie in (1/T, 1]");
  }
}

TrainAuxSplit SplitTrainAux(std::span<const std::uint32_t> labels, std::size_t num_classes,
                            double aux_fraction, std::uint64_t seed) {
  if (!(aux_fraction > 0.0 && aux_fraction < 1.0)) {
    throw ValidationError("aux fraction must lie in (0, 1)");
  }
  std::vector<std::vector<std::uint32_t>> by_class(num_classes);
  for (std::size_t u = 0; u < labels.size(); ++u) {
    if (labels[u] >= num_classes) throw ValidationError("label out of range");
    by_class[labels[u]].push_back(static_cast<std::uint32_t>(u));
  }
  // Largest-remainder apportionment of the rounded total.
  const auto total = static_cast<std::size_t>(
      std::llround(aux_fraction * static_cast<double>(labels.size())));
  std::vector<std::size_t> take(num_classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double exact = aux_fraction * static_cast<double>(by_class[c].size());
    take[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += take[c];
    remainders.emplace_back(-(exact - std::floor(exact)), c);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i, ++assigned) {
    ++take[remainders[i].second];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (by_class[c].size() < 2) {
      throw ValidationError("class " + std::to_string(c) + " has fewer than 2 nodes");
    }
    if (take[c] == 0 || take[c] == by_class[c].size()) {
      throw ValidationError("aux fraction leaves class " + std::to_string(c) +
                            " empty on one side of the split");
    }
  }
  Rng rng(DeriveSeed(seed, {TagHash("split_train_aux")}));
  std::vector<std::uint32_t> train, aux;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& nodes = by_class[c];
    std::shuffle(nodes.begin(), nodes.end(), rng);
    aux.insert(aux.end(), nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(take[c]));
    train.insert(train.end(), nodes.begin() + static_cast<std::ptrdiff_t>(take[c]), nodes.end());
  }
  return {NodeSubset::FromUnsorted(std::move(train)), NodeSubset::FromUnsorted(std::move(aux))};
}

ClientPartition PartitionClients(const NodeSubset& pool, std::span<const std::uint32_t> labels,
                                 std::size_t num_classes, const PartitionPlan& plan) {
  plan.Validate();
  if (num_classes == 0) throw ValidationError("need at least one class");
  const std::size_t budget = Budget(pool, plan.num_clients);
  Rng rng(DeriveSeed(plan.seed, {TagHash("partition_clients")}));
  ClassPools pools(pool, labels, num_classes, rng);
  ClientPartition out;

  std::size_t equal_quota = 0;
  if (plan.strategy == Strategy::kEqual) {
    equal_quota = EqualQuota(budget, pools.AvailableCounts(), plan.special_clients);
  }
  for (std::size_t k = 0; k < plan.num_clients; ++k) {
    const Counts avail = pools.AvailableCounts();
    Counts counts;
    if (k >= plan.special_clients || plan.strategy == Strategy::kRandom) {
      counts = RandomCounts(budget, avail, rng);
    } else if (plan.strategy == Strategy::kEqual) {
      counts.assign(num_classes, equal_quota);
    } else if (plan.strategy == Strategy::kSingleClass) {
      std::size_t sharing = 0;
      for (std::size_t j = k; j < plan.special_clients; ++j) {
        sharing += j % num_classes == k % num_classes;
      }
      counts = SingleCounts(budget, avail, k % num_classes, sharing);
    } else {
      const auto missing = std::uniform_int_distribution<std::size_t>(0, num_classes - 1)(rng);
      counts = MissingCounts(budget, avail, missing, plan.special_clients - k, rng);
    }
    Append(out, pools, counts, k, labels);
  }
  return out;
}

ClientPartition MakeTargetScenario(const NodeSubset& pool, std::span<const std::uint32_t> labels,
                                   std::size_t num_classes, const ScenarioSpec& spec,
                                   std::size_t num_clients, std::size_t target_index,
                                   std::uint64_t seed) {
  spec.Validate(num_classes);
  if (target_index >= num_clients) throw ValidationError("target index out of range");
  const std::size_t budget = Budget(pool, num_clients);
  Rng rng(DeriveSeed(seed, {TagHash("target_scenario")}));
  ClassPools pools(pool, labels, num_classes, rng);

  std::size_t equal_quota = 0;
  if (spec.scenario == Scenario::kEqualProportion) {
    equal_quota = EqualQuota(budget, pools.AvailableCounts(), spec.all_clients ? num_clients : 1);
  }
  // Scenario clients still to draw, this one included.
  std::size_t sharing = spec.all_clients ? num_clients : 1;
  auto scenario_counts = [&](const Counts& avail) {
    switch (spec.scenario) {
      case Scenario::kEqualProportion:
        return Counts(num_classes, equal_quota);
      case Scenario::kRandomSplit:
        return RandomCounts(budget, avail, rng);
      case Scenario::kOneClassMissing:
        return MissingCounts(budget, avail, PickClass(spec.chosen_class, num_classes, rng),
                             sharing, rng);
      case Scenario::kSingleClassOnly:
        return SingleCounts(budget, avail, PickClass(spec.chosen_class, num_classes, rng),
                            sharing);
      case Scenario::kOneClassDominant: {
        const std::uint32_t dominant = PickClass(spec.chosen_class, num_classes, rng);
        LabelDistribution p(num_classes, num_classes > 1
                                             ? (1.0 - spec.dominance) / (num_classes - 1.0)
                                             : 0.0);
        p[dominant] = num_classes > 1 ? spec.dominance : 1.0;
        return Realize(p, budget, avail);
      }
    }
    throw ContractError("unhandled scenario");
  };

  // The target draws first so its mix is never starved by the others.
  std::vector<std::size_t> order{target_index};
  for (std::size_t k = 0; k < num_clients; ++k) {
    if (k != target_index) order.push_back(k);
  }
  std::vector<NodeSubset> subsets(num_clients);
  std::vector<LabelDistribution> dists(num_clients);
  for (std::size_t k : order) {
    const Counts avail = pools.AvailableCounts();
    Counts counts;
    if (k == target_index || spec.all_clients) {
      counts = scenario_counts(avail);
      --sharing;
    } else {
      counts = RandomCounts(budget, avail, rng);
    }
    ClientPartition one;
    Append(one, pools, counts, k, labels);
    subsets[k] = std::move(one.clients[0]);
    dists[k] = std::move(one.distributions[0]);
  }
  return {std::move(subsets), std::move(dists)};
}

std::string ManifestJson(std::string_view strategy, std::uint64_t seed,
                         const ClientPartition& partition) {
  nlohmann::json clients = nlohmann::json::array();
  for (std::size_t k = 0; k < partition.clients.size(); ++k) {
    clients.push_back({{"nodes", partition.clients[k].indices},
                       {"distribution", partition.distributions[k]}});
  }
  nlohmann::json j = {{"strategy", std::string(strategy)}, {"seed", seed}, {"clients", clients}};
  return j.dump(2);
}

}  // namespace fedlisting::partition
