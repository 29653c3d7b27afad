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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fedlisting/common.hpp"
#include "json.hpp"

namespace fedlisting::partition {
namespace {

// Class sizes of the Cora citation graph, in label order.
std::vector<std::uint32_t> CoraLikeLabels() {
  const std::size_t sizes[] = {351, 217, 418, 818, 426, 298, 180};
  std::vector<std::uint32_t> labels;
  for (std::uint32_t c = 0; c < 7; ++c) labels.insert(labels.end(), sizes[c], c);
  // Interleave so node index carries no class information.
  Rng rng(99);
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

NodeSubset AllNodes(std::size_t n) {
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  return NodeSubset{idx};
}

std::vector<std::size_t> ClassCounts(const NodeSubset& s, const std::vector<std::uint32_t>& labels,
                                     std::size_t t) {
  std::vector<std::size_t> counts(t, 0);
  for (std::uint32_t u : s.indices) ++counts[labels[u]];
  return counts;
}

void ExpectWellFormed(const ClientPartition& p, const NodeSubset& pool,
                      const std::vector<std::uint32_t>& labels, std::size_t t) {
  const std::set<std::uint32_t> pool_set(pool.indices.begin(), pool.indices.end());
  std::set<std::uint32_t> seen;
  ASSERT_EQ(p.clients.size(), p.distributions.size());
  for (std::size_t k = 0; k < p.clients.size(); ++k) {
    EXPECT_FALSE(p.clients[k].empty());
    EXPECT_NO_THROW(p.clients[k].Validate(labels.size()));
    for (std::uint32_t u : p.clients[k].indices) {
      EXPECT_TRUE(pool_set.count(u)) << "node outside pool";
      EXPECT_TRUE(seen.insert(u).second) << "node " << u << " owned twice";
    }
    EXPECT_NO_THROW(ValidateSimplex(p.distributions[k], t));
    EXPECT_EQ(p.distributions[k], DistributionOf(p.clients[k], labels, t));
  }
}

TEST(LabelDistributionTest, Examples) {
  const std::vector<std::uint32_t> a{0, 0, 1};
  const auto d = ComputeLabelDistribution(a, 2);
  EXPECT_DOUBLE_EQ(d[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(d[1], 1.0 / 3.0);
  const std::vector<std::uint32_t> same{2, 2, 2};
  EXPECT_EQ(ComputeLabelDistribution(same, 3), (LabelDistribution{0.0, 0.0, 1.0}));
  const std::vector<std::uint32_t> uniform{0, 1, 2, 3, 3, 2, 1, 0};
  EXPECT_EQ(ComputeLabelDistribution(uniform, 4), LabelDistribution(4, 0.25));
  EXPECT_THROW(ComputeLabelDistribution(std::span<const std::uint32_t>{}, 3), ValidationError);
  EXPECT_THROW(ComputeLabelDistribution(same, 2), ValidationError);
}

TEST(LabelDistributionTest, SimplexValidation) {
  EXPECT_NO_THROW(ValidateSimplex(std::vector<double>{0.5, 0.5}, 2));
  EXPECT_THROW(ValidateSimplex(std::vector<double>{0.5, 0.6}, 2), ValidationError);
  EXPECT_THROW(ValidateSimplex(std::vector<double>{1.5, -0.5}, 2), ValidationError);
  EXPECT_THROW(ValidateSimplex(std::vector<double>{1.0}, 2), ValidationError);
}

TEST(SplitTrainAuxTest, CoraSizedSplitIsStratifiedAndExhaustive) {
  const auto labels = CoraLikeLabels();
  const auto split = SplitTrainAux(labels, 7, 0.2, 5);
  EXPECT_TRUE(split.aux.size() == 541 || split.aux.size() == 542) << split.aux.size();
  EXPECT_EQ(split.train.size() + split.aux.size(), 2708u);
  std::vector<std::uint32_t> all = split.train.indices;
  all.insert(all.end(), split.aux.indices.begin(), split.aux.indices.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, AllNodes(2708).indices);
  const auto aux_counts = ClassCounts(split.aux, labels, 7);
  const auto all_counts = ClassCounts(AllNodes(2708), labels, 7);
  for (std::size_t c = 0; c < 7; ++c) {
    EXPECT_LE(std::abs(static_cast<double>(aux_counts[c]) - 0.2 * all_counts[c]), 1.0) << c;
  }
}

TEST(SplitTrainAuxTest, DeterministicAndSeedSensitive) {
  const auto labels = CoraLikeLabels();
  const auto a = SplitTrainAux(labels, 7, 0.2, 5);
  const auto b = SplitTrainAux(labels, 7, 0.2, 5);
  const auto c = SplitTrainAux(labels, 7, 0.2, 6);
  EXPECT_EQ(a.aux, b.aux);
  EXPECT_EQ(a.train, b.train);
  EXPECT_NE(a.aux, c.aux);
}

TEST(SplitTrainAuxTest, Errors) {
  const std::vector<std::uint32_t> tiny{0, 0, 1, 1, 2, 2};
  EXPECT_THROW(SplitTrainAux(tiny, 3, 0.01, 1), ValidationError);
  EXPECT_THROW(SplitTrainAux(tiny, 3, 0.0, 1), ValidationError);
  EXPECT_THROW(SplitTrainAux(tiny, 3, 1.0, 1), ValidationError);
  const std::vector<std::uint32_t> singleton{0, 0, 0, 1};
  EXPECT_THROW(SplitTrainAux(singleton, 2, 0.5, 1), ValidationError);
  EXPECT_NO_THROW(SplitTrainAux(tiny, 3, 0.5, 1));
}

class StrategyTest : public ::testing::TestWithParam<Strategy> {};

TEST_P(StrategyTest, DisjointSimplexAndDeterministic) {
  const auto labels = CoraLikeLabels();
  const auto aux = SplitTrainAux(labels, 7, 0.2, 1).aux;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    PartitionPlan plan{GetParam(), 10, 6, seed};
    const auto p = PartitionClients(aux, labels, 7, plan);
    ASSERT_EQ(p.clients.size(), 10u);
    ExpectWellFormed(p, aux, labels, 7);
    const auto again = PartitionClients(aux, labels, 7, plan);
    EXPECT_EQ(p.clients, again.clients);
    EXPECT_EQ(p.distributions, again.distributions);
  }
}

INSTANTIATE_TEST_SUITE_P(All, StrategyTest,
                         ::testing::Values(Strategy::kEqual, Strategy::kRandom,
                                           Strategy::kSingleClass, Strategy::kMissingClass),
                         [](const auto& info) { return std::string(ToString(info.param)); });

TEST(PartitionClientsTest, EqualSpecialClientsAreUniform) {
  const auto labels = CoraLikeLabels();
  const auto aux = SplitTrainAux(labels, 7, 0.2, 1).aux;
  const auto p = PartitionClients(aux, labels, 7, {Strategy::kEqual, 10, 8, 4});
  for (std::size_t k = 0; k < 8; ++k) {
    const double n = static_cast<double>(p.clients[k].size());
    for (double x : p.distributions[k]) EXPECT_NEAR(x, 1.0 / 7.0, 1.0 / n);
  }
}

TEST(PartitionClientsTest, SingleClassSpecialClientsAreOneHot) {
  const auto labels = CoraLikeLabels();
  const auto aux = SplitTrainAux(labels, 7, 0.2, 1).aux;
  const auto p = PartitionClients(aux, labels, 7, {Strategy::kSingleClass, 10, 10, 4});
  for (std::size_t k = 0; k < 10; ++k) {
    EXPECT_EQ(p.distributions[k][k % 7], 1.0) << k;
  }
}

TEST(PartitionClientsTest, MissingClassSpecialClientsHaveExactlyOneZero) {
  const auto labels = CoraLikeLabels();
  const auto aux = SplitTrainAux(labels, 7, 0.2, 1).aux;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = PartitionClients(aux, labels, 7, {Strategy::kMissingClass, 10, 9, seed});
    for (std::size_t k = 0; k < 9; ++k) {
      EXPECT_EQ(std::count(p.distributions[k].begin(), p.distributions[k].end(), 0.0), 1)
          << "seed " << seed << " client " << k;
    }
  }
}

TEST(PartitionClientsTest, ClientBudgetIsEvenSplit) {
  const auto labels = CoraLikeLabels();
  const auto pool = AllNodes(labels.size());
  const auto p = PartitionClients(pool, labels, 7, {Strategy::kRandom, 10, 1, 8});
  for (const auto& c : p.clients) EXPECT_EQ(c.size(), labels.size() / 10);
}

TEST(PartitionClientsTest, Errors) {
  // Class 1 has a single node, so the second class-1 client starves.
  const std::vector<std::uint32_t> labels{0, 0, 0, 0, 0, 0, 0, 0, 0, 1};
  const auto pool = AllNodes(labels.size());
  try {
    PartitionClients(pool, labels, 2, {Strategy::kSingleClass, 4, 4, 1});
    FAIL() << "expected exhaustion";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(PartitionClients(pool, labels, 2, {Strategy::kEqual, 4, 4, 1}), ValidationError);
  EXPECT_THROW(PartitionClients(pool, labels, 2, {Strategy::kRandom, 11, 1, 1}), ValidationError);
  EXPECT_THROW(PartitionClients(pool, labels, 2, {Strategy::kRandom, 4, 0, 1}), ValidationError);
  EXPECT_THROW(PartitionClients(pool, labels, 2, {Strategy::kRandom, 4, 5, 1}), ValidationError);
}

TEST(TargetScenarioTest, ScenarioShapes) {
  const auto labels = CoraLikeLabels();
  const auto train = SplitTrainAux(labels, 7, 0.2, 1).train;
  auto target = [&](Scenario s, std::uint64_t seed) {
    ScenarioSpec spec;
    spec.scenario = s;
    const auto p = MakeTargetScenario(train, labels, 7, spec, 10, 3, seed);
    ExpectWellFormed(p, train, labels, 7);
    return p.distributions[3];
  };
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto single = target(Scenario::kSingleClassOnly, seed);
    EXPECT_EQ(std::count(single.begin(), single.end(), 1.0), 1);
    const auto missing = target(Scenario::kOneClassMissing, seed);
    EXPECT_EQ(std::count(missing.begin(), missing.end(), 0.0), 1);
    for (double x : target(Scenario::kEqualProportion, seed)) EXPECT_NEAR(x, 1.0 / 7.0, 1e-12);
    const auto dominant = target(Scenario::kOneClassDominant, seed);
    const double top = *std::max_element(dominant.begin(), dominant.end());
    EXPECT_NEAR(top, 0.5, 0.01);
    for (double x : dominant) {
      if (x != top) EXPECT_NEAR(x, 0.5 / 6.0, 0.01);
    }
  }
}

TEST(TargetScenarioTest, EqualProportionThreeClasses) {
  std::vector<std::uint32_t> labels;
  for (std::uint32_t i = 0; i < 300; ++i) labels.push_back(i % 3);
  ScenarioSpec spec;
  const auto p = MakeTargetScenario(AllNodes(300), labels, 3, spec, 5, 0, 2);
  for (double x : p.distributions[0]) EXPECT_NEAR(x, 1.0 / 3.0, 1e-12);
}

TEST(TargetScenarioTest, ChosenClassAndAllClients) {
  const auto labels = CoraLikeLabels();
  ScenarioSpec spec;
  spec.scenario = Scenario::kSingleClassOnly;
  spec.chosen_class = 4;
  spec.all_clients = true;
  const auto p = MakeTargetScenario(AllNodes(labels.size()), labels, 7, spec, 2, 1, 3);
  for (const auto& d : p.distributions) EXPECT_EQ(d[4], 1.0);
  spec.chosen_class = 9;
  EXPECT_THROW(MakeTargetScenario(AllNodes(labels.size()), labels, 7, spec, 2, 1, 3),
               ValidationError);
  spec.chosen_class.reset();
  spec.dominance = 0.1;
  spec.scenario = Scenario::kOneClassDominant;
  EXPECT_THROW(MakeTargetScenario(AllNodes(labels.size()), labels, 7, spec, 2, 1, 3),
               ValidationError);
}

TEST(PartitionNamesTest, RoundTrip) {
  for (Strategy s : {Strategy::kEqual, Strategy::kRandom, Strategy::kSingleClass,
                     Strategy::kMissingClass}) {
    EXPECT_EQ(ParseStrategy(ToString(s)), s);
  }
  for (Scenario s : {Scenario::kEqualProportion, Scenario::kRandomSplit,
                     Scenario::kOneClassMissing, Scenario::kSingleClassOnly,
                     Scenario::kOneClassDominant}) {
    EXPECT_EQ(ParseScenario(ToString(s)), s);
  }
  EXPECT_THROW(ParseStrategy("bogus"), ValidationError);
  EXPECT_THROW(ParseScenario("bogus"), ValidationError);
}

TEST(ManifestTest, JsonCarriesNodesAndDistributions) {
  const auto labels = CoraLikeLabels();
  const auto p = PartitionClients(AllNodes(labels.size()), labels, 7,
                                  {Strategy::kRandom, 3, 1, 11});
  const auto j = nlohmann::json::parse(ManifestJson("random", 11, p));
  EXPECT_EQ(j["strategy"], "random");
  EXPECT_EQ(j["seed"], 11);
  ASSERT_EQ(j["clients"].size(), 3u);
  EXPECT_EQ(j["clients"][1]["nodes"].get<std::vector<std::uint32_t>>(), p.clients[1].indices);
  EXPECT_EQ(j["clients"][2]["distribution"].get<std::vector<double>>(), p.distributions[2]);
}

}  // namespace
}  // namespace fedlisting::partition
