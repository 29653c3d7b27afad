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

#include "fedlisting/harness.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fedlisting/common.hpp"
#include "test_util.hpp"

namespace fedlisting::harness {
namespace {

using partition::Strategy;

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Tiny but complete pipeline: 200-node SBM, 3 classes, 1 process per strategy.
class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    graphstore::SaveGraph(graphstore::GenerateSbm(200, 3, 0.1, 0.01, 8, 5), dir_.path() / "sbm");
    cfg_.dataset = dir_.path() / "sbm";
    cfg_.num_clients = 4;
    cfg_.rounds = 3;
    cfg_.learning_rate = 1e-2;
    cfg_.hidden_dim = 8;
    cfg_.repetitions = 2;
    cfg_.seed = 17;
    cfg_.attack.epochs = 20;
    cfg_.attack.hidden = {16, 8};
    for (Strategy s : {Strategy::kRandom, Strategy::kEqual, Strategy::kSingleClass,
                       Strategy::kMissingClass}) {
      cfg_.shadow_plan.push_back({s, 1, 2});
    }
  }

  testing_util::TempDir dir_;
  ExperimentConfig cfg_;
};

TEST_F(PipelineTest, ProducesSimplexPredictionsAndReports) {
  const auto report = RunPipeline(cfg_);
  ASSERT_EQ(report.repetitions.size(), 2u);
  for (const auto& r : report.repetitions) {
    ASSERT_EQ(r.prediction.size(), 3u);
    EXPECT_NEAR(std::accumulate(r.prediction.begin(), r.prediction.end(), 0.0), 1.0, 1e-6);
    for (double p : r.prediction) EXPECT_GE(p, 0.0);
    EXPECT_EQ(r.accuracy.size(), 3u);
    EXPECT_EQ(r.shadow_samples, 16u);
    EXPECT_EQ(r.weights, (attack::LossWeights{0.0, 0.5, 0.5}));
  }
  EXPECT_NE(report.repetitions[0].seed, report.repetitions[1].seed);

  const std::string csv = MetricsCsv(report);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2);
  EXPECT_EQ(csv.rfind("repetition,method,scenario,md,js,cs\n", 0), 0u);

  EmitReport(report, dir_.path() / "out");
  EXPECT_EQ(Slurp(dir_.path() / "out" / "metrics.csv"), csv);
  const auto back = ReportFromJson(Slurp(dir_.path() / "out" / "report.json"));
  EXPECT_EQ(back, report);
  EXPECT_FALSE(std::filesystem::exists(dir_.path() / "out" / "sweep.csv"));
}

TEST_F(PipelineTest, SameSeedGivesIdenticalMetrics) {
  cfg_.repetitions = 1;
  EXPECT_EQ(MetricsCsv(RunPipeline(cfg_)), MetricsCsv(RunPipeline(cfg_)));
  const auto a = RunPipeline(cfg_);
  cfg_.seed = 18;
  EXPECT_NE(RunPipeline(cfg_).repetitions[0].prediction, a.repetitions[0].prediction);
}

TEST_F(PipelineTest, ResumeReusesPersistedShadowRuns) {
  cfg_.repetitions = 1;
  cfg_.work_dir = dir_.path() / "work";
  const auto first = RunPipeline(cfg_);
  const auto key = cfg_.work_dir / "rep0" / "equal_0" / "key.txt";
  ASSERT_TRUE(std::filesystem::exists(key));
  ASSERT_TRUE(std::filesystem::exists(cfg_.work_dir / "rep0" / "equal_0" / "partition.json"));
  // Simulate an interruption: one run never finished.
  std::filesystem::remove(cfg_.work_dir / "rep0" / "random_0" / "key.txt");
  const auto resumed = RunPipeline(cfg_);
  EXPECT_EQ(MetricsCsv(resumed), MetricsCsv(first));
  cfg_.work_dir.clear();
  EXPECT_EQ(MetricsCsv(RunPipeline(cfg_)), MetricsCsv(first));
}

TEST_F(PipelineTest, StaleShadowRunsAreRecomputed) {
  cfg_.repetitions = 1;
  cfg_.work_dir = dir_.path() / "work";
  RunPipeline(cfg_);
  cfg_.rounds = 2;
  const auto changed = RunPipeline(cfg_);
  cfg_.work_dir.clear();
  EXPECT_EQ(MetricsCsv(RunPipeline(cfg_)), MetricsCsv(changed));
}

TEST_F(PipelineTest, FixedAndGridWeights) {
  cfg_.repetitions = 1;
  cfg_.loss_weights = attack::LossWeights{1.0, 0.0, 0.0};
  EXPECT_EQ(RunPipeline(cfg_).repetitions[0].weights, (attack::LossWeights{1.0, 0.0, 0.0}));
  cfg_.loss_weights.reset();
  cfg_.grid_search = true;
  cfg_.grid_step = 0.5;
  cfg_.attack.epochs = 2;
  const auto graph = graphstore::LoadGraph(cfg_.dataset);
  const auto art = PrepareAttack(cfg_, graph, 0);
  EXPECT_EQ(art.grid.size(), 26u);
  const auto best = std::min_element(art.grid.begin(), art.grid.end(),
                                     [](const auto& x, const auto& y) {
                                       return x.validation_loss < y.validation_loss;
                                     });
  EXPECT_EQ(best->validation_loss,
            std::find_if(art.grid.begin(), art.grid.end(), [&](const auto& c) {
              return c.weights == art.weights;
            })->validation_loss);
}

TEST_F(PipelineTest, SweepRowsAndZeroNoiseMatchesUndefended) {
  cfg_.repetitions = 1;
  const auto rows = DefenseSweep(cfg_, defense::DefenseKind::kNoise, {0.0, 3.0});
  ASSERT_EQ(rows.size(), 2u);
  const auto plain = RunPipeline(cfg_);
  EXPECT_EQ(rows[0].final_accuracy, plain.repetitions[0].accuracy.back());
  EXPECT_EQ(rows[0].attack, plain.repetitions[0].attack);
  EXPECT_NE(rows[1].attack, rows[0].attack);
  const std::string csv = SweepCsv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_THROW(DefenseSweep(cfg_, defense::DefenseKind::kNoise, {}), ValidationError);
  EXPECT_THROW(DefenseSweep(cfg_, defense::DefenseKind::kCompress, {1.5}), ValidationError);
}

TEST_F(PipelineTest, ScenariosAndStageErrors) {
  cfg_.repetitions = 1;
  const auto graph = graphstore::LoadGraph(cfg_.dataset);
  const auto art = PrepareAttack(cfg_, graph, 0);
  partition::ScenarioSpec spec;
  spec.scenario = partition::Scenario::kSingleClassOnly;
  spec.chosen_class = 2;
  const auto out = RunVictim(cfg_, art, spec, {}, 0);
  EXPECT_EQ(out.truth, (partition::LabelDistribution{0.0, 0.0, 1.0}));
  spec.chosen_class = 7;
  try {
    RunVictim(cfg_, art, spec, {}, 0);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "victim");
  }
  cfg_.dataset = dir_.path() / "absent";
  try {
    RunPipeline(cfg_);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "load");
  }
}

// Held-out SINGLE_CLASS shadow clients: the hot class should win the argmax.
TEST_F(PipelineTest, HeldOutSingleClassArgmax) {
  cfg_.num_clients = 6;
  cfg_.rounds = 5;
  cfg_.attack.epochs = 100;
  cfg_.shadow_plan = {{Strategy::kSingleClass, 8, 6}, {Strategy::kRandom, 4, 6}};
  const auto graph = graphstore::LoadGraph(cfg_.dataset);
  const auto art = PrepareAttack(cfg_, graph, 0);
  std::size_t total = 0, hits = 0;
  for (const auto& s : art.attack_split.validation) {
    const auto hot = std::find(s.target.begin(), s.target.end(), 1.0);
    if (hot == s.target.end()) continue;
    const auto p = attack::InferDistribution(art.model, s.features);
    ++total;
    hits += std::max_element(p.begin(), p.end()) - p.begin() == hot - s.target.begin();
  }
  ASSERT_GE(total, 5u);
  EXPECT_GE(static_cast<double>(hits), 0.8 * static_cast<double>(total))
      << hits << " of " << total;
}

TEST(ShadowPlan, PerDatasetTables) {
  const ShadowPlan cora{{Strategy::kRandom, 20, 10},
                        {Strategy::kEqual, 14, 8},
                        {Strategy::kSingleClass, 14, 10},
                        {Strategy::kMissingClass, 20, 9}};
  EXPECT_EQ(DefaultShadowPlan("cora", 10), cora);
  const ShadowPlan pubmed{{Strategy::kRandom, 20, 10},
                          {Strategy::kEqual, 10, 5},
                          {Strategy::kSingleClass, 16, 10},
                          {Strategy::kMissingClass, 20, 6}};
  EXPECT_EQ(DefaultShadowPlan("pubmed", 10), pubmed);
  EXPECT_EQ(DefaultShadowPlan("citeseer", 10)[2], (ShadowPlanEntry{Strategy::kSingleClass, 20, 2}));
  EXPECT_EQ(DefaultShadowPlan("amazon_computers", 10)[3],
            (ShadowPlanEntry{Strategy::kMissingClass, 20, 2}));
  EXPECT_EQ(DefaultShadowPlan("cora", 5)[1].special_clients, 5u);
  std::string warning;
  const auto custom = DefaultShadowPlan("custom", 7, &warning);
  EXPECT_FALSE(warning.empty());
  for (const auto& e : custom) {
    EXPECT_EQ(e.processes, 20u);
    EXPECT_EQ(e.special_clients, 7u);
  }
  EXPECT_THROW(DefaultShadowPlan("foo", 10), ValidationError);
  EXPECT_EQ(DefaultLossWeights("pubmed"), (attack::LossWeights{0.5, 0.25, 0.25}));
  EXPECT_EQ(DefaultLossWeights("cora"), (attack::LossWeights{0.0, 0.5, 0.5}));
}

TEST(Config, DefaultsAndFullSchema) {
  const auto minimal = ParseConfig(R"({"dataset": "data/x"})");
  EXPECT_EQ(minimal.dataset, "data/x");
  EXPECT_EQ(minimal.num_clients, 10u);
  EXPECT_EQ(minimal.rounds, 50u);
  EXPECT_EQ(minimal.local_epochs, 1u);
  EXPECT_EQ(minimal.batch_size, 32u);
  EXPECT_DOUBLE_EQ(minimal.learning_rate, 1e-3);
  EXPECT_EQ(minimal.hidden_dim, 16u);
  EXPECT_DOUBLE_EQ(minimal.aux_fraction, 0.2);
  EXPECT_EQ(minimal.repetitions, 3u);
  EXPECT_TRUE(minimal.shadow_plan.empty());
  EXPECT_FALSE(minimal.grid_search);

  const auto full = ParseConfig(R"({
    "dataset": "d", "dataset_name": "Cora", "architecture": "sage", "clients": 6,
    "rounds": 4, "local_epochs": 2, "batch_size": 16, "learning_rate": 0.01,
    "hidden_dim": 8, "aux_fraction": 0.3,
    "shadow_plan": [{"strategy": "single_class", "processes": 3, "special_clients": 2}],
    "scenario": {"name": "one_class_dominant", "class": 1, "dominance": 0.7},
    "target_client": 5, "loss_weights": "grid", "grid_step": 0.5,
    "attack": {"epochs": 9, "learning_rate": 0.002, "batch_size": 8, "hidden": [4]},
    "defense": {"kind": "compress", "alpha": 0.3}, "seed": 99, "repetitions": 1,
    "work_dir": "w"})");
  EXPECT_EQ(full.dataset_name, "cora");
  EXPECT_EQ(full.arch, nn::Architecture::kSage);
  EXPECT_EQ(full.shadow_plan, (ShadowPlan{{Strategy::kSingleClass, 3, 2}}));
  EXPECT_EQ(full.scenario.scenario, partition::Scenario::kOneClassDominant);
  EXPECT_EQ(full.scenario.chosen_class, 1u);
  EXPECT_TRUE(full.grid_search);
  EXPECT_EQ(full.attack.hidden, (std::vector<std::size_t>{4}));
  EXPECT_EQ(full.defense.kind, defense::DefenseKind::kCompress);
  EXPECT_DOUBLE_EQ(full.defense.alpha, 0.3);
  EXPECT_EQ(full.seed, 99u);

  // The echo parses back to the same settings.
  const auto again = ParseConfig(ConfigToJson(full));
  EXPECT_EQ(ConfigToJson(again), ConfigToJson(full));
  EXPECT_EQ(ParseConfig(R"({"dataset": "d", "loss_weights": [1, 0, 0]})").loss_weights,
            (attack::LossWeights{1, 0, 0}));
}

TEST(Config, Rejections) {
  EXPECT_THROW(ParseConfig("{}"), FormatError);
  EXPECT_THROW(ParseConfig("not json"), FormatError);
  EXPECT_THROW(ParseConfig(R"({"dataset": "d", "cliets": 3})"), FormatError);
  EXPECT_THROW(ParseConfig(R"({"dataset": "d", "clients": -1})"), FormatError);
  EXPECT_THROW(ParseConfig(R"({"dataset": "d", "clients": 0})"), ValidationError);
  EXPECT_THROW(ParseConfig(R"({"dataset": "d", "aux_fraction": 1.0})"), ValidationError);
  EXPECT_THROW(ParseConfig(R"({"dataset": "d", "target_client": 10})"), ValidationError);
  EXPECT_THROW(ParseConfig(R"({"dataset": "d", "architecture": "mlp"})"), ValidationError);
  EXPECT_THROW(ParseConfig(R"({"dataset": "d", "loss_weights": "best"})"), FormatError);
  EXPECT_THROW(ParseConfig(R"({"dataset": "d", "loss_weights": [0, 0, 0]})"), ValidationError);
  EXPECT_THROW(ParseConfig(R"({"dataset": "d", "defense": {"kind": "dp", "epsilon": 0}})"),
               ValidationError);
  EXPECT_THROW(ParseConfig(R"({"dataset": "d", "shadow_plan": [{"strategy": "equal",
               "special_clients": 11}]})"), ValidationError);
}

TEST(Config, LoadResolvesRelativePaths) {
  testing_util::TempDir dir;
  std::ofstream(dir.path() / "c.json") << R"({"dataset": "graph", "work_dir": "w"})";
  const auto cfg = LoadConfig(dir.path() / "c.json");
  EXPECT_EQ(cfg.dataset, dir.path() / "graph");
  EXPECT_EQ(cfg.work_dir, dir.path() / "w");
  EXPECT_THROW(LoadConfig(dir.path() / "missing.json"), IoError);
}

TEST(Report, EmptyReportGivesHeaderOnlyCsv) {
  Report report;
  report.config_json = "{}";
  report.scenario = "random_split";
  EXPECT_EQ(MetricsCsv(report), "repetition,method,scenario,md,js,cs\n");
  EXPECT_EQ(ReportFromJson(ReportToJson(report)), report);
  EXPECT_THROW(ReportFromJson("{}"), FormatError);
}

}  // namespace
}  // namespace fedlisting::harness
