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

// Experiment orchestration: config parsing, shadow federations, attack
// training, the victim federation and report output.
//
// Seeds: every stage seed is DeriveSeed(base, {TagHash(stage), index...}),
// so a fixed base seed fixes the whole run.

#ifndef FEDLISTING_HARNESS_HPP_
#define FEDLISTING_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedlisting/attack.hpp"
#include "fedlisting/defenses.hpp"
#include "fedlisting/federation.hpp"
#include "fedlisting/graphstore.hpp"
#include "fedlisting/nnkernels.hpp"
#include "fedlisting/partitioning.hpp"

namespace fedlisting::harness {

// Wraps a failure with the pipeline stage it came from.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct ShadowPlanEntry {
  partition::Strategy strategy = partition::Strategy::kRandom;
  std::size_t processes = 1;
  std::size_t special_clients = 1;

  bool operator==(const ShadowPlanEntry&) const = default;
};
using ShadowPlan = std::vector<ShadowPlanEntry>;

// Per-dataset shadow tables for "cora", "citeseer", "pubmed" and
// "amazon_computers"; "custom" gives 20 processes per strategy with every
// client special and sets *warning. Special counts are capped at
// num_clients. Any other name throws ValidationError.
ShadowPlan DefaultShadowPlan(std::string_view dataset, std::size_t num_clients,
                             std::string* warning = nullptr);

// (0, 0.5, 0.5) for the citation graphs and custom data, (0.5, 0.25, 0.25)
// for pubmed and amazon_computers.
attack::LossWeights DefaultLossWeights(std::string_view dataset);

struct ExperimentConfig {
  std::filesystem::path dataset;
  // Selects the default shadow plan and loss weights. Empty means the
  // graph's own name when it is a known benchmark, else "custom".
  std::string dataset_name;
  nn::Architecture arch = nn::Architecture::kGcn;
  std::size_t num_clients = 10;
  std::size_t rounds = 50;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t hidden_dim = 16;
  double aux_fraction = 0.2;
  // Empty means DefaultShadowPlan.
  ShadowPlan shadow_plan;
  partition::ScenarioSpec scenario;
  std::size_t target_client = 0;
  // Unset with grid_search false means DefaultLossWeights.
  std::optional<attack::LossWeights> loss_weights;
  bool grid_search = false;
  double grid_step = 0.25;
  attack::AttackHyper attack;
  defense::DefenseConfig defense;
  std::uint64_t seed = 0;
  std::size_t repetitions = 3;
  // Where shadow runs are persisted and resumed from; empty disables it.
  std::filesystem::path work_dir;

  void Validate() const;
};

// Every field except "dataset" is optional. Unknown keys are rejected.
ExperimentConfig ParseConfig(std::string_view json_text);
ExperimentConfig LoadConfig(const std::filesystem::path& path);
std::string ConfigToJson(const ExperimentConfig& cfg);

struct RepetitionResult {
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  attack::LossWeights weights;
  bool degenerate = false;
  std::size_t shadow_samples = 0;
  // Attack and per-sample baseline on the held-out 20% of shadow samples.
  attack::AttackMetrics shadow_attack;
  attack::AttackMetrics shadow_baseline;
  // Victim target client.
  partition::LabelDistribution truth;
  partition::LabelDistribution prediction;
  partition::LabelDistribution baseline;
  attack::AttackMetrics attack;
  attack::AttackMetrics baseline_metrics;
  std::vector<double> accuracy;
  double seconds = 0.0;

  bool operator==(const RepetitionResult&) const = default;
};

struct Report {
  std::string config_json;
  std::string scenario;
  std::vector<std::string> warnings;
  std::vector<RepetitionResult> repetitions;

  bool operator==(const Report&) const = default;
};

// Holds the dataset split and trained attack of one repetition so several
// victim federations can share them.
struct AttackArtifacts {
  graphstore::Graph graph;
  partition::TrainAuxSplit split;
  std::vector<attack::AttackSample> samples;
  attack::DatasetSplit attack_split;
  attack::AttackModel model;
  attack::LossWeights weights;
  std::vector<attack::GridCandidate> grid;
  std::vector<std::string> warnings;
};

struct VictimOutcome {
  partition::LabelDistribution truth;
  partition::LabelDistribution prediction;
  partition::LabelDistribution baseline;
  attack::AttackMetrics attack;
  attack::AttackMetrics baseline_metrics;
  std::vector<double> accuracy;
};

// Shadow runs (reused from cfg.work_dir when present), attack dataset,
// weight resolution and attack training for one repetition.
AttackArtifacts PrepareAttack(const ExperimentConfig& cfg, const graphstore::Graph& graph,
                              std::size_t repetition);

// Victim federation on the training split with the given scenario and
// defense, then inference on the target client.
VictimOutcome RunVictim(const ExperimentConfig& cfg, const AttackArtifacts& art,
                        const partition::ScenarioSpec& scenario,
                        const defense::DefenseConfig& defense, std::size_t repetition);

Report RunPipeline(const ExperimentConfig& cfg);

struct SweepRow {
  std::size_t repetition = 0;
  defense::DefenseConfig defense;
  double value = 0.0;  // the swept parameter
  double final_accuracy = 0.0;
  attack::AttackMetrics attack;
};

// Sets the swept field (epsilon, sigma or alpha) of a copy of cfg.defense.
defense::DefenseConfig WithSweepValue(defense::DefenseConfig base, defense::DefenseKind kind,
                                      double value);

// One attack model per repetition trained without defense; the victim
// federation reruns for each grid value.
std::vector<SweepRow> DefenseSweep(const ExperimentConfig& cfg, defense::DefenseKind kind,
                                   const std::vector<double>& grid);

std::string ReportToJson(const Report& report);
Report ReportFromJson(std::string_view json_text);
// repetition,method,scenario,md,js,cs with an "attack" and a "baseline" row
// per repetition.
std::string MetricsCsv(const Report& report);
std::string SweepCsv(const std::vector<SweepRow>& rows);

// report.json and metrics.csv, plus sweep.csv when `sweep` is nonempty.
void EmitReport(const Report& report, const std::filesystem::path& out_dir,
                const std::vector<SweepRow>& sweep = {});

}  // namespace fedlisting::harness

#endif  // FEDLISTING_HARNESS_HPP_
