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

// fedlisting: command-line front end for the experiment harness.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedlisting/common.hpp"
#include "fedlisting/graphstore.hpp"
#include "fedlisting/harness.hpp"

namespace {

using namespace fedlisting;

std::vector<double> ParseGrid(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw ValidationError("bad grid value \"" + item + "\"");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("--grid needs at least one value");
  return out;
}

void PrintSummary(const harness::Report& report) {
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& r : report.repetitions) {
    std::printf("rep %zu  attack md=%.4f js=%.4f cs=%.4f  baseline md=%.4f js=%.4f cs=%.4f  "
                "acc=%.4f  (%.1fs)\n",
                r.repetition, r.attack.manhattan, r.attack.js, r.attack.cosine,
                r.baseline_metrics.manhattan, r.baseline_metrics.js, r.baseline_metrics.cosine,
                r.accuracy.empty() ? 0.0 : r.accuracy.back(), r.seconds);
  }
}

harness::ExperimentConfig LoadWithWorkDir(const std::string& path, const std::string& out) {
  auto cfg = harness::LoadConfig(path);
  if (cfg.work_dir.empty() && !out.empty()) cfg.work_dir = std::filesystem::path(out) / "shadow";
  return cfg;
}

int Run(const std::string& config, const std::string& out) {
  const auto cfg = LoadWithWorkDir(config, out);
  const auto report = harness::RunPipeline(cfg);
  harness::EmitReport(report, out);
  PrintSummary(report);
  std::printf("wrote %s\n", (std::filesystem::path(out) / "report.json").c_str());
  return 0;
}

int Sweep(const std::string& config, const std::string& kind, const std::string& grid,
          const std::string& out) {
  const auto cfg = LoadWithWorkDir(config, out);
  const auto rows = harness::DefenseSweep(cfg, defense::ParseDefenseKind(kind), ParseGrid(grid));
  std::filesystem::create_directories(out);
  const auto path = std::filesystem::path(out) / "sweep.csv";
  std::ofstream(path) << harness::SweepCsv(rows);
  std::cout << harness::SweepCsv(rows);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int GenSbm(std::size_t nodes, std::size_t classes, double p_in, double p_out,
           std::size_t features, std::uint64_t seed, const std::string& out) {
  const auto g = graphstore::GenerateSbm(nodes, classes, p_in, p_out, features, seed);
  graphstore::SaveGraph(g, out);
  std::printf("wrote %s: %zu nodes, %zu edges, %zu features, %zu classes\n", out.c_str(),
              g.num_nodes(), g.num_edges(), g.num_features(), g.num_classes());
  return 0;
}

int GridSearch(const std::string& config, const std::string& out) {
  auto cfg = LoadWithWorkDir(config, out);
  cfg.grid_search = true;
  const auto graph = graphstore::LoadGraph(cfg.dataset);
  const auto art = harness::PrepareAttack(cfg, graph, 0);
  auto ranked = art.grid;
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    if (x.validation_loss != y.validation_loss) return x.validation_loss < y.validation_loss;
    return x.validation_cosine > y.validation_cosine;
  });
  std::ostringstream csv;
  csv << "a,b,c,validation_loss,validation_cs\n";
  char line[128];
  for (const auto& c : ranked) {
    std::snprintf(line, sizeof(line), "%g,%g,%g,%.10g,%.10g\n", c.weights.a, c.weights.b,
                  c.weights.c, c.validation_loss, c.validation_cosine);
    csv << line;
  }
  std::cout << csv.str();
  std::printf("best a=%g b=%g c=%g\n", art.weights.a, art.weights.b, art.weights.c);
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::ofstream(std::filesystem::path(out) / "gridsearch.csv") << csv.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated graph learning label-distribution inference lab"};
  app.require_subcommand(1);

  std::string config, out = "fedlisting_out", defense_kind, grid;
  auto* run = app.add_subcommand("run", "Run the full pipeline and write a report");
  run->add_option("--config", config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Victim accuracy and attack quality per defense setting");
  sweep->add_option("--config", config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--defense", defense_kind, "dp, noise or compress")
      ->required()
      ->check(CLI::IsMember({"dp", "noise", "compress"}));
  sweep->add_option("--grid", grid, "Comma-separated epsilon, sigma or alpha values")->required();
  sweep->add_option("--out", out, "Output directory")->capture_default_str();

  std::size_t nodes = 200, classes = 3, features = 16;
  double p_in = 0.05, p_out = 0.005;
  std::uint64_t seed = 0;
  auto* gen = app.add_subcommand("gen-sbm", "Write a stochastic block model dataset");
  gen->add_option("--nodes", nodes, "Node count")->required();
  gen->add_option("--classes", classes, "Class count")->required();
  gen->add_option("--p-in", p_in, "Intra-class edge probability")->capture_default_str();
  gen->add_option("--p-out", p_out, "Inter-class edge probability")->capture_default_str();
  gen->add_option("--features", features, "Feature dimension")->capture_default_str();
  gen->add_option("--seed", seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", out, "Dataset directory")->required();

  std::string grid_out;
  auto* gs = app.add_subcommand("gridsearch", "Rank loss weights on shadow data");
  gs->add_option("--config", config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  gs->add_option("--out", grid_out, "Directory for gridsearch.csv and shadow runs");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return Run(config, out);
    if (*sweep) return Sweep(config, defense_kind, grid, out);
    if (*gen) return GenSbm(nodes, classes, p_in, p_out, features, seed, out);
    if (*gs) return GridSearch(config, grid_out);
  } catch (const std::exception& e) {
    std::cerr << "fedlisting: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
