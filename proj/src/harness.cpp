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

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "fedlisting/common.hpp"
#include "json.hpp"

namespace fedlisting::harness {
namespace {

using json = nlohmann::json;
using partition::Strategy;

constexpr std::string_view kKnownDatasets[] = {"cora", "citeseer", "pubmed", "amazon_computers"};

bool IsKnownDataset(std::string_view name) {
  return std::find(std::begin(kKnownDatasets), std::end(kKnownDatasets), name) !=
         std::end(kKnownDatasets);
}

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

template <typename Fn>
auto Stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string ReadText(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// ---- config parsing ----

void CheckKeys(const json& obj, std::initializer_list<std::string_view> allowed,
               const std::string& where) {
  if (!obj.is_object()) throw FormatError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw FormatError("unknown key \"" + key + "\" in " + where);
    }
  }
}

std::size_t Count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw FormatError(key + " must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

double Real(const json& v, const std::string& key) {
  if (!v.is_number()) throw FormatError(key + " must be a number");
  return v.get<double>();
}

std::string Text(const json& v, const std::string& key) {
  if (!v.is_string()) throw FormatError(key + " must be a string");
  return v.get<std::string>();
}

bool Flag(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw FormatError(key + " must be true or false");
  return v.get<bool>();
}

attack::LossWeights WeightsFrom(const json& v) {
  if (v.is_array()) {
    if (v.size() != 3) throw FormatError("loss_weights array must have 3 entries");
    return {Real(v[0], "loss_weights[0]"), Real(v[1], "loss_weights[1]"),
            Real(v[2], "loss_weights[2]")};
  }
  CheckKeys(v, {"a", "b", "c"}, "loss_weights");
  attack::LossWeights w{0.0, 0.0, 0.0};
  if (v.contains("a")) w.a = Real(v["a"], "loss_weights.a");
  if (v.contains("b")) w.b = Real(v["b"], "loss_weights.b");
  if (v.contains("c")) w.c = Real(v["c"], "loss_weights.c");
  return w;
}

defense::DefenseConfig DefenseFrom(const json& v) {
  CheckKeys(v, {"kind", "epsilon", "delta", "clip_norm", "scale_noise_by_clip", "sigma", "alpha"},
            "defense");
  defense::DefenseConfig d;
  if (v.contains("kind")) d.kind = defense::ParseDefenseKind(Text(v["kind"], "defense.kind"));
  if (v.contains("epsilon")) d.epsilon = Real(v["epsilon"], "defense.epsilon");
  if (v.contains("delta")) d.delta = Real(v["delta"], "defense.delta");
  if (v.contains("clip_norm")) d.clip_norm = Real(v["clip_norm"], "defense.clip_norm");
  if (v.contains("scale_noise_by_clip")) {
    d.scale_noise_by_clip = Flag(v["scale_noise_by_clip"], "defense.scale_noise_by_clip");
  }
  if (v.contains("sigma")) d.sigma = Real(v["sigma"], "defense.sigma");
  if (v.contains("alpha")) d.alpha = Real(v["alpha"], "defense.alpha");
  return d;
}

json DefenseJson(const defense::DefenseConfig& d) {
  return {{"kind", std::string(defense::ToString(d.kind))},
          {"epsilon", d.epsilon},
          {"delta", d.delta},
          {"clip_norm", d.clip_norm},
          {"scale_noise_by_clip", d.scale_noise_by_clip},
          {"sigma", d.sigma},
          {"alpha", d.alpha}};
}

json MetricsJson(const attack::AttackMetrics& m) {
  return {{"md", m.manhattan}, {"js", m.js}, {"cs", m.cosine}};
}

attack::AttackMetrics MetricsFrom(const json& v) {
  return {v.at("md").get<double>(), v.at("js").get<double>(), v.at("cs").get<double>()};
}

attack::AttackMetrics MeanMetrics(const std::vector<attack::AttackMetrics>& all) {
  attack::AttackMetrics m;
  for (const auto& x : all) {
    m.manhattan += x.manhattan;
    m.js += x.js;
    m.cosine += x.cosine;
  }
  const double n = static_cast<double>(all.size());
  m.manhattan /= n;
  m.js /= n;
  m.cosine /= n;
  return m;
}

std::string ResolveDatasetName(const ExperimentConfig& cfg, const graphstore::Graph& g) {
  if (!cfg.dataset_name.empty()) return Lower(cfg.dataset_name);
  const std::string own = Lower(g.name());
  return IsKnownDataset(own) ? own : "custom";
}

std::uint64_t RepetitionSeed(const ExperimentConfig& cfg, std::size_t repetition) {
  return DeriveSeed(cfg.seed, {TagHash("repetition"), repetition});
}

federation::TrainingConfig FederationConfig(const ExperimentConfig& cfg, std::uint64_t seed,
                                            const defense::DefenseConfig& defense) {
  federation::TrainingConfig tc;
  tc.arch = cfg.arch;
  tc.hidden_dim = cfg.hidden_dim;
  tc.rounds = cfg.rounds;
  tc.local_epochs = cfg.local_epochs;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.learning_rate;
  tc.defense = defense;
  tc.seed = seed;
  return tc;
}

std::vector<federation::ClientState> MakeClients(const graphstore::Graph& g,
                                                 const partition::ClientPartition& part) {
  std::vector<federation::ClientState> clients;
  clients.reserve(part.clients.size());
  for (std::size_t k = 0; k < part.clients.size(); ++k) {
    clients.push_back(
        federation::ClientState::Make(static_cast<std::uint32_t>(k), g, part.clients[k]));
  }
  return clients;
}

struct ShadowJob {
  ShadowPlanEntry entry;
  std::size_t process = 0;
};

// Everything a persisted shadow run depends on; a mismatch reruns it.
std::string ShadowKey(const ExperimentConfig& cfg, const graphstore::Graph& g,
                      const ShadowJob& job, std::uint64_t seed) {
  json key = {{"dataset", cfg.dataset.string()},
              {"nodes", g.num_nodes()},
              {"edges", g.num_edges()},
              {"arch", std::string(nn::ToString(cfg.arch))},
              {"clients", cfg.num_clients},
              {"rounds", cfg.rounds},
              {"local_epochs", cfg.local_epochs},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"hidden_dim", cfg.hidden_dim},
              {"aux_fraction", cfg.aux_fraction},
              {"strategy", std::string(partition::ToString(job.entry.strategy))},
              {"special_clients", job.entry.special_clients},
              {"process", job.process},
              {"seed", seed}};
  return key.dump();
}

federation::FedRunResult RunShadow(const ExperimentConfig& cfg, const graphstore::Graph& g,
                                   const partition::NodeSubset& aux, const ShadowJob& job,
                                   std::uint64_t rep_seed, std::size_t repetition) {
  const std::uint64_t seed =
      DeriveSeed(rep_seed, {TagHash("shadow"), static_cast<std::uint64_t>(job.entry.strategy),
                            job.process});
  std::filesystem::path dir;
  std::string key;
  if (!cfg.work_dir.empty()) {
    dir = cfg.work_dir / ("rep" + std::to_string(repetition)) /
          (std::string(partition::ToString(job.entry.strategy)) + "_" +
           std::to_string(job.process));
    key = ShadowKey(cfg, g, job, seed);
    // key.txt is written last, so its presence marks a complete run.
    std::error_code ec;
    if (std::filesystem::exists(dir / "key.txt", ec) && ReadText(dir / "key.txt") == key) {
      return federation::ReadFedRun(dir);
    }
  }
  partition::PartitionPlan plan;
  plan.strategy = job.entry.strategy;
  plan.num_clients = cfg.num_clients;
  plan.special_clients = job.entry.special_clients;
  plan.seed = DeriveSeed(seed, {TagHash("partition")});
  const auto part = partition::PartitionClients(aux, g.labels(), g.num_classes(), plan);
  auto clients = MakeClients(g, part);
  auto result = federation::RunFederation(
      clients, FederationConfig(cfg, DeriveSeed(seed, {TagHash("federation")}), {}));
  if (!dir.empty()) {
    std::filesystem::remove(dir / "key.txt");
    federation::WriteFedRun(result, dir);
    WriteText(dir / "partition.json",
              partition::ManifestJson(partition::ToString(plan.strategy), plan.seed, part));
    WriteText(dir / "key.txt", key);
  }
  return result;
}

// Baseline guesses for the shadow validation samples, one seed per sample.
attack::AttackMetrics ShadowBaseline(const std::vector<attack::AttackSample>& samples,
                                     std::uint64_t rep_seed) {
  std::vector<attack::AttackMetrics> all;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto guess = attack::RandomGuessBaseline(
        samples[i].target.size(), DeriveSeed(rep_seed, {TagHash("shadow_baseline"), i}));
    all.push_back(attack::ComputeMetrics(samples[i].target, guess));
  }
  return MeanMetrics(all);
}

}  // namespace

ShadowPlan DefaultShadowPlan(std::string_view dataset, std::size_t num_clients,
                             std::string* warning) {
  if (num_clients == 0) throw ValidationError("num_clients must be >= 1");
  const std::string name = Lower(dataset);
  ShadowPlan plan;
  auto add = [&](Strategy s, std::size_t processes, std::size_t m) {
    plan.push_back({s, processes, std::min(m, num_clients)});
  };
  // RANDOM clients are all alike, so m only matters for the other strategies.
  if (name == "cora") {
    add(Strategy::kRandom, 20, num_clients);
    add(Strategy::kEqual, 14, 8);
    add(Strategy::kSingleClass, 14, 10);
    add(Strategy::kMissingClass, 20, 9);
  } else if (name == "citeseer") {
    add(Strategy::kRandom, 20, num_clients);
    add(Strategy::kEqual, 10, 6);
    add(Strategy::kSingleClass, 20, 2);
    add(Strategy::kMissingClass, 20, 10);
  } else if (name == "pubmed") {
    add(Strategy::kRandom, 20, num_clients);
    add(Strategy::kEqual, 10, 5);
    add(Strategy::kSingleClass, 16, 10);
    add(Strategy::kMissingClass, 20, 6);
  } else if (name == "amazon_computers") {
    add(Strategy::kRandom, 20, num_clients);
    add(Strategy::kEqual, 14, 10);
    add(Strategy::kSingleClass, 10, 10);
    add(Strategy::kMissingClass, 20, 2);
  } else if (name == "custom") {
    for (Strategy s : {Strategy::kRandom, Strategy::kEqual, Strategy::kSingleClass,
                       Strategy::kMissingClass}) {
      add(s, 20, num_clients);
    }
    if (warning) {
      *warning = "no tuned shadow plan for custom data; using 20 processes per strategy with "
                 "every client following the strategy";
    }
  } else {
    throw ValidationError("unknown dataset \"" + std::string(dataset) +
                          "\" (expected cora, citeseer, pubmed, amazon_computers or custom)");
  }
  return plan;
}

attack::LossWeights DefaultLossWeights(std::string_view dataset) {
  const std::string name = Lower(dataset);
  if (name == "pubmed" || name == "amazon_computers") return {0.5, 0.25, 0.25};
  return {0.0, 0.5, 0.5};
}

void ExperimentConfig::Validate() const {
  if (dataset.empty()) throw ValidationError("dataset path is required");
  if (arch == nn::Architecture::kMlp) throw ValidationError("client models must be GNNs");
  if (num_clients < 1 || rounds < 1 || local_epochs < 1 || batch_size < 1 || hidden_dim < 1 ||
      repetitions < 1) {
    throw ValidationError("clients, rounds, local_epochs, batch_size, hidden_dim and "
                          "repetitions must all be >= 1");
  }
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (!(aux_fraction > 0.0 && aux_fraction < 1.0)) {
    throw ValidationError("aux_fraction must lie in (0, 1)");
  }
  if (target_client >= num_clients) throw ValidationError("target_client must be < clients");
  for (const auto& e : shadow_plan) {
    if (e.processes < 1) throw ValidationError("shadow plan process counts must be >= 1");
    if (e.special_clients < 1 || e.special_clients > num_clients) {
      throw ValidationError("shadow plan special_clients must lie in [1, clients]");
    }
  }
  if (loss_weights) loss_weights->Validate();
  if (!(grid_step > 0.0 && grid_step <= 1.0)) throw ValidationError("grid_step must lie in (0, 1]");
  if (attack.epochs < 1 || attack.batch_size < 1 || !(attack.learning_rate > 0.0)) {
    throw ValidationError("attack epochs, batch_size and learning_rate must be positive");
  }
  defense.Validate();
}

ExperimentConfig ParseConfig(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  CheckKeys(j,
            {"dataset", "dataset_name", "architecture", "clients", "rounds", "local_epochs",
             "batch_size", "learning_rate", "hidden_dim", "aux_fraction", "shadow_plan",
             "scenario", "target_client", "loss_weights", "grid_step", "attack", "defense", "seed",
             "repetitions", "work_dir"},
            "config");
  ExperimentConfig cfg;
  if (!j.contains("dataset")) throw FormatError("config needs a \"dataset\" path");
  cfg.dataset = Text(j["dataset"], "dataset");
  if (j.contains("dataset_name")) cfg.dataset_name = Lower(Text(j["dataset_name"], "dataset_name"));
  if (j.contains("architecture")) {
    cfg.arch = nn::ParseArchitecture(Text(j["architecture"], "architecture"));
  }
  if (j.contains("clients")) cfg.num_clients = Count(j["clients"], "clients");
  if (j.contains("rounds")) cfg.rounds = Count(j["rounds"], "rounds");
  if (j.contains("local_epochs")) cfg.local_epochs = Count(j["local_epochs"], "local_epochs");
  if (j.contains("batch_size")) cfg.batch_size = Count(j["batch_size"], "batch_size");
  if (j.contains("learning_rate")) cfg.learning_rate = Real(j["learning_rate"], "learning_rate");
  if (j.contains("hidden_dim")) cfg.hidden_dim = Count(j["hidden_dim"], "hidden_dim");
  if (j.contains("aux_fraction")) cfg.aux_fraction = Real(j["aux_fraction"], "aux_fraction");
  if (j.contains("shadow_plan")) {
    const auto& plan = j["shadow_plan"];
    if (!plan.is_array()) throw FormatError("shadow_plan must be an array");
    for (const auto& e : plan) {
      CheckKeys(e, {"strategy", "processes", "special_clients"}, "shadow_plan entry");
      ShadowPlanEntry entry;
      entry.strategy = partition::ParseStrategy(Text(e.at("strategy"), "shadow_plan.strategy"));
      if (e.contains("processes")) entry.processes = Count(e["processes"], "shadow_plan.processes");
      entry.special_clients = e.contains("special_clients")
                                  ? Count(e["special_clients"], "shadow_plan.special_clients")
                                  : cfg.num_clients;
      cfg.shadow_plan.push_back(entry);
    }
  }
  if (j.contains("scenario")) {
    const auto& s = j["scenario"];
    if (s.is_string()) {
      cfg.scenario.scenario = partition::ParseScenario(s.get<std::string>());
    } else {
      CheckKeys(s, {"name", "class", "dominance", "all_clients"}, "scenario");
      if (s.contains("name")) cfg.scenario.scenario = partition::ParseScenario(Text(s["name"], "scenario.name"));
      if (s.contains("class")) {
        cfg.scenario.chosen_class = static_cast<std::uint32_t>(Count(s["class"], "scenario.class"));
      }
      if (s.contains("dominance")) cfg.scenario.dominance = Real(s["dominance"], "scenario.dominance");
      if (s.contains("all_clients")) cfg.scenario.all_clients = Flag(s["all_clients"], "scenario.all_clients");
    }
  }
  if (j.contains("target_client")) cfg.target_client = Count(j["target_client"], "target_client");
  if (j.contains("loss_weights")) {
    const auto& w = j["loss_weights"];
    if (w.is_string()) {
      if (w.get<std::string>() != "grid") {
        throw FormatError("loss_weights must be \"grid\", [a, b, c] or {\"a\", \"b\", \"c\"}");
      }
      cfg.grid_search = true;
    } else {
      cfg.loss_weights = WeightsFrom(w);
    }
  }
  if (j.contains("grid_step")) cfg.grid_step = Real(j["grid_step"], "grid_step");
  if (j.contains("attack")) {
    const auto& a = j["attack"];
    CheckKeys(a, {"epochs", "learning_rate", "batch_size", "hidden"}, "attack");
    if (a.contains("epochs")) cfg.attack.epochs = Count(a["epochs"], "attack.epochs");
    if (a.contains("learning_rate")) cfg.attack.learning_rate = Real(a["learning_rate"], "attack.learning_rate");
    if (a.contains("batch_size")) cfg.attack.batch_size = Count(a["batch_size"], "attack.batch_size");
    if (a.contains("hidden")) {
      if (!a["hidden"].is_array()) throw FormatError("attack.hidden must be an array");
      cfg.attack.hidden.clear();
      for (const auto& h : a["hidden"]) cfg.attack.hidden.push_back(Count(h, "attack.hidden"));
    }
  }
  if (j.contains("defense")) cfg.defense = DefenseFrom(j["defense"]);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw FormatError("seed must be a nonnegative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("repetitions")) cfg.repetitions = Count(j["repetitions"], "repetitions");
  if (j.contains("work_dir")) cfg.work_dir = Text(j["work_dir"], "work_dir");
  cfg.Validate();
  return cfg;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  auto cfg = ParseConfig(ReadText(path));
  // Relative paths inside a config file are relative to the file.
  const auto base = path.parent_path();
  if (cfg.dataset.is_relative()) cfg.dataset = base / cfg.dataset;
  if (!cfg.work_dir.empty() && cfg.work_dir.is_relative()) cfg.work_dir = base / cfg.work_dir;
  return cfg;
}

std::string ConfigToJson(const ExperimentConfig& cfg) {
  json plan = json::array();
  for (const auto& e : cfg.shadow_plan) {
    plan.push_back({{"strategy", std::string(partition::ToString(e.strategy))},
                    {"processes", e.processes},
                    {"special_clients", e.special_clients}});
  }
  json scenario = {{"name", std::string(partition::ToString(cfg.scenario.scenario))},
                   {"dominance", cfg.scenario.dominance},
                   {"all_clients", cfg.scenario.all_clients}};
  if (cfg.scenario.chosen_class) scenario["class"] = *cfg.scenario.chosen_class;
  json j = {{"dataset", cfg.dataset.string()},
            {"architecture", std::string(nn::ToString(cfg.arch))},
            {"clients", cfg.num_clients},
            {"rounds", cfg.rounds},
            {"local_epochs", cfg.local_epochs},
            {"batch_size", cfg.batch_size},
            {"learning_rate", cfg.learning_rate},
            {"hidden_dim", cfg.hidden_dim},
            {"aux_fraction", cfg.aux_fraction},
            {"shadow_plan", plan},
            {"scenario", scenario},
            {"target_client", cfg.target_client},
            {"grid_step", cfg.grid_step},
            {"attack",
             {{"epochs", cfg.attack.epochs},
              {"learning_rate", cfg.attack.learning_rate},
              {"batch_size", cfg.attack.batch_size},
              {"hidden", cfg.attack.hidden}}},
            {"defense", DefenseJson(cfg.defense)},
            {"seed", cfg.seed},
            {"repetitions", cfg.repetitions}};
  if (!cfg.dataset_name.empty()) j["dataset_name"] = cfg.dataset_name;
  if (cfg.grid_search) {
    j["loss_weights"] = "grid";
  } else if (cfg.loss_weights) {
    j["loss_weights"] = {cfg.loss_weights->a, cfg.loss_weights->b, cfg.loss_weights->c};
  }
  if (!cfg.work_dir.empty()) j["work_dir"] = cfg.work_dir.string();
  return j.dump(2);
}

AttackArtifacts PrepareAttack(const ExperimentConfig& cfg, const graphstore::Graph& graph,
                              std::size_t repetition) {
  cfg.Validate();
  AttackArtifacts art;
  art.graph = graph;
  const std::uint64_t rep_seed = RepetitionSeed(cfg, repetition);
  const std::string name = ResolveDatasetName(cfg, graph);

  art.split = Stage("split", [&] {
    return partition::SplitTrainAux(graph.labels(), graph.num_classes(), cfg.aux_fraction,
                                    DeriveSeed(rep_seed, {TagHash("train_aux")}));
  });

  ShadowPlan plan = cfg.shadow_plan;
  if (plan.empty()) {
    std::string warning;
    plan = Stage("shadow", [&] { return DefaultShadowPlan(name, cfg.num_clients, &warning); });
    if (!warning.empty()) art.warnings.push_back(warning);
  }
  std::vector<ShadowJob> jobs;
  for (const auto& e : plan) {
    for (std::size_t p = 0; p < e.processes; ++p) jobs.push_back({e, p});
  }
  std::vector<federation::FedRunResult> runs(jobs.size());
  Stage("shadow", [&] {
    ParallelFor(jobs.size(), [&](std::size_t i) {
      runs[i] = RunShadow(cfg, graph, art.split.aux, jobs[i], rep_seed, repetition);
    });
    return 0;
  });

  art.samples = Stage("attack_dataset", [&] { return attack::BuildAttackDataset(runs); });
  runs.clear();
  art.attack_split = Stage("attack_dataset", [&] {
    return attack::SplitDataset(art.samples, 0.2, DeriveSeed(rep_seed, {TagHash("attack_split")}));
  });

  attack::AttackHyper hyper = cfg.attack;
  hyper.seed = DeriveSeed(rep_seed, {TagHash("attack")});
  if (cfg.grid_search) {
    auto grid = Stage("grid_search", [&] {
      return attack::GridSearchWeights(art.attack_split.train, cfg.grid_step, hyper);
    });
    art.weights = grid.best;
    art.grid = std::move(grid.candidates);
  } else {
    art.weights = cfg.loss_weights.value_or(DefaultLossWeights(name));
  }
  art.model = Stage("attack_train", [&] {
    return attack::TrainAttackModel(art.attack_split.train, art.weights, hyper);
  });
  if (art.model.degenerate) {
    art.warnings.push_back("attack dataset is degenerate: identical features, differing targets");
  }
  return art;
}

VictimOutcome RunVictim(const ExperimentConfig& cfg, const AttackArtifacts& art,
                        const partition::ScenarioSpec& scenario,
                        const defense::DefenseConfig& defense, std::size_t repetition) {
  const auto& g = art.graph;
  const std::uint64_t victim_seed =
      DeriveSeed(RepetitionSeed(cfg, repetition), {TagHash("victim")});
  return Stage("victim", [&] {
    scenario.Validate(g.num_classes());
    // Stratified 10% of the training split, held out from every client.
    std::vector<std::uint32_t> train_labels;
    for (std::uint32_t u : art.split.train.indices) train_labels.push_back(g.labels()[u]);
    const auto holdout = partition::SplitTrainAux(train_labels, g.num_classes(), 0.1,
                                                  DeriveSeed(victim_seed, {TagHash("test")}));
    std::vector<std::uint32_t> test, pool;
    std::vector<bool> is_test(train_labels.size(), false);
    for (std::uint32_t i : holdout.aux.indices) is_test[i] = true;
    for (std::size_t i = 0; i < train_labels.size(); ++i) {
      (is_test[i] ? test : pool).push_back(art.split.train.indices[i]);
    }
    const auto part = partition::MakeTargetScenario(
        partition::NodeSubset{pool}, g.labels(), g.num_classes(), scenario, cfg.num_clients,
        cfg.target_client, DeriveSeed(victim_seed, {TagHash("scenario")}));
    auto clients = MakeClients(g, part);
    const auto eval = federation::EvalSet::Make(g, art.split.train, partition::NodeSubset{test});
    const auto run = federation::RunFederation(
        clients, FederationConfig(cfg, DeriveSeed(victim_seed, {TagHash("federation")}), defense),
        &eval);

    VictimOutcome out;
    out.truth = run.distributions[cfg.target_client];
    out.prediction = attack::InferDistribution(art.model, run.records[cfg.target_client]);
    out.baseline = attack::RandomGuessBaseline(g.num_classes(),
                                               DeriveSeed(victim_seed, {TagHash("baseline")}));
    out.attack = attack::ComputeMetrics(out.truth, out.prediction);
    out.baseline_metrics = attack::ComputeMetrics(out.truth, out.baseline);
    out.accuracy = run.accuracy;
    return out;
  });
}

Report RunPipeline(const ExperimentConfig& cfg) {
  cfg.Validate();
  const auto graph = Stage("load", [&] { return graphstore::LoadGraph(cfg.dataset); });
  Report report;
  report.config_json = ConfigToJson(cfg);
  report.scenario = std::string(partition::ToString(cfg.scenario.scenario));
  std::set<std::string> seen;
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    const auto start = std::chrono::steady_clock::now();
    const auto art = PrepareAttack(cfg, graph, r);
    for (const auto& w : art.warnings) {
      if (seen.insert(w).second) report.warnings.push_back(w);
    }
    const auto victim = RunVictim(cfg, art, cfg.scenario, cfg.defense, r);

    RepetitionResult rep;
    rep.repetition = r;
    rep.seed = RepetitionSeed(cfg, r);
    rep.weights = art.weights;
    rep.degenerate = art.model.degenerate;
    rep.shadow_samples = art.samples.size();
    rep.shadow_attack = attack::Evaluate(art.model, art.attack_split.validation);
    rep.shadow_baseline = ShadowBaseline(art.attack_split.validation, rep.seed);
    rep.truth = victim.truth;
    rep.prediction = victim.prediction;
    rep.baseline = victim.baseline;
    rep.attack = victim.attack;
    rep.baseline_metrics = victim.baseline_metrics;
    rep.accuracy = victim.accuracy;
    rep.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.repetitions.push_back(std::move(rep));
  }
  return report;
}

defense::DefenseConfig WithSweepValue(defense::DefenseConfig base, defense::DefenseKind kind,
                                      double value) {
  base.kind = kind;
  switch (kind) {
    case defense::DefenseKind::kDp:
      base.epsilon = value;
      break;
    case defense::DefenseKind::kNoise:
      base.sigma = value;
      break;
    case defense::DefenseKind::kCompress:
      base.alpha = value;
      break;
    case defense::DefenseKind::kNone:
      throw ValidationError("a sweep needs dp, noise or compress");
  }
  base.Validate();
  return base;
}

std::vector<SweepRow> DefenseSweep(const ExperimentConfig& cfg, defense::DefenseKind kind,
                                   const std::vector<double>& grid) {
  cfg.Validate();
  if (grid.empty()) throw ValidationError("defense sweep grid is empty");
  std::vector<defense::DefenseConfig> settings;
  for (double v : grid) settings.push_back(WithSweepValue(cfg.defense, kind, v));
  const auto graph = Stage("load", [&] { return graphstore::LoadGraph(cfg.dataset); });
  std::vector<SweepRow> rows;
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    const auto art = PrepareAttack(cfg, graph, r);
    for (std::size_t i = 0; i < settings.size(); ++i) {
      const auto victim = RunVictim(cfg, art, cfg.scenario, settings[i], r);
      SweepRow row;
      row.repetition = r;
      row.defense = settings[i];
      row.value = grid[i];
      row.final_accuracy = victim.accuracy.empty() ? 0.0 : victim.accuracy.back();
      row.attack = victim.attack;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string ReportToJson(const Report& report) {
  json reps = json::array();
  for (const auto& r : report.repetitions) {
    reps.push_back({{"repetition", r.repetition},
                    {"seed", r.seed},
                    {"weights", {r.weights.a, r.weights.b, r.weights.c}},
                    {"degenerate", r.degenerate},
                    {"shadow_samples", r.shadow_samples},
                    {"shadow_attack", MetricsJson(r.shadow_attack)},
                    {"shadow_baseline", MetricsJson(r.shadow_baseline)},
                    {"truth", r.truth},
                    {"prediction", r.prediction},
                    {"baseline", r.baseline},
                    {"attack", MetricsJson(r.attack)},
                    {"baseline_metrics", MetricsJson(r.baseline_metrics)},
                    {"accuracy", r.accuracy},
                    {"seconds", r.seconds}});
  }
  json summary = json::object();
  if (!report.repetitions.empty()) {
    for (const auto& [method, field] :
         {std::pair{"attack", "attack"}, std::pair{"baseline", "baseline_metrics"}}) {
      json m;
      for (const char* metric : {"md", "js", "cs"}) {
        std::vector<double> v;
        for (const auto& r : reps) v.push_back(r[field][metric].get<double>());
        double mean = 0.0;
        for (double x : v) mean += x / static_cast<double>(v.size());
        m[metric] = {{"mean", mean},
                     {"min", *std::min_element(v.begin(), v.end())},
                     {"max", *std::max_element(v.begin(), v.end())}};
      }
      summary[method] = m;
    }
  }
  json j = {{"config", json::parse(report.config_json)},
            {"scenario", report.scenario},
            {"warnings", report.warnings},
            {"repetitions", reps},
            {"summary", summary}};
  return j.dump(2) + "\n";
}

Report ReportFromJson(std::string_view json_text) {
  try {
    const json j = json::parse(json_text);
    Report report;
    report.config_json = j.at("config").dump(2);
    report.scenario = j.at("scenario").get<std::string>();
    report.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& r : j.at("repetitions")) {
      RepetitionResult rep;
      rep.repetition = r.at("repetition").get<std::size_t>();
      rep.seed = r.at("seed").get<std::uint64_t>();
      const auto w = r.at("weights").get<std::vector<double>>();
      if (w.size() != 3) throw FormatError("report weights must have 3 entries");
      rep.weights = {w[0], w[1], w[2]};
      rep.degenerate = r.at("degenerate").get<bool>();
      rep.shadow_samples = r.at("shadow_samples").get<std::size_t>();
      rep.shadow_attack = MetricsFrom(r.at("shadow_attack"));
      rep.shadow_baseline = MetricsFrom(r.at("shadow_baseline"));
      rep.truth = r.at("truth").get<std::vector<double>>();
      rep.prediction = r.at("prediction").get<std::vector<double>>();
      rep.baseline = r.at("baseline").get<std::vector<double>>();
      rep.attack = MetricsFrom(r.at("attack"));
      rep.baseline_metrics = MetricsFrom(r.at("baseline_metrics"));
      rep.accuracy = r.at("accuracy").get<std::vector<double>>();
      rep.seconds = r.at("seconds").get<double>();
      report.repetitions.push_back(std::move(rep));
    }
    return report;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

std::string MetricsCsv(const Report& report) {
  std::ostringstream out;
  out << "repetition,method,scenario,md,js,cs\n";
  for (const auto& r : report.repetitions) {
    for (const auto& [method, m] :
         {std::pair{"attack", r.attack}, std::pair{"baseline", r.baseline_metrics}}) {
      out << r.repetition << ',' << method << ',' << report.scenario << ',' << Num(m.manhattan)
          << ',' << Num(m.js) << ',' << Num(m.cosine) << '\n';
    }
  }
  return out.str();
}

std::string SweepCsv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "repetition,defense,value,accuracy,md,js,cs\n";
  for (const auto& r : rows) {
    out << r.repetition << ',' << defense::ToString(r.defense.kind) << ',' << Num(r.value) << ','
        << Num(r.final_accuracy) << ',' << Num(r.attack.manhattan) << ',' << Num(r.attack.js)
        << ',' << Num(r.attack.cosine) << '\n';
  }
  return out.str();
}

void EmitReport(const Report& report, const std::filesystem::path& out_dir,
                const std::vector<SweepRow>& sweep) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  WriteText(out_dir / "report.json", ReportToJson(report));
  WriteText(out_dir / "metrics.csv", MetricsCsv(report));
  if (!sweep.empty()) WriteText(out_dir / "sweep.csv", SweepCsv(sweep));
}

}  // namespace fedlisting::harness
