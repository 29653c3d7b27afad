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

#include "fedlisting/federation.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>

#include "binary_io.hpp"
#include "fedlisting/common.hpp"

namespace fedlisting::federation {
namespace {

// a - b entrywise over identically shaped parameter sets.
nn::ModelParams Subtract(const nn::ModelParams& a, const nn::ModelParams& b) {
  nn::ModelParams out = a;
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    auto& w = out.layers[l].weight.values;
    const auto& bw = b.layers[l].weight.values;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= bw[i];
    auto& bias = out.layers[l].bias;
    for (std::size_t i = 0; i < bias.size(); ++i) bias[i] -= b.layers[l].bias[i];
  }
  return out;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

double ParseNumber(const std::string& cell, const std::filesystem::path& file) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw FormatError("bad number '" + cell + "' in " + file.string());
  }
}

// Data rows of a CSV with a header line.
std::vector<std::vector<std::string>> ReadCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing file: " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(SplitCsvLine(line));
  }
  return rows;
}

}  // namespace

ClientState ClientState::Make(std::uint32_t id, const graphstore::Graph& parent,
                              const graphstore::NodeSubset& nodes) {
  ClientState c;
  c.id = id;
  c.graph = graphstore::InducedSubgraph(parent, nodes);
  c.ahat = graphstore::NormalizeAdjacency(c.graph);
  c.labeled.resize(c.graph.num_nodes());
  std::iota(c.labeled.begin(), c.labeled.end(), 0u);
  c.distribution = partition::ComputeLabelDistribution(c.graph.labels(), c.graph.num_classes());
  return c;
}

EvalSet EvalSet::Make(const graphstore::Graph& parent, const graphstore::NodeSubset& nodes,
                      const graphstore::NodeSubset& test) {
  EvalSet e;
  e.graph = graphstore::InducedSubgraph(parent, nodes);
  e.ahat = graphstore::NormalizeAdjacency(e.graph);
  for (std::uint32_t u : test.indices) {
    const auto it = std::lower_bound(nodes.indices.begin(), nodes.indices.end(), u);
    if (it == nodes.indices.end() || *it != u) {
      throw ValidationError("test node " + std::to_string(u) + " outside the evaluation graph");
    }
    e.mask.push_back(static_cast<std::uint32_t>(it - nodes.indices.begin()));
  }
  if (e.mask.empty()) throw ValidationError("empty evaluation mask");
  return e;
}

void TrainingConfig::Validate() const {
  if (arch == nn::Architecture::kMlp) throw ValidationError("client models must be GNNs");
  if (hidden_dim == 0) throw ValidationError("hidden_dim must be >= 1");
  if (rounds == 0) throw ValidationError("rounds must be >= 1");
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate must be >= 0");
  defense.Validate();
}

LocalUpdate LocalTrain(ClientState& client, const nn::ModelParams& global, std::size_t epochs,
                       std::size_t batch_size, double learning_rate,
                       const defense::DefenseConfig& defense, std::uint64_t seed) {
  if (client.labeled.empty()) {
    throw ValidationError("client " + std::to_string(client.id) + " has no labeled nodes");
  }
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
  client.params = global;
  nn::AdamState adam = nn::AdamState::For(client.params, learning_rate);
  Rng rng(seed);
  std::vector<std::uint32_t> order = client.labeled;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      const std::span<const std::uint32_t> batch(order.data() + start, end - start);
      auto fwd = nn::GnnForward(client.params, client.graph, client.ahat);
      const auto loss = nn::SoftmaxCrossEntropy(fwd.logits, client.graph.labels(), batch);
      const auto grads = nn::GnnBackward(client.params, fwd.cache, loss.dlogits);
      nn::AdamStep(client.params, grads, adam);
    }
  }
  LocalUpdate out;
  if (defense.kind == defense::DefenseKind::kNone) {
    // In float32, g - (g - c) can miss c by an ulp. Snapping the trained
    // params onto g - (g - c) once makes the server's delta exactly
    // invertible, so global_prev - delta reproduces the upload bit for bit.
    client.params = Subtract(global, Subtract(global, client.params));
    out.uploaded = client.params;
  } else {
    defense::DefenseConfig cfg = defense;
    cfg.seed = DeriveSeed(seed, {TagHash("defense")});
    const auto defended = defense::ApplyDefense(Subtract(global, client.params), cfg);
    out.uploaded = Subtract(global, defended);
  }
  const auto before = nn::FlattenLastLayer(global);
  const auto after = nn::FlattenLastLayer(out.uploaded);
  out.delta.resize(before.size());
  for (std::size_t i = 0; i < before.size(); ++i) out.delta[i] = before[i] - after[i];
  return out;
}

nn::ModelParams FedAvg(std::span<const nn::ModelParams> updates, std::span<const double> weights) {
  if (updates.empty()) throw ValidationError("FedAvg needs at least one update");
  if (updates.size() != weights.size()) throw ValidationError("one weight per update required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("FedAvg weights must be nonnegative");
    total += w;
  }
  if (total <= 0.0) throw ValidationError("FedAvg weights are all zero");
  for (const auto& u : updates) {
    if (!u.SameShape(updates[0])) throw ValidationError("FedAvg shape mismatch");
  }
  nn::ModelParams out = updates[0];
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    auto average = [&](auto member, std::vector<float>& dst) {
      std::vector<double> acc(dst.size(), 0.0);
      for (std::size_t k = 0; k < updates.size(); ++k) {
        const double share = weights[k] / total;
        const std::vector<float>& src = member(updates[k].layers[l]);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += share * src[i];
      }
      for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<float>(acc[i]);
    };
    average([](const nn::LayerParams& p) -> const std::vector<float>& { return p.weight.values; },
            out.layers[l].weight.values);
    average([](const nn::LayerParams& p) -> const std::vector<float>& { return p.bias; },
            out.layers[l].bias);
  }
  return out;
}

FedRunResult RunFederation(std::vector<ClientState>& clients, const TrainingConfig& cfg,
                           const EvalSet* eval) {
  cfg.Validate();
  if (clients.empty()) throw ValidationError("federation needs at least one client");
  const graphstore::Graph& first = clients[0].graph;
  FedRunResult result;
  result.global = nn::InitGnn(cfg.arch, first.num_features(), cfg.hidden_dim, first.num_classes(),
                              DeriveSeed(cfg.seed, {TagHash("global_init")}));
  for (const auto& c : clients) {
    if (c.graph.num_features() != first.num_features() ||
        c.graph.num_classes() != first.num_classes()) {
      throw ValidationError("clients disagree on feature or class count");
    }
    result.records.push_back({c.id, {}});
    result.distributions.push_back(c.distribution);
  }
  std::vector<double> weights;
  for (const auto& c : clients) weights.push_back(static_cast<double>(c.num_samples()));

  std::vector<LocalUpdate> updates(clients.size());
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    auto train = [&](std::size_t k) {
      updates[k] = LocalTrain(clients[k], result.global, cfg.local_epochs, cfg.batch_size,
                              cfg.learning_rate, cfg.defense,
                              DeriveSeed(cfg.seed, {TagHash("local_train"), clients[k].id, r}));
    };
    if (cfg.parallel_clients) {
      ParallelFor(clients.size(), train);
    } else {
      for (std::size_t k = 0; k < clients.size(); ++k) train(k);
    }
    std::vector<nn::ModelParams> uploads;
    uploads.reserve(clients.size());
    for (std::size_t k = 0; k < clients.size(); ++k) {
      result.records[k].rounds.push_back(std::move(updates[k].delta));
      uploads.push_back(std::move(updates[k].uploaded));
    }
    result.global = FedAvg(uploads, weights);
    if (eval) result.accuracy.push_back(Evaluate(result.global, eval->graph, eval->ahat, eval->mask));
  }
  return result;
}

double Evaluate(const nn::ModelParams& params, const graphstore::Graph& g,
                const graphstore::NormalizedAdjacency& ahat, std::span<const std::uint32_t> mask) {
  if (mask.empty()) throw ValidationError("empty evaluation mask");
  const auto fwd = nn::GnnForward(params, g, ahat);
  const auto pred = nn::ArgmaxRows(fwd.logits);
  std::size_t hits = 0;
  for (std::uint32_t u : mask) {
    if (u >= g.num_nodes()) throw ValidationError("evaluation mask out of range");
    hits += pred[u] == g.labels()[u];
  }
  return static_cast<double>(hits) / static_cast<double>(mask.size());
}

double Evaluate(const nn::ModelParams& params, const graphstore::Graph& g,
                std::span<const std::uint32_t> mask) {
  return Evaluate(params, g, graphstore::NormalizeAdjacency(g), mask);
}

void WriteFedRun(const FedRunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::uint32_t clients = static_cast<std::uint32_t>(result.records.size());
  const std::uint32_t rounds =
      clients ? static_cast<std::uint32_t>(result.records[0].rounds.size()) : 0;
  const std::uint32_t vec_len =
      rounds ? static_cast<std::uint32_t>(result.records[0].rounds[0].size()) : 0;
  {
    const auto path = dir / "gradients.bin";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    binary_io::Put(out, clients);
    binary_io::Put(out, rounds);
    binary_io::Put(out, vec_len);
    for (const auto& rec : result.records) {
      if (rec.rounds.size() != rounds) throw ValidationError("ragged gradient records");
      for (const auto& v : rec.rounds) {
        if (v.size() != vec_len) throw ValidationError("ragged gradient records");
        binary_io::Put(out, std::span<const float>(v));
      }
    }
    if (!out) throw IoError("write failed: " + path.string());
  }
  {
    const auto path = dir / "labels_dist.csv";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    const std::size_t t = result.distributions.empty() ? 0 : result.distributions[0].size();
    out << "client_id";
    for (std::size_t c = 0; c < t; ++c) out << ",p" << c;
    out << '\n' << std::setprecision(17);
    for (std::size_t k = 0; k < result.distributions.size(); ++k) {
      out << result.records[k].client_id;
      for (double p : result.distributions[k]) out << ',' << p;
      out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
  }
  {
    const auto path = dir / "accuracy.csv";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "round,accuracy\n" << std::setprecision(17);
    for (std::size_t r = 0; r < result.accuracy.size(); ++r) {
      out << r + 1 << ',' << result.accuracy[r] << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
  }
  {
    const auto path = dir / "global.ckpt";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    nn::WriteCheckpoint(out, result.global);
    if (!out) throw IoError("write failed: " + path.string());
  }
}

FedRunResult ReadFedRun(const std::filesystem::path& dir) {
  FedRunResult result;
  const auto grad_path = dir / "gradients.bin";
  binary_io::Cursor cur(binary_io::ReadFile(grad_path), grad_path.string());
  const auto clients = cur.Read<std::uint32_t>();
  const auto rounds = cur.Read<std::uint32_t>();
  const auto vec_len = cur.Read<std::uint32_t>();
  const std::uint64_t expected = std::uint64_t{clients} * rounds * vec_len * sizeof(float);
  if (cur.remaining() != expected) {
    throw FormatError("size mismatch in " + grad_path.string() + ": expected " +
                      std::to_string(expected + 12) + " bytes");
  }
  for (std::uint32_t k = 0; k < clients; ++k) {
    GradientRecord rec;
    rec.rounds.assign(rounds, std::vector<float>(vec_len));
    for (auto& v : rec.rounds) cur.Read(std::span<float>(v));
    result.records.push_back(std::move(rec));
  }

  const auto dist_path = dir / "labels_dist.csv";
  const auto rows = ReadCsv(dist_path);
  if (rows.size() != clients) throw FormatError("client count mismatch in " + dist_path.string());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() < 2) throw FormatError("short row in " + dist_path.string());
    result.records[k].client_id = static_cast<std::uint32_t>(ParseNumber(rows[k][0], dist_path));
    LabelDistribution d;
    for (std::size_t c = 1; c < rows[k].size(); ++c) d.push_back(ParseNumber(rows[k][c], dist_path));
    result.distributions.push_back(std::move(d));
  }

  const auto acc_path = dir / "accuracy.csv";
  for (const auto& row : ReadCsv(acc_path)) {
    if (row.size() != 2) throw FormatError("bad row in " + acc_path.string());
    result.accuracy.push_back(ParseNumber(row[1], acc_path));
  }

  const auto ckpt_path = dir / "global.ckpt";
  std::ifstream ckpt(ckpt_path, std::ios::binary);
  if (!ckpt) throw FormatError("missing file: " + ckpt_path.string());
  result.global = nn::ReadCheckpoint(ckpt);
  return result;
}

}  // namespace fedlisting::federation
