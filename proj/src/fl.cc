/*
 * Copyright 2026 The LLG Lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "llg/fl.h"

#include <algorithm>
#include <numeric>
#include <utility>

#include "llg/loss.h"
#include "llg/parallel.h"

namespace llg {
namespace {

// Appends `count` draws from `pool` to `out`, skipping indices already in
// `used` while enough unused ones remain.
void Draw(const std::vector<size_t>& pool, size_t count, std::vector<bool>& used,
          std::vector<size_t>& out, Rng& rng) {
  if (count == 0) return;
  std::vector<size_t> fresh;
  for (size_t idx : pool) {
    if (!used[idx]) fresh.push_back(idx);
  }
  if (fresh.size() >= count) {
    // Partial Fisher-Yates.
    for (size_t k = 0; k < count; ++k) {
      std::uniform_int_distribution<size_t> pick(k, fresh.size() - 1);
      std::swap(fresh[k], fresh[pick(rng)]);
      used[fresh[k]] = true;
      out.push_back(fresh[k]);
    }
    return;
  }
  std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
  for (size_t k = 0; k < count; ++k) {
    const size_t idx = pool[pick(rng)];
    used[idx] = true;
    out.push_back(idx);
  }
}

}  // namespace

std::string BalanceName(Balance balance) {
  return balance == Balance::kBalanced ? "balanced" : "unbalanced";
}

Balance ParseBalance(const std::string& name) {
  if (name == "balanced") return Balance::kBalanced;
  if (name == "unbalanced") return Balance::kUnbalanced;
  throw Error("unknown balance '" + name + "' (expected balanced or unbalanced)");
}

std::string AlgorithmName(Algorithm algorithm) {
  return algorithm == Algorithm::kFedSgd ? "fedsgd" : "fedavg";
}

Algorithm ParseAlgorithm(const std::string& name) {
  if (name == "fedsgd") return Algorithm::kFedSgd;
  if (name == "fedavg") return Algorithm::kFedAvg;
  throw Error("unknown algorithm '" + name + "' (expected fedsgd or fedavg)");
}

BatchSpec PinUnbalancedLabels(const ClientDataset& data, BatchSpec spec, Rng& rng) {
  if (spec.balance == Balance::kBalanced) return spec;
  const auto by_label = data.IndicesByLabel();
  std::vector<Label> present;
  for (size_t i = 0; i < by_label.size(); ++i) {
    if (!by_label[i].empty()) present.push_back(static_cast<Label>(i + 1));
  }
  if (present.size() < 2) throw Error("unbalanced batches need at least 2 distinct labels");
  auto is_present = [&](Label l) {
    return std::find(present.begin(), present.end(), l) != present.end();
  };

  if (spec.dominant_label) {
    if (!is_present(*spec.dominant_label)) throw Error("dominant label not present in the dataset");
  } else {
    std::uniform_int_distribution<size_t> pick(0, present.size() - 1);
    spec.dominant_label = present[pick(rng)];
  }
  if (spec.secondary_label) {
    if (*spec.secondary_label == *spec.dominant_label || !is_present(*spec.secondary_label)) {
      throw Error("secondary label must differ from the dominant label and be present");
    }
  } else {
    std::vector<Label> others;
    std::copy_if(present.begin(), present.end(), std::back_inserter(others),
                 [&](Label l) { return l != *spec.dominant_label; });
    std::uniform_int_distribution<size_t> pick(0, others.size() - 1);
    spec.secondary_label = others[pick(rng)];
  }
  return spec;
}

Batch MakeBatch(const ClientDataset& data, const BatchSpec& spec_in, Rng& rng) {
  if (spec_in.size < 1) throw Error("batch size must be >= 1");
  if (data.samples.empty()) throw Error("cannot draw a batch from an empty dataset");
  const auto batch_size = static_cast<size_t>(spec_in.size);

  std::vector<size_t> all(data.samples.size());
  std::iota(all.begin(), all.end(), size_t{0});
  std::vector<bool> used(data.samples.size(), false);
  std::vector<size_t> chosen;
  chosen.reserve(batch_size);

  if (spec_in.balance == Balance::kBalanced) {
    Draw(all, batch_size, used, chosen, rng);
  } else {
    const BatchSpec spec = PinUnbalancedLabels(data, spec_in, rng);
    const auto by_label = data.IndicesByLabel();
    const size_t half = batch_size / 2, quarter = batch_size / 4;
    Draw(by_label[static_cast<size_t>(*spec.dominant_label - 1)], half, used, chosen, rng);
    Draw(by_label[static_cast<size_t>(*spec.secondary_label - 1)], quarter, used, chosen, rng);
    Draw(all, batch_size - half - quarter, used, chosen, rng);
  }

  Batch batch;
  batch.inputs = StackFeatures(data, chosen);
  batch.labels.reserve(chosen.size());
  for (size_t idx : chosen) batch.labels.push_back(data.samples[idx].label);
  batch.truth = LabelMultiset::FromLabels(batch.labels, data.num_classes);
  return batch;
}

RoundUpdate LocalTrainFedSgd(Network& net, const Batch& batch, double eta, bool train) {
  BatchGradients bg = ComputeBatchGradients(net, batch.inputs, batch.labels);
  RoundUpdate update;
  update.algorithm = Algorithm::kFedSgd;
  update.gamma = 1;
  update.sample_count = static_cast<int>(batch.labels.size());
  update.truth = batch.truth;
  if (train) net.SgdStep(bg.grads, eta);
  update.grads = std::move(bg.grads);
  update.last_layer = std::move(bg.last_layer);
  return update;
}

RoundUpdate LocalTrainFedAvg(const Network& net, const ClientDataset& data, const BatchSpec& spec,
                             int gamma, double eta, Rng& rng) {
  if (gamma < 1) throw Error("FedAvg needs gamma >= 1");
  Network local = net;
  RoundUpdate update;
  update.algorithm = Algorithm::kFedAvg;
  update.gamma = gamma;
  update.grads = net.ZeroGradients();
  update.truth = LabelMultiset(data.num_classes);
  const BatchSpec pinned = PinUnbalancedLabels(data, spec, rng);
  for (int step = 0; step < gamma; ++step) {
    Batch batch = MakeBatch(data, pinned, rng);
    BatchGradients bg = ComputeBatchGradients(local, batch.inputs, batch.labels);
    update.grads.Axpy(1.0, bg.grads);
    local.SgdStep(bg.grads, eta);
    for (Label l : batch.labels) update.truth.Add(l);
    update.sample_count += static_cast<int>(batch.labels.size());
  }
  update.last_layer = net.LastLayer(update.grads, update.sample_count);
  return update;
}

void ServerAggregate(std::span<const RoundUpdate> updates, Network& global, double eta) {
  if (updates.empty()) throw Error("aggregation needs at least one update");
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.sample_count < 1) throw Error("update with no samples");
    total += u.sample_count;
  }
  Gradients combined = global.ZeroGradients();
  for (const auto& u : updates) combined.Axpy(u.sample_count / total, u.grads);
  global.SgdStep(combined, eta);
}

Federation::Federation(Network global, std::vector<ClientDataset> clients, FederationConfig config)
    : global_(std::move(global)), clients_(std::move(clients)), config_(std::move(config)) {
  if (clients_.empty()) throw Error("a federation needs at least one client");
  if (config_.clients_per_round < 1 || config_.clients_per_round > clients_.size()) {
    throw Error("clients_per_round must be in [1, number of clients]");
  }
  for (const auto& c : clients_) c.Validate();
  defenders_.reserve(clients_.size());
  for (size_t i = 0; i < clients_.size(); ++i) defenders_.emplace_back(config_.defense);
}

RoundUpdate Federation::TrainClient(size_t client, int round) {
  Rng rng = MakeRng(config_.seed, {0xc11e, client, static_cast<uint64_t>(round)});
  RoundUpdate update;
  if (config_.algorithm == Algorithm::kFedSgd) {
    Network local = global_;
    Batch batch = MakeBatch(clients_[client], config_.batch, rng);
    update = LocalTrainFedSgd(local, batch, config_.eta, /*train=*/false);
  } else {
    update = LocalTrainFedAvg(global_, clients_[client], config_.batch, config_.gamma,
                              config_.eta, rng);
  }
  update.client_id = clients_[client].client_id;
  if (config_.defense.kind != DefenseKind::kNone) {
    update.grads = defenders_[client].Apply(update.grads, rng);
    update.last_layer = global_.LastLayer(update.grads, update.sample_count);
  }
  return update;
}

RoundResult Federation::RunRound(int round) {
  RoundResult result;
  result.round = round;
  Rng select = MakeRng(config_.seed, {0x5e1ec7, static_cast<uint64_t>(round)});
  std::vector<int> others(clients_.size() - 1);
  std::iota(others.begin(), others.end(), 1);
  std::shuffle(others.begin(), others.end(), select);
  result.participants.push_back(0);
  result.participants.insert(result.participants.end(), others.begin(),
                             others.begin() + static_cast<std::ptrdiff_t>(config_.clients_per_round - 1));

  std::vector<RoundUpdate> updates(result.participants.size());
  ParallelFor(updates.size(), config_.workers, [&](size_t k) {
    updates[k] = TrainClient(static_cast<size_t>(result.participants[k]), round);
  });
  ServerAggregate(updates, global_, config_.eta);
  result.victim = std::move(updates.front());
  return result;
}

}  // namespace llg
