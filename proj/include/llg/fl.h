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

// Federated training: batch construction, FedSGD / FedAvg local training,
// weighted server aggregation and multi-round orchestration.

#ifndef LLG_FL_H_
#define LLG_FL_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "llg/data.h"
#include "llg/defenses.h"
#include "llg/labels.h"
#include "llg/network.h"
#include "llg/rng.h"

namespace llg {

enum class Balance { kBalanced, kUnbalanced };

std::string BalanceName(Balance balance);
Balance ParseBalance(const std::string& name);

struct BatchSpec {
  int size = 8;
  Balance balance = Balance::kUnbalanced;
  // Unbalanced batches draw these per batch unless pinned here.
  std::optional<Label> dominant_label;
  std::optional<Label> secondary_label;
};

struct Batch {
  Tensor inputs;
  std::vector<Label> labels;
  LabelMultiset truth;
};

// Balanced: every sample drawn uniformly from the dataset. Unbalanced:
// floor(B/2) samples of a dominant label, floor(B/4) of a different secondary
// label, the remainder uniformly from the dataset. Samples are drawn without
// replacement while the pool allows it, with replacement otherwise.
Batch MakeBatch(const ClientDataset& data, const BatchSpec& spec, Rng& rng);

// Fills in the dominant and secondary labels of an unbalanced spec that are
// not pinned yet, drawing them the way MakeBatch would. Balanced specs are
// returned unchanged.
BatchSpec PinUnbalancedLabels(const ClientDataset& data, BatchSpec spec, Rng& rng);

enum class Algorithm { kFedSgd, kFedAvg };

std::string AlgorithmName(Algorithm algorithm);
Algorithm ParseAlgorithm(const std::string& name);

// One client's contribution to a round.
struct RoundUpdate {
  int client_id = 0;
  Algorithm algorithm = Algorithm::kFedSgd;
  int gamma = 1;
  // v_k: B for FedSGD, gamma * B for FedAvg.
  int sample_count = 0;
  // Shared gradient over all parameters; for FedAvg the sum of the gamma
  // per-step gradients.
  Gradients grads;
  LastLayerGradient last_layer;
  // Ground-truth labels behind the update. Never shown to an attacker.
  LabelMultiset truth;
};

// One forward/backward pass on the batch. If train is set, net also takes an
// SGD step with learning rate eta.
RoundUpdate LocalTrainFedSgd(Network& net, const Batch& batch, double eta, bool train);

// gamma sequential batches on a local copy of net, one SGD step each. The
// unbalanced labels are drawn once, so all gamma batches share them. The
// shared gradient is the sum of the per-step gradients, so eta * grads equals
// the drift of the local model.
RoundUpdate LocalTrainFedAvg(const Network& net, const ClientDataset& data, const BatchSpec& spec,
                             int gamma, double eta, Rng& rng);

// W <- W - eta * sum_k (v_k / v) grad_k with v = sum_k v_k.
void ServerAggregate(std::span<const RoundUpdate> updates, Network& global, double eta);

struct FederationConfig {
  Algorithm algorithm = Algorithm::kFedSgd;
  int gamma = 10;
  BatchSpec batch;
  size_t clients_per_round = 10;
  double eta = 0.1;
  uint64_t seed = 1;
  DefenseSpec defense;
  int workers = 1;
};

struct RoundResult {
  int round = 0;
  std::vector<int> participants;
  // Client 0's update as shared (after its defense), exactly what an observer
  // of the victim sees.
  RoundUpdate victim;
};

// A server plus its clients. Client 0 is the victim and takes part in every
// round; the other clients_per_round - 1 participants are drawn uniformly
// without replacement from the rest. Every random stream is derived from
// (seed, client, round), so results do not depend on the worker count.
class Federation {
 public:
  Federation(Network global, std::vector<ClientDataset> clients, FederationConfig config);

  RoundResult RunRound(int round);

  const Network& global() const { return global_; }
  const std::vector<ClientDataset>& clients() const { return clients_; }
  const FederationConfig& config() const { return config_; }

 private:
  RoundUpdate TrainClient(size_t client, int round);

  Network global_;
  std::vector<ClientDataset> clients_;
  FederationConfig config_;
  std::vector<Defender> defenders_;
};

}  // namespace llg

#endif  // LLG_FL_H_
