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

#ifndef LLG_DATA_H_
#define LLG_DATA_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "llg/labels.h"
#include "llg/rng.h"
#include "llg/tensor.h"

namespace llg {

struct Sample {
  std::vector<double> features;
  Label label = 1;
};

struct ClientDataset {
  int client_id = 0;
  size_t num_classes = 0;
  std::vector<Sample> samples;

  size_t input_dim() const { return samples.empty() ? 0 : samples.front().features.size(); }
  // Indices of the samples carrying each label; index [label - 1].
  std::vector<std::vector<size_t>> IndicesByLabel() const;
  // Throws unless the dataset is non-empty, uniformly sized and labelled in
  // [1, num_classes].
  void Validate() const;
};

// Stacks the selected samples into a B x input_dim batch.
Tensor StackFeatures(const ClientDataset& data, std::span<const size_t> indices);

struct SyntheticSpec {
  size_t n_classes = 10;
  size_t input_dim = 64;
  size_t samples_per_class = 500;
  double spread = 0.3;  // per-coordinate std of each class cluster
  uint64_t seed = 1;
};

struct SyntheticData {
  ClientDataset train;
  ClientDataset test;
  std::vector<std::vector<double>> anchors;  // class means, unit norm
};

// Gaussian clusters around random unit-norm class anchors, split 80/20 per
// class into train and test. Deterministic in spec.seed.
SyntheticData SynthGenerate(const SyntheticSpec& spec);

class IdxError : public Error {
 public:
  enum class Kind { kIo, kWrongMagic, kTruncated, kCountMismatch };
  IdxError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// Pixels are scaled to [0, 1] and labels shifted by one, so raw labels 0..9
// become 1..10.
ClientDataset LoadIdx(const std::string& images_path, const std::string& labels_path);

// Splits pool into num_clients disjoint datasets that together hold every
// sample exactly once. Client u is assigned dominant label (u mod n) + 1 and
// receives up to dominant_fraction of its share from that label; the rest is
// dealt from the shuffled remainder.
std::vector<ClientDataset> PartitionUnbalanced(const ClientDataset& pool, size_t num_clients,
                                               double dominant_fraction, Rng& rng);

}  // namespace llg

#endif  // LLG_DATA_H_
