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

#include "llg/data.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>

namespace llg {
namespace {

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<unsigned char> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::kIo, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

uint32_t ReadBigEndian32(const std::vector<unsigned char>& bytes, size_t offset,
                         const std::string& path) {
  if (offset + 4 > bytes.size()) {
    throw IdxError(IdxError::Kind::kTruncated, path + ": truncated header");
  }
  return (uint32_t{bytes[offset]} << 24) | (uint32_t{bytes[offset + 1]} << 16) |
         (uint32_t{bytes[offset + 2]} << 8) | uint32_t{bytes[offset + 3]};
}

}  // namespace

std::vector<std::vector<size_t>> ClientDataset::IndicesByLabel() const {
  std::vector<std::vector<size_t>> out(num_classes);
  for (size_t i = 0; i < samples.size(); ++i) {
    out.at(static_cast<size_t>(samples[i].label - 1)).push_back(i);
  }
  return out;
}

void ClientDataset::Validate() const {
  if (samples.empty()) throw Error("dataset is empty");
  if (num_classes < 2) throw Error("dataset needs at least 2 classes");
  const size_t dim = input_dim();
  if (dim == 0) throw Error("samples must have at least one feature");
  for (const auto& s : samples) {
    if (s.features.size() != dim) throw ShapeError("samples have different feature counts");
    if (s.label < 1 || static_cast<size_t>(s.label) > num_classes) {
      throw Error("sample label " + std::to_string(s.label) + " outside [1, " +
                  std::to_string(num_classes) + "]");
    }
  }
}

Tensor StackFeatures(const ClientDataset& data, std::span<const size_t> indices) {
  const size_t dim = data.input_dim();
  std::vector<double> flat;
  flat.reserve(indices.size() * dim);
  for (size_t idx : indices) {
    const auto& f = data.samples.at(idx).features;
    flat.insert(flat.end(), f.begin(), f.end());
  }
  return Tensor({indices.size(), dim}, std::move(flat));
}

SyntheticData SynthGenerate(const SyntheticSpec& spec) {
  if (spec.n_classes < 2) throw Error("synthetic data needs n_classes >= 2");
  if (spec.samples_per_class < 1) throw Error("synthetic data needs samples_per_class >= 1");
  if (spec.input_dim < 1) throw Error("synthetic data needs input_dim >= 1");
  if (spec.spread < 0.0 || !std::isfinite(spec.spread)) throw Error("spread must be >= 0");

  Rng rng(DeriveSeed(spec.seed, {0x5e7}));
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticData out;
  out.anchors.resize(spec.n_classes);
  for (auto& anchor : out.anchors) {
    double norm = 0.0;
    do {
      anchor.assign(spec.input_dim, 0.0);
      norm = 0.0;
      for (double& v : anchor) {
        v = normal(rng);
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : anchor) v /= norm;
  }

  const size_t train_per_class = std::max<size_t>(1, (spec.samples_per_class * 4) / 5);
  for (auto* split : {&out.train, &out.test}) split->num_classes = spec.n_classes;
  for (size_t c = 0; c < spec.n_classes; ++c) {
    for (size_t k = 0; k < spec.samples_per_class; ++k) {
      Sample s;
      s.label = static_cast<Label>(c + 1);
      s.features = out.anchors[c];
      for (double& v : s.features) v += spec.spread * normal(rng);
      (k < train_per_class ? out.train : out.test).samples.push_back(std::move(s));
    }
  }
  return out;
}

ClientDataset LoadIdx(const std::string& images_path, const std::string& labels_path) {
  const auto images = ReadFile(images_path);
  const auto labels = ReadFile(labels_path);

  if (ReadBigEndian32(images, 0, images_path) != kIdxImagesMagic) {
    throw IdxError(IdxError::Kind::kWrongMagic, images_path + ": not an IDX image file");
  }
  if (ReadBigEndian32(labels, 0, labels_path) != kIdxLabelsMagic) {
    throw IdxError(IdxError::Kind::kWrongMagic, labels_path + ": not an IDX label file");
  }
  const uint32_t count = ReadBigEndian32(images, 4, images_path);
  const uint32_t rows = ReadBigEndian32(images, 8, images_path);
  const uint32_t cols = ReadBigEndian32(images, 12, images_path);
  const uint32_t label_count = ReadBigEndian32(labels, 4, labels_path);
  if (count != label_count) {
    throw IdxError(IdxError::Kind::kCountMismatch,
                   std::to_string(count) + " images but " + std::to_string(label_count) + " labels");
  }
  const size_t pixels = size_t{rows} * cols;
  if (images.size() < 16 + size_t{count} * pixels) {
    throw IdxError(IdxError::Kind::kTruncated, images_path + ": truncated pixel data");
  }
  if (labels.size() < 8 + size_t{count}) {
    throw IdxError(IdxError::Kind::kTruncated, labels_path + ": truncated label data");
  }

  ClientDataset out;
  unsigned char max_label = 0;
  out.samples.resize(count);
  for (size_t i = 0; i < count; ++i) {
    auto& s = out.samples[i];
    s.features.resize(pixels);
    const unsigned char* px = images.data() + 16 + i * pixels;
    for (size_t p = 0; p < pixels; ++p) s.features[p] = px[p] / 255.0;
    const unsigned char raw = labels[8 + i];
    max_label = std::max(max_label, raw);
    s.label = static_cast<Label>(raw) + 1;
  }
  out.num_classes = static_cast<size_t>(max_label) + 1;
  return out;
}

std::vector<ClientDataset> PartitionUnbalanced(const ClientDataset& pool, size_t num_clients,
                                               double dominant_fraction, Rng& rng) {
  pool.Validate();
  if (num_clients == 0 || num_clients > pool.samples.size()) {
    throw Error("cannot split " + std::to_string(pool.samples.size()) + " samples across " +
                std::to_string(num_clients) + " clients");
  }
  if (dominant_fraction < 0.0 || dominant_fraction > 1.0) {
    throw Error("dominant_fraction must be in [0, 1]");
  }

  auto by_label = pool.IndicesByLabel();
  for (auto& bucket : by_label) std::shuffle(bucket.begin(), bucket.end(), rng);

  const size_t total = pool.samples.size();
  std::vector<ClientDataset> clients(num_clients);
  std::vector<size_t> capacity(num_clients);
  std::vector<bool> taken(total, false);
  for (size_t u = 0; u < num_clients; ++u) {
    clients[u].client_id = static_cast<int>(u);
    clients[u].num_classes = pool.num_classes;
    capacity[u] = total / num_clients + (u < total % num_clients ? 1 : 0);
    auto& bucket = by_label[u % pool.num_classes];
    const auto quota = static_cast<size_t>(dominant_fraction * static_cast<double>(capacity[u]));
    for (size_t k = 0; k < quota && !bucket.empty(); ++k) {
      const size_t idx = bucket.back();
      bucket.pop_back();
      taken[idx] = true;
      clients[u].samples.push_back(pool.samples[idx]);
    }
  }

  std::vector<size_t> rest;
  for (size_t i = 0; i < total; ++i) {
    if (!taken[i]) rest.push_back(i);
  }
  std::shuffle(rest.begin(), rest.end(), rng);
  size_t next = 0;
  for (size_t u = 0; u < num_clients; ++u) {
    while (clients[u].samples.size() < capacity[u]) {
      clients[u].samples.push_back(pool.samples[rest[next++]]);
    }
  }
  return clients;
}

}  // namespace llg
