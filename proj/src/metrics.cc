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

#include "llg/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace llg {

double AttackSuccessRate(const LabelMultiset& extracted, const LabelMultiset& truth) {
  if (extracted.num_classes() != truth.num_classes()) {
    throw Error("label multisets cover different class counts");
  }
  if (extracted.total() != truth.total()) {
    throw Error("extracted " + std::to_string(extracted.total()) + " labels but the truth has " +
                std::to_string(truth.total()));
  }
  if (truth.total() <= 0) throw Error("ASR needs a non-empty label multiset");
  int overlap = 0;
  for (size_t i = 0; i < truth.num_classes(); ++i) {
    overlap += std::min(extracted.counts()[i], truth.counts()[i]);
  }
  return static_cast<double>(overlap) / truth.total();
}

double Hellinger(const LabelMultiset& p, const LabelMultiset& q) {
  if (p.num_classes() != q.num_classes()) throw Error("label multisets cover different class counts");
  if (p.total() <= 0 || q.total() <= 0) throw Error("Hellinger needs non-empty multisets");
  double sum = 0.0;
  for (size_t i = 0; i < p.num_classes(); ++i) {
    const double diff = std::sqrt(static_cast<double>(p.counts()[i]) / p.total()) -
                        std::sqrt(static_cast<double>(q.counts()[i]) / q.total());
    sum += diff * diff;
  }
  return std::min(1.0, std::sqrt(sum / 2.0));
}

double Pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("Pearson inputs differ in length");
  if (x.size() < 2) throw Error("Pearson needs at least 2 points");
  const double nd = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nd;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nd;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("Pearson correlation undefined for zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double TestAccuracy(const Network& net, const ClientDataset& test) {
  if (test.samples.empty()) throw Error("test set is empty");
  constexpr size_t kChunk = 256;
  size_t correct = 0;
  std::vector<size_t> idx;
  for (size_t start = 0; start < test.samples.size(); start += kChunk) {
    const size_t end = std::min(test.samples.size(), start + kChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor logits = net.Forward(StackFeatures(test, idx)).logits;
    for (size_t r = 0; r < idx.size(); ++r) {
      auto row = logits.row(r);
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      if (best + 1 == test.samples[idx[r]].label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test.samples.size());
}

}  // namespace llg
