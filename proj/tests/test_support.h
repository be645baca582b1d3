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

// Helpers shared by the unit tests and the acceptance binary.

#ifndef LLG_TESTS_TEST_SUPPORT_H_
#define LLG_TESTS_TEST_SUPPORT_H_

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "llg/labels.h"
#include "llg/loss.h"
#include "llg/network.h"
#include "llg/rng.h"

namespace llg::testing {

inline Tensor RandomInputs(const Network& net, size_t batch, Rng& rng, double lo = -1.0,
                           double hi = 1.0) {
  Shape shape{batch};
  for (size_t d : net.input_shape()) shape.push_back(d);
  Tensor t(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline std::vector<Label> RandomLabels(size_t batch, size_t n, Rng& rng) {
  std::uniform_int_distribution<Label> pick(1, static_cast<Label>(n));
  std::vector<Label> labels(batch);
  for (auto& l : labels) l = pick(rng);
  return labels;
}

struct FiniteDifferenceReport {
  size_t checked = 0;
  size_t failed = 0;
  double worst = 0.0;
};

// Compares every parameter gradient of the batch-mean cross-entropy against a
// central difference with the given step. Entries where both values are below
// `floor` in magnitude count as agreeing.
inline FiniteDifferenceReport CheckFiniteDifferences(Network net, const Tensor& inputs,
                                                     const std::vector<Label>& labels,
                                                     double step = 1e-4, double tolerance = 1e-3,
                                                     double floor = 1e-7) {
  const Gradients analytic = ComputeBatchGradients(net, inputs, labels).grads;
  auto loss = [&](const Network& m) {
    return CrossEntropyLoss(m.Forward(inputs).logits, labels).loss;
  };
  FiniteDifferenceReport report;
  for (size_t p = 0; p < net.parameters().size(); ++p) {
    for (size_t k = 0; k < net.parameters()[p].size(); ++k) {
      const double original = net.parameters()[p][k];
      net.mutable_parameters()[p][k] = original + step;
      const double up = loss(net);
      net.mutable_parameters()[p][k] = original - step;
      const double down = loss(net);
      net.mutable_parameters()[p][k] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double exact = analytic.tensors[p][k];
      ++report.checked;
      const double scale = std::max(std::abs(numeric), std::abs(exact));
      if (scale < floor) continue;
      const double rel = std::abs(numeric - exact) / scale;
      report.worst = std::max(report.worst, rel);
      if (rel > tolerance) ++report.failed;
    }
  }
  return report;
}

// A small random network: an MLP with one or two hidden layers or a tiny CNN.
inline Network RandomSmallNetwork(uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_int_distribution<size_t> width(2, 6);
  const size_t n = width(rng);
  switch (kind(rng)) {
    case 0: {
      const size_t in = width(rng), hidden = width(rng);
      const auto act = (rng() & 1) ? ActivationKind::kSigmoid : ActivationKind::kRelu;
      return Network::Mlp(in, hidden, n, seed, act);
    }
    case 1: {
      const size_t in = width(rng), h1 = width(rng), h2 = width(rng);
      return Network({DenseSpec{in, h1}, ActivationSpec{ActivationKind::kSigmoid},
                      DenseSpec{h1, h2}, ActivationSpec{ActivationKind::kSigmoid},
                      DenseSpec{h2, n}},
                     {in}, seed);
    }
    default:
      return Network({Conv2dSpec{1, 2, 2, 1}, ActivationSpec{ActivationKind::kSigmoid},
                      FlattenSpec{}, DenseSpec{2 * 3 * 3, n}},
                     {1, 4, 4}, seed);
  }
}

}  // namespace llg::testing

#endif  // LLG_TESTS_TEST_SUPPORT_H_
