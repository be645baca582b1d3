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

#include "llg/loss.h"

#include <algorithm>
#include <cmath>

namespace llg {

LossResult CrossEntropyLoss(const Tensor& logits, std::span<const Label> labels) {
  const size_t batch = logits.rows(), n = logits.cols();
  if (logits.rank() != 2 || batch == 0) throw ShapeError("logits must be a B x n matrix");
  if (labels.size() != batch) {
    throw ShapeError("got " + std::to_string(labels.size()) + " labels for a batch of " +
                     std::to_string(batch));
  }
  for (Label l : labels) {
    if (l < 1 || static_cast<size_t>(l) > n) {
      throw Error("label " + std::to_string(l) + " outside [1, " + std::to_string(n) + "]");
    }
  }

  LossResult out;
  out.d.assign(n, 0.0);
  out.dlogits = Tensor({batch, n});
  const double inv_batch = 1.0 / static_cast<double>(batch);
  std::vector<double> p(n);
  for (size_t s = 0; s < batch; ++s) {
    auto row = logits.row(s);
    const double max_logit = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (size_t i = 0; i < n; ++i) {
      p[i] = std::exp(row[i] - max_logit);
      z += p[i];
    }
    const auto target = static_cast<size_t>(labels[s] - 1);
    out.loss += (std::log(z) - (row[target] - max_logit)) * inv_batch;
    for (size_t i = 0; i < n; ++i) {
      const double grad = (p[i] / z - (i == target ? 1.0 : 0.0)) * inv_batch;
      out.dlogits(s, i) = grad;
      out.d[i] += grad;
    }
  }
  return out;
}

BatchGradients ComputeBatchGradients(const Network& net, const Tensor& inputs,
                                     std::span<const Label> labels) {
  ForwardPass pass = net.Forward(inputs);
  LossResult loss = CrossEntropyLoss(pass.logits, labels);
  BatchGradients out;
  out.loss = loss.loss;
  out.grads = net.Backward(pass.cache, loss.dlogits);
  out.last_layer = net.LastLayer(out.grads, static_cast<int>(labels.size()));
  return out;
}

}  // namespace llg
