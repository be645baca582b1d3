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

#ifndef LLG_LOSS_H_
#define LLG_LOSS_H_

#include <span>
#include <vector>

#include "llg/labels.h"
#include "llg/network.h"
#include "llg/tensor.h"

namespace llg {

struct LossResult {
  // Batch-mean softmax cross-entropy.
  double loss = 0.0;
  // d_i = -lambda_i / B + (1/B) sum_k softmax_i(k): the loss gradient with
  // respect to the output scores, summed over the batch.
  std::vector<double> d;
  // Per-sample gradient w.r.t. the logits, (softmax - onehot) / B.
  Tensor dlogits;
};

LossResult CrossEntropyLoss(const Tensor& logits, std::span<const Label> labels);

// One forward/backward pass on a labelled batch.
struct BatchGradients {
  double loss = 0.0;
  Gradients grads;
  LastLayerGradient last_layer;
};

BatchGradients ComputeBatchGradients(const Network& net, const Tensor& inputs,
                                     std::span<const Label> labels);

}  // namespace llg

#endif  // LLG_LOSS_H_
