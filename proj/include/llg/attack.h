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

// Label extraction from last-layer gradients.
//
// For an untrained classifier with a non-negative penultimate activation the
// per-label row sums of the head's weight gradient behave like
//
//   g_i ~= lambda_i * m + s_i
//
// where lambda_i counts label i in the data, m < 0 is a label-agnostic
// "impact" and s_i >= 0 a label-specific "offset" caused by probability mass
// the model puts on class i. A negative g_i is only possible when label i is
// present. The estimators below recover m and s under three adversary
// knowledge levels, and LlgExtract turns (g, m, s) into label counts.

#ifndef LLG_ATTACK_H_
#define LLG_ATTACK_H_

#include <span>
#include <string>
#include <vector>

#include "llg/data.h"
#include "llg/labels.h"
#include "llg/network.h"
#include "llg/rng.h"

namespace llg {

struct AttackParams {
  double impact = 0.0;
  std::vector<double> offsets;  // all zero when not estimable
  int sample_count = 0;         // |D|, the number of labels to extract
};

class NoNegativeGradients : public Error {
 public:
  NoNegativeGradients() : Error("no negative gradient to estimate the impact from") {}
};

// Shared-gradients-only estimate: m = (1/|D|) * sum_{g_i < 0} g_i * (1 + 1/n).
// Throws NoNegativeGradients when every g_i >= 0.
double EstimateImpactShared(const LastLayerGradient& grad);

// Impact from EstimateImpactShared, zero offsets, |D| = grad.sample_count.
AttackParams EstimateParamsShared(const LastLayerGradient& grad);

// Fallback when the shared estimate is impossible: m = -1/|D|, s = 0.
AttackParams UniformParams(size_t num_classes, int sample_count);

enum class DummyKind { kZeros, kOnes, kUniformRandom };

std::string DummyKindName(DummyKind kind);
DummyKind ParseDummyKind(const std::string& name);

// How the shadow model is probed.
struct ProbeSchedule {
  // Single-label batches per class averaged into g-bar_i for the impact.
  int impact_batches_per_class = 10;
  // For the offsets: one batch of each other label at each of these sizes, so
  // z = offset_batch_sizes.size() * (n - 1) runs per label.
  std::vector<int> offset_batch_sizes = {2, 8, 32};
};

// White-box estimate from dummy inputs on a shadow copy of the model.
//   m   = (1/(n*B)) * sum_i g-bar_i * (1 + 1/n), g-bar_i averaged over batches of
//         B dummy samples all labelled i;
//   s_i = mean of g_i over the z batches that are full of a single other label.
// sample_count is |D| of the gradient the parameters will be used against.
AttackParams EstimateParamsWhiteBox(const Network& shadow, DummyKind dummy, int batch_size,
                                    int sample_count, Rng& rng,
                                    const ProbeSchedule& schedule = {});

// Same formulas with real samples of each class from an auxiliary dataset,
// which must cover every class.
AttackParams EstimateParamsAuxiliary(const Network& shadow, const ClientDataset& aux,
                                     int batch_size, int sample_count, Rng& rng,
                                     const ProbeSchedule& schedule = {});

// Rescales single-batch parameters for a gradient accumulated over gamma
// local steps: the offsets add up once per step while the impact of a single
// occurrence stays the same.
AttackParams ForAccumulatedUpdate(AttackParams params, int gamma);

// The three-step extraction:
//   1. every label with g_i < 0 is extracted once and g_i <- g_i - m;
//   2. g <- g - s;
//   3. until |D| labels are extracted, take argmin g_i (lowest index on ties),
//      extract it and set g_i <- g_i - m.
// Throws on non-finite input or a sample_count mismatch.
LabelMultiset LlgExtract(const LastLayerGradient& grad, const AttackParams& params);
LabelMultiset LlgExtract(std::span<const double> g, const AttackParams& params);

// Labels extracted by step 1 alone, which are all guaranteed present.
LabelMultiset NegativeGradientLabels(std::span<const double> g);

// |D| labels drawn uniformly from [1, n].
LabelMultiset RandomGuess(size_t num_classes, int sample_count, Rng& rng);

}  // namespace llg

#endif  // LLG_ATTACK_H_
