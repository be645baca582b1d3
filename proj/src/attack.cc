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

#include "llg/attack.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <utility>

#include "llg/loss.h"

namespace llg {
namespace {

// Source of single-label probe batches.
using ProbeSource = std::function<Tensor(Label label, int size, Rng& rng)>;

std::vector<double> ProbeGradient(const Network& shadow, const Tensor& inputs, Label label) {
  std::vector<Label> labels(inputs.rows(), label);
  return ComputeBatchGradients(shadow, inputs, labels).last_layer.g;
}

AttackParams EstimateFromProbes(const Network& shadow, const ProbeSource& source,
                                bool deterministic, int batch_size, int sample_count, Rng& rng,
                                const ProbeSchedule& schedule) {
  const size_t n = shadow.num_classes();
  if (batch_size < 1) throw Error("probe batch size must be >= 1");
  if (sample_count < 1) throw Error("sample_count must be >= 1");
  if (schedule.impact_batches_per_class < 1) throw Error("need at least one impact probe per class");
  if (schedule.offset_batch_sizes.empty()) throw Error("need at least one offset probe size");

  // Identical dummy batches give identical gradients, so one probe suffices.
  const int impact_batches = deterministic ? 1 : schedule.impact_batches_per_class;
  double impact_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const auto label = static_cast<Label>(i + 1);
    double g_bar = 0.0;
    for (int b = 0; b < impact_batches; ++b) {
      g_bar += ProbeGradient(shadow, source(label, batch_size, rng), label)[i];
    }
    impact_sum += g_bar / impact_batches;
  }
  const double nd = static_cast<double>(n);

  AttackParams params;
  params.impact = impact_sum / (nd * batch_size) * (1.0 + 1.0 / nd);
  params.sample_count = sample_count;
  params.offsets.assign(n, 0.0);
  std::vector<int> runs(n, 0);
  for (int size : schedule.offset_batch_sizes) {
    if (size < 1) throw Error("offset probe sizes must be >= 1");
    for (size_t j = 0; j < n; ++j) {
      const auto label = static_cast<Label>(j + 1);
      const auto g = ProbeGradient(shadow, source(label, size, rng), label);
      for (size_t i = 0; i < n; ++i) {
        if (i == j) continue;
        params.offsets[i] += g[i];
        ++runs[i];
      }
    }
  }
  for (size_t i = 0; i < n; ++i) params.offsets[i] /= runs[i];
  return params;
}

void CheckFinite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(std::string("non-finite ") + what);
  }
}

}  // namespace

double EstimateImpactShared(const LastLayerGradient& grad) {
  if (grad.sample_count < 1) throw Error("sample_count must be >= 1");
  double negative_sum = 0.0;
  bool any = false;
  for (double g : grad.g) {
    if (g < 0.0) {
      negative_sum += g;
      any = true;
    }
  }
  if (!any) throw NoNegativeGradients();
  const double n = static_cast<double>(grad.g.size());
  return negative_sum / grad.sample_count * (1.0 + 1.0 / n);
}

AttackParams EstimateParamsShared(const LastLayerGradient& grad) {
  AttackParams params;
  params.impact = EstimateImpactShared(grad);
  params.offsets.assign(grad.g.size(), 0.0);
  params.sample_count = grad.sample_count;
  return params;
}

AttackParams UniformParams(size_t num_classes, int sample_count) {
  if (sample_count < 1) throw Error("sample_count must be >= 1");
  AttackParams params;
  params.impact = -1.0 / sample_count;
  params.offsets.assign(num_classes, 0.0);
  params.sample_count = sample_count;
  return params;
}

std::string DummyKindName(DummyKind kind) {
  switch (kind) {
    case DummyKind::kZeros:
      return "zeros";
    case DummyKind::kOnes:
      return "ones";
    case DummyKind::kUniformRandom:
      return "uniform_random";
  }
  return "zeros";
}

DummyKind ParseDummyKind(const std::string& name) {
  if (name == "zeros") return DummyKind::kZeros;
  if (name == "ones") return DummyKind::kOnes;
  if (name == "uniform_random") return DummyKind::kUniformRandom;
  throw Error("unknown dummy kind '" + name + "' (expected zeros, ones or uniform_random)");
}

AttackParams EstimateParamsWhiteBox(const Network& shadow, DummyKind dummy, int batch_size,
                                    int sample_count, Rng& rng, const ProbeSchedule& schedule) {
  const size_t dim = shadow.input_size();
  ProbeSource source = [&](Label, int size, Rng& r) {
    Tensor t({static_cast<size_t>(size), dim}, dummy == DummyKind::kOnes ? 1.0 : 0.0);
    if (dummy == DummyKind::kUniformRandom) {
      std::uniform_real_distribution<double> pixel(0.0, 1.0);
      for (double& v : t.data()) v = pixel(r);
    }
    return t;
  };
  return EstimateFromProbes(shadow, source, dummy != DummyKind::kUniformRandom, batch_size,
                            sample_count, rng, schedule);
}

AttackParams EstimateParamsAuxiliary(const Network& shadow, const ClientDataset& aux,
                                     int batch_size, int sample_count, Rng& rng,
                                     const ProbeSchedule& schedule) {
  aux.Validate();
  if (aux.num_classes != shadow.num_classes()) {
    throw Error("auxiliary data has " + std::to_string(aux.num_classes) + " classes, model has " +
                std::to_string(shadow.num_classes()));
  }
  if (aux.input_dim() != shadow.input_size()) throw ShapeError("auxiliary data has wrong input size");
  const auto by_label = aux.IndicesByLabel();
  for (size_t i = 0; i < by_label.size(); ++i) {
    if (by_label[i].empty()) {
      throw Error("auxiliary data has no samples of label " + std::to_string(i + 1));
    }
  }
  ProbeSource source = [&](Label label, int size, Rng& r) {
    std::vector<size_t> pool = by_label[static_cast<size_t>(label - 1)];
    std::vector<size_t> picked;
    picked.reserve(static_cast<size_t>(size));
    if (pool.size() >= static_cast<size_t>(size)) {
      for (size_t k = 0; k < static_cast<size_t>(size); ++k) {
        std::uniform_int_distribution<size_t> pick(k, pool.size() - 1);
        std::swap(pool[k], pool[pick(r)]);
        picked.push_back(pool[k]);
      }
    } else {
      std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
      for (int k = 0; k < size; ++k) picked.push_back(pool[pick(r)]);
    }
    return StackFeatures(aux, picked);
  };
  return EstimateFromProbes(shadow, source, /*deterministic=*/false, batch_size, sample_count,
                            rng, schedule);
}

AttackParams ForAccumulatedUpdate(AttackParams params, int gamma) {
  if (gamma < 1) throw Error("gamma must be >= 1");
  for (double& s : params.offsets) s *= gamma;
  params.sample_count *= gamma;
  return params;
}

LabelMultiset NegativeGradientLabels(std::span<const double> g) {
  LabelMultiset out(g.size());
  for (size_t i = 0; i < g.size(); ++i) {
    if (g[i] < 0.0) out.Add(static_cast<Label>(i + 1));
  }
  return out;
}

LabelMultiset LlgExtract(const LastLayerGradient& grad, const AttackParams& params) {
  if (params.sample_count != grad.sample_count) {
    throw Error("attack parameters are for |D| = " + std::to_string(params.sample_count) +
                " but the gradient has |D| = " + std::to_string(grad.sample_count));
  }
  return LlgExtract(grad.g, params);
}

LabelMultiset LlgExtract(std::span<const double> g_in, const AttackParams& params) {
  const size_t n = g_in.size();
  if (n == 0) throw Error("empty gradient vector");
  if (params.sample_count < 0) throw Error("sample_count must be >= 0");
  if (!params.offsets.empty() && params.offsets.size() != n) {
    throw ShapeError("offset vector length does not match the number of classes");
  }
  CheckFinite(g_in, "gradient");
  CheckFinite(params.offsets, "offset");
  if (!std::isfinite(params.impact)) throw Error("non-finite impact");

  std::vector<double> g(g_in.begin(), g_in.end());
  LabelMultiset extracted(n);
  const int target = params.sample_count;

  // Step 1. An honest gradient never has more negative entries than samples;
  // if a perturbed one does, the most negative ones are kept.
  std::vector<size_t> negatives;
  for (size_t i = 0; i < n; ++i) {
    if (g[i] < 0.0) negatives.push_back(i);
  }
  if (negatives.size() > static_cast<size_t>(target)) {
    std::stable_sort(negatives.begin(), negatives.end(),
                     [&](size_t a, size_t b) { return g[a] < g[b]; });
    negatives.resize(static_cast<size_t>(target));
    std::sort(negatives.begin(), negatives.end());
  }
  for (size_t i : negatives) {
    extracted.Add(static_cast<Label>(i + 1));
    g[i] -= params.impact;
  }

  // Step 2.
  if (!params.offsets.empty()) {
    for (size_t i = 0; i < n; ++i) g[i] -= params.offsets[i];
  }

  // Step 3. min_element returns the first minimum, i.e. the lowest label.
  while (extracted.total() < target) {
    const auto i = static_cast<size_t>(std::min_element(g.begin(), g.end()) - g.begin());
    extracted.Add(static_cast<Label>(i + 1));
    g[i] -= params.impact;
  }
  return extracted;
}

LabelMultiset RandomGuess(size_t num_classes, int sample_count, Rng& rng) {
  if (num_classes < 1) throw Error("need at least one class");
  if (sample_count < 0) throw Error("sample_count must be >= 0");
  std::uniform_int_distribution<int> pick(1, static_cast<int>(num_classes));
  LabelMultiset out(num_classes);
  for (int k = 0; k < sample_count; ++k) out.Add(pick(rng));
  return out;
}

}  // namespace llg
