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

#include "llg/defenses.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

namespace llg {
namespace {

// Magnitude below which the lowest floor(theta * N) entries fall, or -inf when
// nothing is to be discarded.
double DiscardThreshold(std::vector<double> magnitudes, double theta) {
  const auto discard = static_cast<size_t>(std::floor(theta * static_cast<double>(magnitudes.size())));
  if (discard == 0) return -std::numeric_limits<double>::infinity();
  auto kth = magnitudes.begin() + static_cast<std::ptrdiff_t>(discard - 1);
  std::nth_element(magnitudes.begin(), kth, magnitudes.end());
  return *kth;
}

void Sparsify(std::span<double> residual, std::span<double> emitted, double threshold) {
  for (size_t i = 0; i < residual.size(); ++i) {
    if (std::abs(residual[i]) > threshold) {
      emitted[i] = residual[i];
      residual[i] = 0.0;
    }
  }
}

std::string FormatNumber(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

void AddGaussianNoise(Gradients& grads, double sigma, Rng& rng) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error("noise sigma must be >= 0");
  if (sigma == 0.0) return;
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& t : grads.tensors) {
    for (double& v : t.data()) v += noise(rng);
  }
}

void ClipAndNoise(Gradients& grads, double beta, double sigma, Rng& rng) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error("clipping bound beta must be > 0");
  const double norm = std::sqrt(grads.SquaredNorm());
  const double divisor = std::max(1.0, norm / beta);
  if (divisor > 1.0) grads.Scale(1.0 / divisor);
  AddGaussianNoise(grads, sigma, rng);
}

CompressionState::CompressionState(double theta, ThresholdScope scope)
    : theta_(theta), scope_(scope) {
  if (!(theta >= 0.0 && theta < 1.0)) throw Error("compression ratio theta must be in [0, 1)");
}

Gradients CompressionState::Compress(const Gradients& grads) {
  if (residual_.tensors.empty()) {
    residual_ = grads.ZerosLike();
  }
  residual_.Axpy(1.0, grads);
  Gradients emitted = residual_.ZerosLike();

  if (scope_ == ThresholdScope::kGlobal) {
    std::vector<double> magnitudes;
    magnitudes.reserve(residual_.NumElements());
    for (const auto& t : residual_.tensors) {
      for (double v : t.data()) magnitudes.push_back(std::abs(v));
    }
    const double threshold = DiscardThreshold(std::move(magnitudes), theta_);
    for (size_t k = 0; k < residual_.tensors.size(); ++k) {
      Sparsify(residual_.tensors[k].data(), emitted.tensors[k].data(), threshold);
    }
  } else {
    for (size_t k = 0; k < residual_.tensors.size(); ++k) {
      auto data = residual_.tensors[k].data();
      std::vector<double> magnitudes(data.size());
      std::transform(data.begin(), data.end(), magnitudes.begin(),
                     [](double v) { return std::abs(v); });
      Sparsify(data, emitted.tensors[k].data(), DiscardThreshold(std::move(magnitudes), theta_));
    }
  }
  return emitted;
}

std::string DefenseSpec::Name() const {
  switch (kind) {
    case DefenseKind::kNone:
      return "none";
    case DefenseKind::kNoise:
      return "noise:" + FormatNumber(sigma);
    case DefenseKind::kClipNoise:
      return "dp:" + FormatNumber(beta) + ":" + FormatNumber(sigma);
    case DefenseKind::kCompression:
      return std::string(scope == ThresholdScope::kGlobal ? "compress:" : "compress_layer:") +
             FormatNumber(theta);
  }
  return "none";
}

void DefenseSpec::Validate() const {
  switch (kind) {
    case DefenseKind::kNone:
      return;
    case DefenseKind::kNoise:
      if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error("noise sigma must be >= 0");
      return;
    case DefenseKind::kClipNoise:
      if (!(beta > 0.0) || !std::isfinite(beta)) throw Error("clipping bound beta must be > 0");
      if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error("noise sigma must be >= 0");
      return;
    case DefenseKind::kCompression:
      if (!(theta >= 0.0 && theta < 1.0)) throw Error("compression ratio theta must be in [0, 1)");
      return;
  }
}

DefenseSpec ParseDefense(const std::string& tag) {
  std::vector<std::string> parts;
  std::stringstream in(tag);
  for (std::string part; std::getline(in, part, ':');) parts.push_back(part);
  auto number = [&](size_t i) {
    try {
      size_t used = 0;
      double v = std::stod(parts.at(i), &used);
      if (used != parts[i].size()) throw Error("");
      return v;
    } catch (const std::exception&) {
      throw Error("malformed defense '" + tag + "'");
    }
  };

  DefenseSpec spec;
  const std::string kind = parts.empty() ? "" : parts[0];
  if (kind == "none" && parts.size() == 1) {
    spec.kind = DefenseKind::kNone;
  } else if (kind == "noise" && parts.size() == 2) {
    spec.kind = DefenseKind::kNoise;
    spec.sigma = number(1);
  } else if (kind == "dp" && parts.size() == 3) {
    spec.kind = DefenseKind::kClipNoise;
    spec.beta = number(1);
    spec.sigma = number(2);
  } else if ((kind == "compress" || kind == "compress_layer") && parts.size() == 2) {
    spec.kind = DefenseKind::kCompression;
    spec.theta = number(1);
    spec.scope = kind == "compress" ? ThresholdScope::kGlobal : ThresholdScope::kPerTensor;
  } else {
    throw Error("unknown defense '" + tag +
                "' (expected none, noise:S, dp:B:S, compress:T or compress_layer:T)");
  }
  spec.Validate();
  return spec;
}

Defender::Defender(DefenseSpec spec) : spec_(spec) {
  spec_.Validate();
  if (spec_.kind == DefenseKind::kCompression) compression_.emplace(spec_.theta, spec_.scope);
}

Gradients Defender::Apply(const Gradients& grads, Rng& rng) {
  Gradients out = grads;
  switch (spec_.kind) {
    case DefenseKind::kNone:
      break;
    case DefenseKind::kNoise:
      AddGaussianNoise(out, spec_.sigma, rng);
      break;
    case DefenseKind::kClipNoise:
      ClipAndNoise(out, spec_.beta, spec_.sigma, rng);
      break;
    case DefenseKind::kCompression:
      out = compression_->Compress(grads);
      break;
  }
  return out;
}

}  // namespace llg
