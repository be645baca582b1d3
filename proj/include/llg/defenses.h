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

// Client-side gradient obfuscation applied before an update is shared.

#ifndef LLG_DEFENSES_H_
#define LLG_DEFENSES_H_

#include <optional>
#include <string>

#include "llg/network.h"
#include "llg/rng.h"

namespace llg {

// Adds N(0, sigma^2) to every entry. sigma must be >= 0.
void AddGaussianNoise(Gradients& grads, double sigma, Rng& rng);

// Scales the whole update by 1 / max(1, ||grads||_2 / beta), then adds
// N(0, sigma^2) to every entry.
void ClipAndNoise(Gradients& grads, double beta, double sigma, Rng& rng);

enum class ThresholdScope {
  kGlobal,     // one threshold over every parameter tensor
  kPerTensor,  // a separate threshold for each parameter tensor
};

// Threshold sparsification with residual accumulation. Each round the raw
// gradient is added to the residual, entries whose magnitude exceeds the
// theta-quantile of |residual| are emitted and cleared, and the rest keep
// accumulating for later rounds.
class CompressionState {
 public:
  explicit CompressionState(double theta, ThresholdScope scope = ThresholdScope::kGlobal);

  // Returns the sparse update to share and updates the residual.
  Gradients Compress(const Gradients& grads);

  double theta() const { return theta_; }
  ThresholdScope scope() const { return scope_; }
  // Empty until the first call to Compress.
  const Gradients& residual() const { return residual_; }

 private:
  double theta_;
  ThresholdScope scope_;
  Gradients residual_;
};

enum class DefenseKind { kNone, kNoise, kClipNoise, kCompression };

struct DefenseSpec {
  DefenseKind kind = DefenseKind::kNone;
  double sigma = 0.0;
  double beta = 0.0;
  double theta = 0.0;
  ThresholdScope scope = ThresholdScope::kGlobal;

  // Short stable tag used in CSV output, e.g. "none", "noise:0.1",
  // "dp:1:0.1", "compress:0.8".
  std::string Name() const;
  // Throws on out-of-range parameters.
  void Validate() const;
};

// Parses the tag format produced by DefenseSpec::Name().
DefenseSpec ParseDefense(const std::string& tag);

// Applies one client's defense round after round, keeping compression state.
class Defender {
 public:
  explicit Defender(DefenseSpec spec);
  Gradients Apply(const Gradients& grads, Rng& rng);
  const DefenseSpec& spec() const { return spec_; }

 private:
  DefenseSpec spec_;
  std::optional<CompressionState> compression_;
};

}  // namespace llg

#endif  // LLG_DEFENSES_H_
