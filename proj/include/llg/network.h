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

// A small feed-forward network engine with hand-written backpropagation.
//
// Activations flow between layers as B x features matrices. Convolution layers
// interpret each row as a C x H x W image, so a flatten layer only changes the
// logical shape, never the data. The final layer is always a dense
// classification head whose weight matrix is n x h (classes x penultimate
// width); its gradient is what the label-leakage attacks consume.

#ifndef LLG_NETWORK_H_
#define LLG_NETWORK_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "llg/tensor.h"

namespace llg {

struct DenseSpec {
  size_t in = 0;
  size_t out = 0;
};

struct Conv2dSpec {
  size_t in_channels = 0;
  size_t out_channels = 0;
  size_t kernel = 0;
  size_t stride = 1;
};

struct FlattenSpec {};

enum class ActivationKind { kSigmoid, kRelu };

struct ActivationSpec {
  ActivationKind kind = ActivationKind::kSigmoid;
};

using LayerSpec = std::variant<DenseSpec, Conv2dSpec, FlattenSpec, ActivationSpec>;

// Gradients (or any other quantity) shaped like a network's parameter list.
struct Gradients {
  std::vector<Tensor> tensors;

  size_t NumElements() const;
  double SquaredNorm() const;
  bool AllFinite() const;
  void Axpy(double alpha, const Gradients& other);
  void Scale(double alpha);
  Gradients ZerosLike() const;

  friend bool operator==(const Gradients&, const Gradients&) = default;
};

// The n x h gradient of the classification head's weights together with its
// per-label row sums g_i.
struct LastLayerGradient {
  Tensor matrix;
  std::vector<double> g;
  int sample_count = 0;

  // Computes g from the matrix rows. sample_count must be >= 1.
  static LastLayerGradient FromMatrix(Tensor matrix, int sample_count);
  size_t num_classes() const { return g.size(); }
};

// Everything backward needs from a forward pass. activations[0] is the input
// batch and activations[k + 1] the output of layer k.
struct ForwardCache {
  std::vector<Tensor> activations;
  uint64_t stamp = 0;

  const Tensor& logits() const { return activations.back(); }
  // Input of the final dense layer, a_{L-1} for every sample.
  const Tensor& penultimate() const { return activations[activations.size() - 2]; }
};

struct ForwardPass {
  Tensor logits;
  ForwardCache cache;
};

class Network {
 public:
  // Validates the layer stack against input_shape (per-sample shape, e.g. {64}
  // or {1, 8, 8}) and initialises all parameters from seed.
  Network(std::vector<LayerSpec> layers, Shape input_shape, uint64_t seed);

  // input -> dense(hidden) -> activation -> dense(num_classes).
  static Network Mlp(size_t input_dim, size_t hidden, size_t num_classes,
                     uint64_t seed,
                     ActivationKind activation = ActivationKind::kSigmoid);
  // Two sigmoid conv layers (8 channels, 3x3, stride 1) with a flatten and a
  // dense head.
  static Network SmallCnn(size_t channels, size_t height, size_t width,
                          size_t num_classes, uint64_t seed);

  ForwardPass Forward(const Tensor& batch) const;
  // dlogits is the B x n gradient of the loss w.r.t. the logits. Throws if
  // the cache was not produced by this network's current parameters.
  Gradients Backward(const ForwardCache& cache, const Tensor& dlogits) const;
  // W <- W - eta * grad for every parameter tensor.
  void SgdStep(const Gradients& grads, double eta);

  LastLayerGradient LastLayer(const Gradients& grads, int sample_count) const;

  const std::vector<LayerSpec>& layers() const { return layers_; }
  const Shape& input_shape() const { return input_shape_; }
  size_t input_size() const { return NumElements(input_shape_); }
  size_t num_classes() const { return num_classes_; }
  size_t penultimate_width() const { return penultimate_width_; }
  uint64_t seed() const { return seed_; }
  size_t NumParameters() const;

  const std::vector<Tensor>& parameters() const { return params_; }
  // Mutable access invalidates all outstanding forward caches.
  std::vector<Tensor>& mutable_parameters();
  Gradients ZeroGradients() const;

  const Tensor& last_weights() const { return params_[last_weight_index_]; }
  const Tensor& last_bias() const { return params_[last_weight_index_ + 1]; }

 private:
  // Per-layer geometry resolved at construction.
  struct LayerInfo {
    Shape in_shape;
    Shape out_shape;
    std::optional<size_t> weight_index;  // bias lives at weight_index + 1
  };

  void Restamp();

  std::vector<LayerSpec> layers_;
  std::vector<LayerInfo> info_;
  Shape input_shape_;
  std::vector<Tensor> params_;
  size_t num_classes_ = 0;
  size_t penultimate_width_ = 0;
  size_t last_weight_index_ = 0;
  uint64_t seed_ = 0;
  uint64_t stamp_ = 0;
};

enum class ModelKind { kMlp, kCnn };

std::string ModelKindName(ModelKind kind);
ModelKind ParseModelKind(const std::string& name);

// Default models. The MLP has a 64-wide sigmoid hidden layer; the CNN expects a
// square single-channel input of input_dim pixels.
Network MakeModel(ModelKind kind, size_t input_dim, size_t num_classes,
                  uint64_t seed);

}  // namespace llg

#endif  // LLG_NETWORK_H_
