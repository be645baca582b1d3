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

#include "llg/network.h"

#include <atomic>
#include <cmath>
#include <random>
#include <utility>

namespace llg {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::atomic<uint64_t> g_next_stamp{1};

uint64_t NextStamp() { return g_next_stamp.fetch_add(1); }

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void FillUniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data()) v = dist(rng);
}

Tensor DenseForward(const Tensor& x, const Tensor& w, const Tensor& b) {
  const size_t batch = x.rows(), in = x.cols(), out = w.rows();
  Tensor y({batch, out});
  for (size_t s = 0; s < batch; ++s) {
    const double* xs = x.row(s).data();
    for (size_t o = 0; o < out; ++o) {
      const double* wo = w.row(o).data();
      double acc = b[o];
      for (size_t i = 0; i < in; ++i) acc += wo[i] * xs[i];
      y(s, o) = acc;
    }
  }
  return y;
}

// Accumulates dW, db and returns dx.
Tensor DenseBackward(const Tensor& x, const Tensor& w, const Tensor& dy,
                     Tensor& dw, Tensor& db) {
  const size_t batch = x.rows(), in = x.cols(), out = w.rows();
  Tensor dx({batch, in});
  for (size_t s = 0; s < batch; ++s) {
    const double* xs = x.row(s).data();
    double* dxs = dx.row(s).data();
    for (size_t o = 0; o < out; ++o) {
      const double grad = dy(s, o);
      if (grad == 0.0) continue;
      db[o] += grad;
      double* dwo = dw.row(o).data();
      const double* wo = w.row(o).data();
      for (size_t i = 0; i < in; ++i) {
        dwo[i] += grad * xs[i];
        dxs[i] += grad * wo[i];
      }
    }
  }
  return dx;
}

struct ConvGeometry {
  size_t in_c, in_h, in_w, out_c, out_h, out_w, k, stride;
};

ConvGeometry Geometry(const Conv2dSpec& spec, const Shape& in, const Shape& out) {
  return {in[0], in[1], in[2], out[0], out[1], out[2], spec.kernel, spec.stride};
}

Tensor ConvForward(const Tensor& x, const Tensor& w, const Tensor& b,
                   const ConvGeometry& g) {
  const size_t batch = x.rows();
  Tensor y({batch, g.out_c * g.out_h * g.out_w});
  for (size_t s = 0; s < batch; ++s) {
    const double* xs = x.row(s).data();
    double* ys = y.row(s).data();
    for (size_t oc = 0; oc < g.out_c; ++oc) {
      for (size_t oy = 0; oy < g.out_h; ++oy) {
        for (size_t ox = 0; ox < g.out_w; ++ox) {
          double acc = b[oc];
          for (size_t ic = 0; ic < g.in_c; ++ic) {
            for (size_t ky = 0; ky < g.k; ++ky) {
              const double* xrow =
                  xs + (ic * g.in_h + oy * g.stride + ky) * g.in_w + ox * g.stride;
              const double* wrow = w.data().data() + ((oc * g.in_c + ic) * g.k + ky) * g.k;
              for (size_t kx = 0; kx < g.k; ++kx) acc += wrow[kx] * xrow[kx];
            }
          }
          ys[(oc * g.out_h + oy) * g.out_w + ox] = acc;
        }
      }
    }
  }
  return y;
}

Tensor ConvBackward(const Tensor& x, const Tensor& w, const Tensor& dy,
                    const ConvGeometry& g, Tensor& dw, Tensor& db) {
  const size_t batch = x.rows();
  Tensor dx({batch, g.in_c * g.in_h * g.in_w});
  for (size_t s = 0; s < batch; ++s) {
    const double* xs = x.row(s).data();
    const double* dys = dy.row(s).data();
    double* dxs = dx.row(s).data();
    for (size_t oc = 0; oc < g.out_c; ++oc) {
      for (size_t oy = 0; oy < g.out_h; ++oy) {
        for (size_t ox = 0; ox < g.out_w; ++ox) {
          const double grad = dys[(oc * g.out_h + oy) * g.out_w + ox];
          if (grad == 0.0) continue;
          db[oc] += grad;
          for (size_t ic = 0; ic < g.in_c; ++ic) {
            for (size_t ky = 0; ky < g.k; ++ky) {
              const size_t xoff = (ic * g.in_h + oy * g.stride + ky) * g.in_w + ox * g.stride;
              const size_t woff = ((oc * g.in_c + ic) * g.k + ky) * g.k;
              for (size_t kx = 0; kx < g.k; ++kx) {
                dw[woff + kx] += grad * xs[xoff + kx];
                dxs[xoff + kx] += grad * w[woff + kx];
              }
            }
          }
        }
      }
    }
  }
  return dx;
}

}  // namespace

size_t Gradients::NumElements() const {
  size_t total = 0;
  for (const auto& t : tensors) total += t.size();
  return total;
}

double Gradients::SquaredNorm() const {
  double total = 0.0;
  for (const auto& t : tensors) total += t.SquaredNorm();
  return total;
}

bool Gradients::AllFinite() const {
  for (const auto& t : tensors) {
    if (!t.AllFinite()) return false;
  }
  return true;
}

void Gradients::Axpy(double alpha, const Gradients& other) {
  if (other.tensors.size() != tensors.size()) {
    throw ShapeError("gradient sets have different parameter counts");
  }
  for (size_t i = 0; i < tensors.size(); ++i) tensors[i].Axpy(alpha, other.tensors[i]);
}

void Gradients::Scale(double alpha) {
  for (auto& t : tensors) t.Scale(alpha);
}

Gradients Gradients::ZerosLike() const {
  Gradients out;
  out.tensors.reserve(tensors.size());
  for (const auto& t : tensors) out.tensors.emplace_back(t.shape());
  return out;
}

LastLayerGradient LastLayerGradient::FromMatrix(Tensor matrix, int sample_count) {
  if (sample_count < 1) throw Error("sample_count must be >= 1");
  if (matrix.rank() != 2) throw ShapeError("last-layer gradient must be a matrix");
  LastLayerGradient out;
  out.g.assign(matrix.rows(), 0.0);
  for (size_t i = 0; i < matrix.rows(); ++i) {
    double sum = 0.0;
    for (double v : matrix.row(i)) sum += v;
    out.g[i] = sum;
  }
  out.matrix = std::move(matrix);
  out.sample_count = sample_count;
  return out;
}

Network::Network(std::vector<LayerSpec> layers, Shape input_shape, uint64_t seed)
    : layers_(std::move(layers)), input_shape_(std::move(input_shape)), seed_(seed) {
  if (layers_.empty()) throw Error("network needs at least one layer");
  if (input_shape_.empty() || NumElements(input_shape_) == 0) {
    throw ShapeError("network input shape must be non-empty");
  }
  std::mt19937_64 rng(seed);
  Shape current = input_shape_;
  for (size_t k = 0; k < layers_.size(); ++k) {
    LayerInfo info{current, current, std::nullopt};
    std::visit(
        Overloaded{
            [&](const DenseSpec& d) {
              if (current.size() != 1 || current[0] != d.in || d.out == 0) {
                throw ShapeError("dense layer " + std::to_string(k) + " expects input [" +
                                 std::to_string(d.in) + "], got " + ShapeToString(current));
              }
              info.weight_index = params_.size();
              const double bound = 1.0 / std::sqrt(static_cast<double>(d.in));
              params_.emplace_back(Shape{d.out, d.in});
              params_.emplace_back(Shape{d.out});
              FillUniform(params_[params_.size() - 2], bound, rng);
              FillUniform(params_.back(), bound, rng);
              current = {d.out};
            },
            [&](const Conv2dSpec& c) {
              if (current.size() != 3 || current[0] != c.in_channels || c.kernel == 0 ||
                  c.stride == 0 || c.out_channels == 0 || current[1] < c.kernel ||
                  current[2] < c.kernel) {
                throw ShapeError("conv layer " + std::to_string(k) + " incompatible with input " +
                                 ShapeToString(current));
              }
              info.weight_index = params_.size();
              const size_t fan_in = c.in_channels * c.kernel * c.kernel;
              const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
              params_.emplace_back(Shape{c.out_channels, c.in_channels, c.kernel, c.kernel});
              params_.emplace_back(Shape{c.out_channels});
              FillUniform(params_[params_.size() - 2], bound, rng);
              FillUniform(params_.back(), bound, rng);
              current = {c.out_channels, (current[1] - c.kernel) / c.stride + 1,
                         (current[2] - c.kernel) / c.stride + 1};
            },
            [&](const FlattenSpec&) { current = {NumElements(current)}; },
            [&](const ActivationSpec&) {},
        },
        layers_[k]);
    info.out_shape = current;
    info_.push_back(std::move(info));
  }

  const auto* head = std::get_if<DenseSpec>(&layers_.back());
  if (head == nullptr) throw Error("the final layer must be a dense classification head");
  num_classes_ = head->out;
  penultimate_width_ = head->in;
  last_weight_index_ = *info_.back().weight_index;
  if (num_classes_ < 2) throw Error("a classifier needs at least 2 classes");

  // The head's input must come out of a non-negative activation, unless the
  // head is the only trainable layer and reads the input directly.
  const LayerSpec* feeding = nullptr;
  for (size_t k = layers_.size() - 1; k-- > 0;) {
    if (std::holds_alternative<FlattenSpec>(layers_[k])) continue;
    feeding = &layers_[k];
    break;
  }
  if (feeding != nullptr && !std::holds_alternative<ActivationSpec>(*feeding)) {
    throw Error("the layer feeding the classification head must be a sigmoid or relu activation");
  }
  Restamp();
}

Network Network::Mlp(size_t input_dim, size_t hidden, size_t num_classes, uint64_t seed,
                     ActivationKind activation) {
  return Network({DenseSpec{input_dim, hidden}, ActivationSpec{activation},
                  DenseSpec{hidden, num_classes}},
                 {input_dim}, seed);
}

Network Network::SmallCnn(size_t channels, size_t height, size_t width, size_t num_classes,
                          uint64_t seed) {
  constexpr size_t kFilters = 8, kKernel = 3;
  if (height < 2 * kKernel - 1 || width < 2 * kKernel - 1) {
    throw ShapeError("input too small for the CNN");
  }
  const size_t out_h = height - 2 * (kKernel - 1), out_w = width - 2 * (kKernel - 1);
  return Network({Conv2dSpec{channels, kFilters, kKernel, 1},
                  ActivationSpec{ActivationKind::kSigmoid},
                  Conv2dSpec{kFilters, kFilters, kKernel, 1},
                  ActivationSpec{ActivationKind::kSigmoid}, FlattenSpec{},
                  DenseSpec{kFilters * out_h * out_w, num_classes}},
                 {channels, height, width}, seed);
}

void Network::Restamp() { stamp_ = NextStamp(); }

ForwardPass Network::Forward(const Tensor& batch) const {
  if (batch.rank() < 2 || batch.cols() != input_size()) {
    throw ShapeError("batch shape " + ShapeToString(batch.shape()) +
                     " does not match network input " + ShapeToString(input_shape_));
  }
  ForwardCache cache;
  cache.stamp = stamp_;
  cache.activations.reserve(layers_.size() + 1);
  cache.activations.emplace_back(Shape{batch.rows(), batch.cols()},
                                 std::vector<double>(batch.data().begin(), batch.data().end()));
  for (size_t k = 0; k < layers_.size(); ++k) {
    const Tensor& x = cache.activations.back();
    Tensor y = std::visit(
        Overloaded{
            [&](const DenseSpec&) {
              const size_t w = *info_[k].weight_index;
              return DenseForward(x, params_[w], params_[w + 1]);
            },
            [&](const Conv2dSpec& c) {
              const size_t w = *info_[k].weight_index;
              return ConvForward(x, params_[w], params_[w + 1],
                                 Geometry(c, info_[k].in_shape, info_[k].out_shape));
            },
            [&](const FlattenSpec&) { return x; },
            [&](const ActivationSpec& a) {
              Tensor out = x;
              if (a.kind == ActivationKind::kSigmoid) {
                for (double& v : out.data()) v = Sigmoid(v);
              } else {
                for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
              }
              return out;
            },
        },
        layers_[k]);
    cache.activations.push_back(std::move(y));
  }
  if (!cache.logits().AllFinite()) throw Error("forward produced non-finite logits");
  ForwardPass pass;
  pass.logits = cache.logits();
  pass.cache = std::move(cache);
  return pass;
}

Gradients Network::Backward(const ForwardCache& cache, const Tensor& dlogits) const {
  if (cache.stamp != stamp_ || cache.activations.size() != layers_.size() + 1) {
    throw Error("stale forward cache: parameters changed since the forward pass");
  }
  const size_t batch = cache.activations[0].rows();
  if (dlogits.rows() != batch || dlogits.cols() != num_classes_) {
    throw ShapeError("dlogits shape " + ShapeToString(dlogits.shape()) + " does not match logits");
  }
  Gradients grads = ZeroGradients();
  Tensor upstream({batch, num_classes_},
                  std::vector<double>(dlogits.data().begin(), dlogits.data().end()));
  for (size_t k = layers_.size(); k-- > 0;) {
    const Tensor& x = cache.activations[k];
    const Tensor& y = cache.activations[k + 1];
    upstream = std::visit(
        Overloaded{
            [&](const DenseSpec&) {
              const size_t w = *info_[k].weight_index;
              return DenseBackward(x, params_[w], upstream, grads.tensors[w],
                                   grads.tensors[w + 1]);
            },
            [&](const Conv2dSpec& c) {
              const size_t w = *info_[k].weight_index;
              return ConvBackward(x, params_[w], upstream,
                                  Geometry(c, info_[k].in_shape, info_[k].out_shape),
                                  grads.tensors[w], grads.tensors[w + 1]);
            },
            [&](const FlattenSpec&) { return std::move(upstream); },
            [&](const ActivationSpec& a) {
              Tensor dx = std::move(upstream);
              if (a.kind == ActivationKind::kSigmoid) {
                for (size_t i = 0; i < dx.size(); ++i) dx[i] *= y[i] * (1.0 - y[i]);
              } else {
                for (size_t i = 0; i < dx.size(); ++i) {
                  if (x[i] <= 0.0) dx[i] = 0.0;
                }
              }
              return dx;
            },
        },
        layers_[k]);
  }
  return grads;
}

void Network::SgdStep(const Gradients& grads, double eta) {
  if (eta < 0.0 || !std::isfinite(eta)) throw Error("learning rate must be finite and >= 0");
  if (grads.tensors.size() != params_.size()) {
    throw ShapeError("gradient count does not match parameter count");
  }
  for (size_t i = 0; i < params_.size(); ++i) params_[i].Axpy(-eta, grads.tensors[i]);
  Restamp();
}

LastLayerGradient Network::LastLayer(const Gradients& grads, int sample_count) const {
  if (grads.tensors.size() != params_.size()) {
    throw ShapeError("gradient count does not match parameter count");
  }
  return LastLayerGradient::FromMatrix(grads.tensors[last_weight_index_], sample_count);
}

size_t Network::NumParameters() const {
  size_t total = 0;
  for (const auto& p : params_) total += p.size();
  return total;
}

std::vector<Tensor>& Network::mutable_parameters() {
  Restamp();
  return params_;
}

Gradients Network::ZeroGradients() const {
  Gradients g;
  g.tensors.reserve(params_.size());
  for (const auto& p : params_) g.tensors.emplace_back(p.shape());
  return g;
}

std::string ModelKindName(ModelKind kind) { return kind == ModelKind::kMlp ? "mlp" : "cnn"; }

ModelKind ParseModelKind(const std::string& name) {
  if (name == "mlp") return ModelKind::kMlp;
  if (name == "cnn") return ModelKind::kCnn;
  throw Error("unknown model '" + name + "' (expected mlp or cnn)");
}

Network MakeModel(ModelKind kind, size_t input_dim, size_t num_classes, uint64_t seed) {
  if (kind == ModelKind::kMlp) return Network::Mlp(input_dim, 64, num_classes, seed);
  const auto side = static_cast<size_t>(std::lround(std::sqrt(static_cast<double>(input_dim))));
  if (side * side != input_dim) {
    throw ShapeError("the CNN needs a square input, got " + std::to_string(input_dim) + " features");
  }
  return Network::SmallCnn(1, side, side, num_classes, seed);
}

}  // namespace llg
