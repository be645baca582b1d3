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

#include "llg/tensor.h"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <utility>

namespace llg {

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << "x";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

size_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(NumElements(shape_), fill) {
  for (size_t d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive");
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (size_t d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive");
  }
  if (data_.size() != NumElements(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + ShapeToString(shape_));
  }
}

Tensor Tensor::Matrix(
    std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<double> data;
  size_t cols = rows.size() == 0 ? 0 : rows.begin()->size();
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::Vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

bool Tensor::AllFinite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::SquaredNorm() const {
  double sum = 0.0;
  for (double v : data_) sum += v * v;
  return sum;
}

void Tensor::Fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::Axpy(double alpha, const Tensor& x) {
  if (x.shape_ != shape_) {
    throw ShapeError("axpy shape mismatch: " + ShapeToString(shape_) + " vs " +
                     ShapeToString(x.shape_));
  }
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * x.data_[i];
}

void Tensor::Scale(double alpha) {
  for (double& v : data_) v *= alpha;
}

}  // namespace llg
