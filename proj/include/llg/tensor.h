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

#ifndef LLG_TENSOR_H_
#define LLG_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace llg {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

using Shape = std::vector<size_t>;

std::string ShapeToString(const Shape& shape);
size_t NumElements(const Shape& shape);

// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor Vector(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return data_.size(); }
  size_t dim(size_t axis) const { return shape_.at(axis); }

  // Rank-2 accessors. rows() is the leading dimension, cols() the product of
  // the remaining ones, so a B x C x H x W tensor reads as B x (C*H*W).
  size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  size_t cols() const { return rows() == 0 ? 0 : data_.size() / rows(); }

  double& operator()(size_t r, size_t c) { return data_[r * cols() + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols() + c]; }
  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  bool AllFinite() const;
  double SquaredNorm() const;
  void Fill(double value);
  // In-place y += alpha * x. Shapes must match.
  void Axpy(double alpha, const Tensor& x);
  void Scale(double alpha);

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace llg

#endif  // LLG_TENSOR_H_
