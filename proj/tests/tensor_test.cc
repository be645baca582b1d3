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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace llg {
namespace {

TEST(TensorTest, ShapeAndSize) {
  Tensor t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 12u);
  EXPECT_EQ(t[23], 1.5);
  EXPECT_EQ(ShapeToString({2, 3}), "[2x3]");
}

TEST(TensorTest, RejectsZeroDimensionsAndBadData) {
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(TensorTest, MatrixLiteralIsRowMajor) {
  const Tensor m = Tensor::Matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.shape(), (Shape{2, 3}));
  EXPECT_EQ(m(1, 0), 4.0);
  EXPECT_EQ(m[2], 3.0);
  EXPECT_EQ(m.row(1)[2], 6.0);
  EXPECT_THROW(Tensor::Matrix({{1, 2}, {3}}), ShapeError);
}

TEST(TensorTest, Arithmetic) {
  Tensor a = Tensor::Vector({1, 2, 3});
  a.Axpy(2.0, Tensor::Vector({1, 1, 1}));
  EXPECT_EQ(a, Tensor::Vector({3, 4, 5}));
  a.Scale(0.5);
  EXPECT_EQ(a, Tensor::Vector({1.5, 2, 2.5}));
  EXPECT_DOUBLE_EQ(a.SquaredNorm(), 2.25 + 4 + 6.25);
  EXPECT_THROW(a.Axpy(1.0, Tensor::Vector({1, 2})), ShapeError);
  a.Fill(0.0);
  EXPECT_EQ(a.SquaredNorm(), 0.0);
}

TEST(TensorTest, Finiteness) {
  Tensor a = Tensor::Vector({1, 2});
  EXPECT_TRUE(a.AllFinite());
  a[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(a.AllFinite());
  a[1] = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(a.AllFinite());
}

}  // namespace
}  // namespace llg
