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

#include <gtest/gtest.h>

#include <cmath>

#include "llg/loss.h"
#include "test_support.h"

namespace llg {
namespace {

using testing::RandomInputs;
using testing::RandomLabels;

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(NetworkTest, ZeroWeightsGiveZeroLogits) {
  Network net({DenseSpec{3, 4}}, {3}, 7);
  for (auto& p : net.mutable_parameters()) p.Fill(0.0);
  const Tensor logits = net.Forward(Tensor::Matrix({{1.5, -2.0, 3.0}, {0.1, 0.2, 0.3}})).logits;
  ASSERT_EQ(logits.shape(), (Shape{2, 4}));
  for (double v : logits.data()) EXPECT_EQ(v, 0.0);
}

TEST(NetworkTest, IdentityDenseLayer) {
  Network net({DenseSpec{2, 2}}, {2}, 1);
  net.mutable_parameters()[0] = Tensor::Matrix({{1, 0}, {0, 1}});
  net.mutable_parameters()[1] = Tensor::Vector({0, 0});
  const Tensor logits = net.Forward(Tensor::Matrix({{3, 4}})).logits;
  EXPECT_EQ(logits(0, 0), 3.0);
  EXPECT_EQ(logits(0, 1), 4.0);
}

TEST(NetworkTest, MlpForwardMatchesHandRolledOracle) {
  const Network net = Network::Mlp(5, 4, 3, 42);
  const auto& W1 = net.parameters()[0];
  const auto& b1 = net.parameters()[1];
  const auto& W2 = net.parameters()[2];
  const auto& b2 = net.parameters()[3];
  const std::vector<std::vector<double>> x = {{0.3, -1.2, 0.5, 2.0, -0.7},
                                              {1.0, 0.0, -0.25, 0.125, 0.9}};
  Tensor batch({2, 5});
  for (size_t r = 0; r < 2; ++r) {
    for (size_t c = 0; c < 5; ++c) batch(r, c) = x[r][c];
  }
  const Tensor logits = net.Forward(batch).logits;
  for (size_t r = 0; r < 2; ++r) {
    double hidden[4];
    for (size_t j = 0; j < 4; ++j) {
      double z = b1[j];
      for (size_t k = 0; k < 5; ++k) z += W1[j * 5 + k] * x[r][k];
      hidden[j] = Sigmoid(z);
    }
    for (size_t i = 0; i < 3; ++i) {
      double z = b2[i];
      for (size_t j = 0; j < 4; ++j) z += W2[i * 4 + j] * hidden[j];
      EXPECT_NEAR(logits(r, i), z, 1e-12);
    }
  }
}

TEST(NetworkTest, CnnForwardMatchesDirectConvolution) {
  const Network net = Network::SmallCnn(1, 6, 6, 3, 9);
  Rng rng(3);
  const Tensor batch = RandomInputs(net, 1, rng);
  const auto& K1 = net.parameters()[0];  // 8 x 1 x 3 x 3
  const auto& c1 = net.parameters()[1];
  const auto& K2 = net.parameters()[2];  // 8 x 8 x 3 x 3
  const auto& c2 = net.parameters()[3];
  const auto& W = net.parameters()[4];  // 3 x (8 * 2 * 2)
  const auto& b = net.parameters()[5];

  double a1[8][4][4];
  for (int o = 0; o < 8; ++o) {
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        double z = c1[o];
        for (int dy = 0; dy < 3; ++dy) {
          for (int dx = 0; dx < 3; ++dx) z += K1[o * 9 + dy * 3 + dx] * batch[(y + dy) * 6 + x + dx];
        }
        a1[o][y][x] = Sigmoid(z);
      }
    }
  }
  std::vector<double> flat;
  for (int o = 0; o < 8; ++o) {
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 2; ++x) {
        double z = c2[o];
        for (int c = 0; c < 8; ++c) {
          for (int dy = 0; dy < 3; ++dy) {
            for (int dx = 0; dx < 3; ++dx) {
              z += K2[((o * 8 + c) * 3 + dy) * 3 + dx] * a1[c][y + dy][x + dx];
            }
          }
        }
        flat.push_back(Sigmoid(z));
      }
    }
  }
  const Tensor logits = net.Forward(batch).logits;
  for (size_t i = 0; i < 3; ++i) {
    double z = b[i];
    for (size_t j = 0; j < flat.size(); ++j) z += W[i * flat.size() + j] * flat[j];
    EXPECT_NEAR(logits(0, i), z, 1e-12);
  }
}

TEST(NetworkTest, RejectsMismatchedBatch) {
  const Network net = Network::Mlp(4, 3, 2, 1);
  EXPECT_THROW(net.Forward(Tensor({2, 5})), ShapeError);
}

TEST(NetworkTest, ValidatesArchitecture) {
  EXPECT_THROW(Network::Mlp(4, 3, 1, 1), Error);
  EXPECT_THROW(Network({DenseSpec{4, 3}, DenseSpec{3, 2}}, {4}, 1), Error);
  EXPECT_THROW(Network({DenseSpec{4, 3}, ActivationSpec{}}, {4}, 1), Error);
  EXPECT_THROW(Network({DenseSpec{4, 3}, ActivationSpec{}, DenseSpec{4, 2}}, {4}, 1), ShapeError);
  EXPECT_THROW(Network({Conv2dSpec{1, 2, 3, 1}, FlattenSpec{}, DenseSpec{8, 2}}, {1, 4, 4}, 1),
               Error);
  EXPECT_NO_THROW(Network({Conv2dSpec{1, 2, 3, 1}, ActivationSpec{ActivationKind::kRelu},
                           FlattenSpec{}, DenseSpec{8, 2}},
                          {1, 4, 4}, 1));
  EXPECT_THROW(MakeModel(ModelKind::kCnn, 60, 10, 1), Error);
}

TEST(NetworkTest, InitialisationIsSeededAndBounded) {
  const Network a = Network::Mlp(16, 8, 4, 5);
  const Network b = Network::Mlp(16, 8, 4, 5);
  const Network c = Network::Mlp(16, 8, 4, 6);
  EXPECT_EQ(a.parameters(), b.parameters());
  EXPECT_NE(a.parameters(), c.parameters());
  for (double w : a.parameters()[0].data()) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(16.0));
  for (double w : a.parameters()[2].data()) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(8.0));
  EXPECT_EQ(a.NumParameters(), 16u * 8 + 8 + 8 * 4 + 4);
}

TEST(NetworkTest, ZeroUpstreamGradientGivesZeroGradients) {
  const Network net = Network::SmallCnn(1, 6, 6, 4, 2);
  Rng rng(1);
  const ForwardPass pass = net.Forward(RandomInputs(net, 3, rng));
  const Gradients grads = net.Backward(pass.cache, Tensor({3, 4}));
  for (const auto& t : grads.tensors) {
    for (double v : t.data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(NetworkTest, SingleSampleHeadGradientIsOuterProduct) {
  const Network net = Network::Mlp(6, 5, 3, 8);
  Rng rng(2);
  const Tensor x = RandomInputs(net, 1, rng);
  const std::vector<Label> y = {2};
  const ForwardPass pass = net.Forward(x);
  const LossResult loss = CrossEntropyLoss(pass.logits, y);
  const Gradients grads = net.Backward(pass.cache, loss.dlogits);
  const LastLayerGradient last = net.LastLayer(grads, 1);
  const Tensor& a = pass.cache.penultimate();
  for (size_t i = 0; i < 3; ++i) {
    for (size_t j = 0; j < 5; ++j) EXPECT_EQ(last.matrix(i, j), loss.d[i] * a(0, j));
  }
}

TEST(NetworkTest, BackwardMatchesFiniteDifferences) {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    const Network net = testing::RandomSmallNetwork(seed);
    ASSERT_LE(net.NumParameters(), 200u);
    Rng rng(seed * 31);
    const Tensor x = RandomInputs(net, 3, rng);
    const auto y = RandomLabels(3, net.num_classes(), rng);
    const auto report = testing::CheckFiniteDifferences(net, x, y);
    EXPECT_EQ(report.failed, 0u) << "seed " << seed << " worst relative error " << report.worst;
  }
}

TEST(NetworkTest, StaleCacheIsRejected) {
  Network net = Network::Mlp(4, 3, 2, 1);
  Rng rng(4);
  const ForwardPass pass = net.Forward(RandomInputs(net, 2, rng));
  EXPECT_NO_THROW(net.Backward(pass.cache, Tensor({2, 2})));
  net.SgdStep(net.ZeroGradients(), 0.1);
  EXPECT_THROW(net.Backward(pass.cache, Tensor({2, 2})), Error);
  const Network other = Network::Mlp(4, 3, 2, 1);
  const ForwardPass fresh = net.Forward(RandomInputs(net, 2, rng));
  EXPECT_THROW(other.Backward(fresh.cache, Tensor({2, 2})), Error);
}

TEST(NetworkTest, SgdStep) {
  Network net = Network::Mlp(3, 2, 2, 3);
  const auto before = net.parameters();
  Gradients g = net.ZeroGradients();
  for (auto& t : g.tensors) t.Fill(2.0);
  net.SgdStep(g, 0.0);
  EXPECT_EQ(net.parameters(), before);

  net.mutable_parameters()[0][0] = 1.0;
  net.SgdStep(g, 0.1);
  EXPECT_DOUBLE_EQ(net.parameters()[0][0], 0.8);
  EXPECT_THROW(net.SgdStep(g, -1.0), Error);
}

TEST(NetworkTest, SmallStepDecreasesLoss) {
  Network net = Network::Mlp(8, 6, 4, 11);
  Rng rng(5);
  const Tensor x = RandomInputs(net, 8, rng);
  const auto y = RandomLabels(8, 4, rng);
  const BatchGradients bg = ComputeBatchGradients(net, x, y);
  net.SgdStep(bg.grads, 1e-3);
  EXPECT_LE(CrossEntropyLoss(net.Forward(x).logits, y).loss, bg.loss);
}

TEST(NetworkTest, LastLayerRowSumsAreExact) {
  const Network net = Network::Mlp(10, 7, 5, 3);
  Rng rng(6);
  const Tensor x = RandomInputs(net, 4, rng);
  const BatchGradients bg = ComputeBatchGradients(net, x, RandomLabels(4, 5, rng));
  const auto& last = bg.last_layer;
  EXPECT_EQ(last.sample_count, 4);
  EXPECT_EQ(last.matrix, bg.grads.tensors[2]);
  for (size_t i = 0; i < 5; ++i) {
    double sum = 0.0;
    for (size_t j = 0; j < 7; ++j) sum += last.matrix(i, j);
    EXPECT_EQ(last.g[i], sum);
  }
  EXPECT_THROW(LastLayerGradient::FromMatrix(last.matrix, 0), Error);
}

TEST(NetworkTest, NegativeRowSumImpliesLabelPresent) {
  for (int trial = 0; trial < 200; ++trial) {
    const auto seed = static_cast<uint64_t>(trial);
    const Network net = trial % 2 ? Network::Mlp(16, 12, 6, seed)
                                  : Network::SmallCnn(1, 5, 5, 6, seed);
    Rng rng(seed + 1000);
    const size_t batch = size_t{1} << (trial % 6);
    const auto y = RandomLabels(batch, 6, rng);
    const auto g = ComputeBatchGradients(net, RandomInputs(net, batch, rng), y).last_layer.g;
    const auto truth = LabelMultiset::FromLabels(y, 6);
    for (size_t i = 0; i < 6; ++i) {
      if (g[i] < 0.0) {
        EXPECT_GT(truth.counts()[i], 0) << "trial " << trial << " label " << i + 1;
      }
    }
  }
}

TEST(NetworkTest, RowSumSignFollowsOutputGradient) {
  for (uint64_t seed = 0; seed < 50; ++seed) {
    const Network net = Network::Mlp(8, 10, 4, seed);
    Rng rng(seed);
    const Tensor x = RandomInputs(net, 1, rng);
    const auto y = RandomLabels(1, 4, rng);
    const ForwardPass pass = net.Forward(x);
    const LossResult loss = CrossEntropyLoss(pass.logits, y);
    const auto g = net.LastLayer(net.Backward(pass.cache, loss.dlogits), 1).g;
    for (size_t i = 0; i < 4; ++i) EXPECT_EQ(std::signbit(g[i]), std::signbit(loss.d[i]));
  }
}

TEST(NetworkTest, ForwardBackwardAreBitReproducible) {
  const Network a = Network::SmallCnn(1, 7, 7, 5, 21);
  const Network b = Network::SmallCnn(1, 7, 7, 5, 21);
  Rng r1(8), r2(8);
  const Tensor x1 = RandomInputs(a, 4, r1), x2 = RandomInputs(b, 4, r2);
  const auto y = std::vector<Label>{1, 2, 5, 5};
  const BatchGradients ga = ComputeBatchGradients(a, x1, y);
  const BatchGradients gb = ComputeBatchGradients(b, x2, y);
  EXPECT_EQ(ga.grads, gb.grads);
  EXPECT_EQ(ga.loss, gb.loss);
}

TEST(NetworkTest, ModelKindNames) {
  EXPECT_EQ(ParseModelKind("mlp"), ModelKind::kMlp);
  EXPECT_EQ(ParseModelKind(ModelKindName(ModelKind::kCnn)), ModelKind::kCnn);
  EXPECT_THROW(ParseModelKind("resnet"), Error);
  EXPECT_EQ(MakeModel(ModelKind::kMlp, 64, 10, 1).penultimate_width(), 64u);
  EXPECT_EQ(MakeModel(ModelKind::kCnn, 64, 10, 1).input_shape(), (Shape{1, 8, 8}));
}

}  // namespace
}  // namespace llg
