// Copyright 2026 The TERELU Workbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <variant>

#include "terelu/gradcheck_suite.hpp"
#include "terelu/layers.hpp"

using namespace terelu;

namespace {

constexpr double kTwoMinusInvE = 1.632120558828557678404476229838539132554;
constexpr double kInvEMinusOne = -0.6321205588285576784044762298385391325542;

}  // namespace

// Dense.

TEST(DenseLayer, IdentityLayer) {
  DenseLayer l(Matrix::identity(2), Matrix(1, 2));
  EXPECT_EQ(l.forward(Matrix{{3, 4}}), (Matrix{{3, 4}}));
}

TEST(DenseLayer, ZeroWeightsGiveBias) {
  DenseLayer l(Matrix(3, 2), Matrix{{1, 2}});
  EXPECT_EQ(l.forward(Matrix{{5, -1, 7}, {0, 0, 1}}), (Matrix{{1, 2}, {1, 2}}));
}

TEST(DenseLayer, DotProduct) {
  DenseLayer l(Matrix{{1}, {1}}, Matrix{{0}});
  EXPECT_EQ(l.forward(Matrix{{2, 3}}), (Matrix{{5}}));
}

TEST(DenseLayer, ZeroUpstreamGivesZeroGradients) {
  Rng rng(1);
  DenseLayer l = DenseLayer::random(3, 2, 1.0, rng);
  l.forward(rng_normal(rng, 4, 3, 1.0));
  EXPECT_EQ(l.backward(Matrix(4, 2)), Matrix(4, 3));
  EXPECT_EQ(l.grad_weights(), Matrix(3, 2));
  EXPECT_EQ(l.grad_bias(), Matrix(1, 2));
}

TEST(DenseLayer, IdentityJacobianPassesUpstreamThrough) {
  DenseLayer l(Matrix::identity(2), Matrix(1, 2));
  l.forward(Matrix{{0.3, -0.7}});
  EXPECT_EQ(l.backward(Matrix{{1.5, -2.5}}), (Matrix{{1.5, -2.5}}));
}

TEST(DenseLayer, MatchesFiniteDifferences) {
  Rng rng(2);
  Layer l = DenseLayer::random(3, 2, 1.0, rng);
  const auto r = gradcheck::check_layer(l, rng_normal(rng, 3, 3, 1.0), rng_normal(rng, 3, 2, 1.0), 1e-6);
  EXPECT_TRUE(r.passed) << r.max_rel_err;
}

TEST(DenseLayer, Errors) {
  DenseLayer l(2, 3);
  EXPECT_THROW(l.backward(Matrix(1, 3)), StateError);
  EXPECT_THROW(l.forward(Matrix(1, 4)), ShapeError);
  EXPECT_THROW(DenseLayer(Matrix(2, 3), Matrix(1, 2)), ShapeError);
}

// Batch norm.

TEST(BatchNormLayer, ConstantColumnMapsToShift) {
  BatchNormLayer l(1);
  l.params()[1].value[0] = 0.25;
  const Matrix out = l.forward(Matrix{{3}, {3}, {3}}, true);
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(BatchNormLayer, AlreadyNormalizedInputIsNearlyUnchanged) {
  BatchNormLayer l(1);
  const Matrix x{{-1}, {1}, {-1}, {1}};  // mean 0, biased variance 1
  EXPECT_LT(max_abs_diff(l.forward(x, true), x), 1e-2);
}

TEST(BatchNormLayer, TwoPointColumn) {
  BatchNormLayer l(1);
  const Matrix out = l.forward(Matrix{{0}, {2}}, true);
  const double k = 0.9999950000374996875;  // 1 / sqrt(1 + 1e-5)
  EXPECT_NEAR(out(0, 0), -1.0, 1e-2);
  EXPECT_NEAR(out(1, 0), 1.0, 1e-2);
  EXPECT_NEAR(out(1, 0), k, 1e-15);
}

TEST(BatchNormLayer, TrainingOutputIsStandardized) {
  Rng rng(3);
  BatchNormLayer l(64);
  Matrix x = rng_normal(rng, 64, 64, 3.0);
  for (double& v : x.values()) v += 5.0;
  const auto s = column_mean_var(l.forward(x, true));
  for (std::size_t j = 0; j < 64; ++j) {
    EXPECT_LT(std::abs(s.mean(0, j)), 1e-9);
    EXPECT_LT(std::abs(s.var(0, j) - 1.0), 1e-3);
  }
}

TEST(BatchNormLayer, RunningStatsMoveOnlyInTraining) {
  BatchNormLayer l(1, 1e-5, 0.9);
  l.forward(Matrix{{0}, {2}}, false);
  EXPECT_EQ(l.running_mean()(0, 0), 0.0);
  EXPECT_EQ(l.running_var()(0, 0), 1.0);
  l.forward(Matrix{{0}, {2}}, true);
  EXPECT_DOUBLE_EQ(l.running_mean()(0, 0), 0.1);
  EXPECT_DOUBLE_EQ(l.running_var()(0, 0), 1.0);
  l.forward(Matrix{{4}, {4}}, true);
  EXPECT_DOUBLE_EQ(l.running_mean()(0, 0), 0.9 * 0.1 + 0.1 * 4.0);
  EXPECT_DOUBLE_EQ(l.running_var()(0, 0), 0.9);
}

TEST(BatchNormLayer, EvalModeUsesRunningStats) {
  BatchNormLayer l(1);
  const Matrix out = l.forward(Matrix{{3}}, false);  // running mean 0, var 1
  EXPECT_NEAR(out(0, 0), 3.0 / std::sqrt(1.0 + 1e-5), 1e-15);
}

TEST(BatchNormLayer, ZeroUpstreamGivesZeroGradients) {
  Rng rng(4);
  BatchNormLayer l(3);
  l.forward(rng_normal(rng, 5, 3, 1.0), true);
  EXPECT_EQ(l.backward(Matrix(5, 3)), Matrix(5, 3));
  for (const auto& p : l.params())
    for (double g : p.grad) EXPECT_EQ(g, 0.0);
}

TEST(BatchNormLayer, InputGradientColumnsSumToZero) {
  Rng rng(5);
  BatchNormLayer l(4);
  l.forward(rng_normal(rng, 7, 4, 2.0), true);
  const Matrix dx = l.backward(rng_normal(rng, 7, 4, 1.0));
  const Matrix sums = column_sums(dx);
  for (double s : sums.values()) EXPECT_LT(std::abs(s), 1e-9);
}

TEST(BatchNormLayer, MatchesFiniteDifferences) {
  Rng rng(6);
  Layer l = BatchNormLayer(3);
  auto ps = layer_params(l);
  for (double& g : ps[0].value) g = rng.uniform(0.5, 2.0);
  for (double& d : ps[1].value) d = rng.uniform(-1.0, 1.0);
  const auto r =
      gradcheck::check_layer(l, rng_normal(rng, 4, 3, 1.0), rng_normal(rng, 4, 3, 1.0), 1e-5);
  EXPECT_TRUE(r.passed) << r.max_rel_err;
}

TEST(BatchNormLayer, Errors) {
  BatchNormLayer l(2);
  EXPECT_THROW(l.forward(Matrix(1, 2), true), std::invalid_argument);
  EXPECT_THROW(l.backward(Matrix(2, 2)), StateError);
  l.forward(Matrix(3, 2), false);
  EXPECT_THROW(l.backward(Matrix(3, 2)), StateError);
  EXPECT_THROW(BatchNormLayer(2, 0.0), std::invalid_argument);
}

// Activation.

TEST(ActivationLayer, TereluRow) {
  ActivationLayer l(TereluParams{});
  const Matrix out = l.forward(Matrix{{-1, 0.5, 2}}, true);
  EXPECT_NEAR(out(0, 0), kInvEMinusOne, 1e-15);
  EXPECT_EQ(out(0, 1), 0.5);
  EXPECT_NEAR(out(0, 2), kTwoMinusInvE, 1e-15);
}

TEST(ActivationLayer, ReluAndTanhExamples) {
  ActivationLayer relu(ReluParams{});
  EXPECT_EQ(relu.forward(Matrix{{-1, -2}, {-0.5, -9}}, true), Matrix(2, 2));
  ActivationLayer tanh(TanhParams{});
  EXPECT_EQ(tanh.forward(Matrix(2, 3), true), Matrix(2, 3));
}

TEST(ActivationLayer, LinearRegionPassesGradientAndLeavesBetaAlone) {
  ActivationLayer l(TereluParams{});
  l.forward(Matrix{{0.1, 0.5}, {0.9, 0.3}}, true);
  const Matrix up(2, 2, 1.0);
  EXPECT_EQ(l.backward(up), up);
  EXPECT_EQ(l.grad_beta(), 0.0);
}

TEST(ActivationLayer, BetaGradientAtThreshold) {
  ActivationLayer l(TereluParams{});
  l.forward(Matrix{{1.0}}, true);
  l.backward(Matrix{{1.0}});
  EXPECT_DOUBLE_EQ(l.grad_beta(), 1.0);
}

TEST(ActivationLayer, BetaGradientIsSumOverEntries) {
  ActivationLayer l(TereluParams{1.0, 2.0, 1.0});
  l.forward(Matrix{{2.0, 0.5}, {-1.0, 2.0}}, true);
  l.backward(Matrix{{1.0, 5.0}, {7.0, 0.5}});
  EXPECT_NEAR(l.grad_beta(), 1.5 * kTwoMinusInvE, 1e-15);
}

TEST(ActivationLayer, NonTereluKindsHaveZeroBetaGradient) {
  ActivationLayer l(EluParams{});
  l.forward(Matrix{{3.0}}, true);
  l.backward(Matrix{{1.0}});
  EXPECT_EQ(l.grad_beta(), 0.0);
}

TEST(ActivationLayer, MatchesFiniteDifferencesForEveryKindIncludingBeta) {
  Rng rng(7);
  for (auto kind : kAllActivationKinds) {
    const auto spec = ActivationSpec::defaults(kind);
    Layer l = ActivationLayer(spec);
    const Matrix x = gradcheck::activation_input(spec, 5, 4, rng);
    const auto r = gradcheck::check_layer(l, x, rng_normal(rng, 5, 4, 1.0), 1e-6);
    EXPECT_TRUE(r.passed) << activation_name(kind) << " " << r.max_rel_err;
  }
}

TEST(ActivationLayer, BackwardBeforeForwardIsAnError) {
  ActivationLayer l(ReluParams{});
  EXPECT_THROW(l.backward(Matrix(1, 1)), StateError);
}

// Maxout.

namespace {

MaxoutLayer abs_maxout() {
  return MaxoutLayer({Matrix::identity(2), Matrix{{-1, 0}, {0, -1}}}, {Matrix(1, 2), Matrix(1, 2)});
}

}  // namespace

TEST(MaxoutLayer, IdentityAndNegationGiveAbsoluteValue) {
  MaxoutLayer l = abs_maxout();
  EXPECT_EQ(l.forward(Matrix{{3, -2}}), (Matrix{{3, 2}}));
}

TEST(MaxoutLayer, IdenticalPiecesMatchSinglePiece) {
  Rng rng(8);
  const Matrix w = rng_normal(rng, 3, 2, 1.0);
  const Matrix b = rng_normal(rng, 1, 2, 1.0);
  MaxoutLayer l({w, w, w}, {b, b, b});
  const Matrix x = rng_normal(rng, 4, 3, 1.0);
  EXPECT_EQ(l.forward(x), add_row_broadcast(matmul(x, w), b));
  for (auto winner : l.winners()) EXPECT_EQ(winner, 0u);
}

TEST(MaxoutLayer, ConstantPieces) {
  MaxoutLayer l({Matrix(2, 1), Matrix(2, 1)}, {Matrix{{0}}, Matrix{{10}}});
  EXPECT_EQ(l.forward(Matrix{{1, 2}, {-5, 3}}), (Matrix{{10}, {10}}));
}

TEST(MaxoutLayer, GradientRoutesToWinner) {
  MaxoutLayer l({Matrix{{1}}, Matrix{{-1}}}, {Matrix{{0}}, Matrix{{0}}});
  l.forward(Matrix{{3}});
  EXPECT_EQ(l.backward(Matrix{{1}}), (Matrix{{1}}));
  EXPECT_EQ(l.grad_weights(1), Matrix(1, 1));
  EXPECT_EQ(l.grad_bias(1), Matrix(1, 1));
  EXPECT_EQ(l.grad_weights(0), (Matrix{{3}}));
}

TEST(MaxoutLayer, MatchesFiniteDifferencesAwayFromTies) {
  Rng rng(9);
  Layer l = MaxoutLayer::random(4, 3, 3, 1.0, rng);
  Matrix x = rng_normal(rng, 5, 4, 1.0);
  while (!gradcheck::maxout_has_margin(std::get<MaxoutLayer>(l), x, 1e-3))
    x = rng_normal(rng, 5, 4, 1.0);
  const auto r = gradcheck::check_layer(l, x, rng_normal(rng, 5, 3, 1.0), 1e-6);
  EXPECT_TRUE(r.passed) << r.max_rel_err;
}

TEST(MaxoutLayer, Errors) {
  EXPECT_THROW(MaxoutLayer({Matrix(2, 2)}, {Matrix(1, 2)}), std::invalid_argument);
  EXPECT_THROW(MaxoutLayer({Matrix(2, 2), Matrix(2, 3)}, {Matrix(1, 2), Matrix(1, 3)}), ShapeError);
  MaxoutLayer l = abs_maxout();
  EXPECT_THROW(l.backward(Matrix(1, 2)), StateError);
  EXPECT_THROW(l.forward(Matrix(1, 3)), ShapeError);
}

// Parameter exposure.

TEST(LayerParams, Counts) {
  Layer relu = ActivationLayer(ReluParams{});
  EXPECT_TRUE(layer_params(relu).empty());

  Layer terelu = ActivationLayer(TereluParams{});
  const auto tp = layer_params(terelu);
  ASSERT_EQ(tp.size(), 1u);
  EXPECT_EQ(tp[0].name, "beta");
  EXPECT_EQ(tp[0].value.size(), 1u);

  Layer dense = DenseLayer(3, 2);
  const auto dp = layer_params(dense);
  ASSERT_EQ(dp.size(), 2u);
  EXPECT_EQ(dp[0].value.size(), 6u);
  EXPECT_EQ(dp[1].value.size(), 2u);

  Layer bn = BatchNormLayer(4);
  EXPECT_EQ(layer_params(bn).size(), 2u);

  Layer mo = MaxoutLayer({Matrix(2, 2), Matrix(2, 2), Matrix(2, 2)},
                         {Matrix(1, 2), Matrix(1, 2), Matrix(1, 2)});
  EXPECT_EQ(layer_params(mo).size(), 6u);
}

TEST(LayerParams, WritingThroughViewChangesForward) {
  Layer dense = DenseLayer(Matrix::identity(2), Matrix(1, 2));
  layer_params(dense)[1].value[1] = 10.0;
  EXPECT_EQ(layer_forward(dense, Matrix{{1, 1}}, false), (Matrix{{1, 11}}));

  Layer terelu = ActivationLayer(TereluParams{});
  const Matrix x{{3.0}};
  const Matrix before = layer_forward(terelu, x, true);
  layer_params(terelu)[0].value[0] = 2.0;
  const Matrix after = layer_forward(terelu, x, true);
  EXPECT_DOUBLE_EQ(after(0, 0), 2.0 * before(0, 0));
}

TEST(LayerParams, GradientViewsSurviveBackward) {
  Rng rng(10);
  Layer dense = DenseLayer::random(3, 2, 1.0, rng);
  const auto ps = layer_params(dense);
  const Matrix x = rng_normal(rng, 4, 3, 1.0);
  layer_forward(dense, x, true);
  layer_backward(dense, Matrix(4, 2, 1.0));
  const Matrix expected = column_sums(Matrix(4, 2, 1.0));
  EXPECT_EQ(ps[1].grad[0], expected(0, 0));
  EXPECT_EQ(ps[1].grad[1], expected(0, 1));
}

TEST(Layers, ForwardIsRepeatable) {
  Rng rng(11);
  Layer d = DenseLayer::random(4, 3, 1.0, rng);
  Layer b = BatchNormLayer(3);
  Layer a = ActivationLayer(TereluParams{});
  const Matrix x = rng_normal(rng, 6, 4, 1.0);
  const auto run = [&] {
    return layer_forward(a, layer_forward(b, layer_forward(d, x, true), true), true);
  };
  EXPECT_EQ(run(), run());
}

TEST(Layers, RandomShapesMatchFiniteDifferences) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 2 + rng.below(4), in = 1 + rng.below(5), out = 1 + rng.below(5);
    Layer dense = DenseLayer::random(in, out, 1.0, rng);
    EXPECT_TRUE(gradcheck::check_layer(dense, rng_normal(rng, rows, in, 1.0),
                                       rng_normal(rng, rows, out, 1.0), 1e-5)
                    .passed);
    Layer bn = BatchNormLayer(in);
    EXPECT_TRUE(gradcheck::check_layer(bn, rng_normal(rng, rows, in, 1.0),
                                       rng_normal(rng, rows, in, 1.0), 1e-5)
                    .passed);
    const auto spec = ActivationSpec::defaults(kAllActivationKinds[rng.below(8)]);
    Layer act = ActivationLayer(spec);
    EXPECT_TRUE(gradcheck::check_layer(act, gradcheck::activation_input(spec, rows, in, rng),
                                       rng_normal(rng, rows, in, 1.0), 1e-5)
                    .passed)
        << activation_name(spec.kind());
  }
}
