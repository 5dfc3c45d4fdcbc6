/*
 * Copyright 2026 The NUQLS Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "nuqls/net.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include "test_util.hpp"

namespace nuqls {
namespace {

using testing::fd_jacobian;
using testing::make_spec;
using testing::random_matrix;
using testing::random_vector;

TEST(MlpSpecTest, ParamCountWithoutHiddenLayers) {
  const MlpSpec s = make_spec(1, 1, {}, Activation::kIdentity, Scaling::kStandard, false);
  EXPECT_EQ(s.param_count(), 1);
  EXPECT_EQ(init_params(s, InitScheme::kStandardNormal, 3).size(), 1);
}

TEST(MlpSpecTest, ParamCountMatchesLayout) {
  const MlpSpec s = make_spec(3, 2, {5, 4});
  EXPECT_EQ(s.param_count(), (3 * 5 + 5) + (5 * 4 + 4) + (4 * 2 + 2));
  const Mlp net(s);
  ASSERT_EQ(net.layers().size(), 3u);
  EXPECT_EQ(net.layers()[1].weight_offset, 20);
  EXPECT_EQ(net.layers()[1].bias_offset, 40);
}

TEST(MlpSpecTest, RejectsInvalidSpecs) {
  EXPECT_THROW(make_spec(0, 1, {}).validate(), std::invalid_argument);
  EXPECT_THROW(make_spec(1, 1, {0}).validate(), std::invalid_argument);
}

TEST(MlpSpecTest, EnumRoundTrip) {
  for (Activation a : {Activation::kTanh, Activation::kSilu, Activation::kRelu, Activation::kIdentity})
    EXPECT_EQ(parse_activation(to_string(a)), a);
  EXPECT_EQ(parse_scaling(to_string(Scaling::kNtk)), Scaling::kNtk);
  EXPECT_EQ(parse_init_scheme(to_string(InitScheme::kXavierNormal)), InitScheme::kXavierNormal);
}

TEST(InitParamsTest, DeterministicPerSeed) {
  const MlpSpec s = make_spec(4, 2, {8});
  EXPECT_EQ(init_params(s, InitScheme::kXavierNormal, 11), init_params(s, InitScheme::kXavierNormal, 11));
  EXPECT_NE(init_params(s, InitScheme::kXavierNormal, 11), init_params(s, InitScheme::kXavierNormal, 12));
}

TEST(InitParamsTest, XavierVariancePerLayer) {
  const MlpSpec s = make_spec(512, 512, {512}, Activation::kTanh, Scaling::kStandard, false);
  const Mlp net(s);
  const ParamVector theta = init_params(s, InitScheme::kXavierNormal, 5);
  for (const LayerLayout& layer : net.layers()) {
    const auto w = theta.segment(layer.weight_offset, layer.fan_in * layer.fan_out);
    const double mean = w.mean();
    const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size() - 1);
    const double expected = 2.0 / static_cast<double>(layer.fan_in + layer.fan_out);
    EXPECT_NEAR(var / expected, 1.0, 0.2);
  }
}

TEST(InitParamsTest, StandardNormalVariance) {
  const MlpSpec s = make_spec(50, 1, {400});
  const ParamVector theta = init_params(s, InitScheme::kStandardNormal, 2);
  const double mean = theta.mean();
  const double var = (theta.array() - mean).square().mean();
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(ForwardTest, ZeroParamsNoBiasGiveZero) {
  const MlpSpec s = make_spec(3, 2, {6, 5}, Activation::kTanh, Scaling::kStandard, false);
  const Mlp net(s);
  const Vector out = net.forward(ParamVector::Zero(s.param_count()), random_vector(3, 1));
  EXPECT_EQ(out, Vector::Zero(2));
}

TEST(ForwardTest, LinearModelIsWx) {
  const MlpSpec s = make_spec(3, 2, {}, Activation::kIdentity, Scaling::kStandard, false);
  const Mlp net(s);
  const ParamVector theta = random_vector(6, 2);
  const Vector x = random_vector(3, 3);
  // Row-major 2 x 3 weight.
  const Matrix W = Eigen::Map<const RowMajorMatrix>(theta.data(), 2, 3);
  EXPECT_LT((net.forward(theta, x) - W * x).norm(), 1e-15);
}

// y = W2 tanh(s1 (W1 x + b1)) + b2, scaled per layer when NTK scaling is on.
Vector hand_forward(const ParamVector& t, const Vector& x, Index h, Index c, bool ntk) {
  const Index d = x.size();
  const double s1 = ntk ? 1.0 / std::sqrt(static_cast<double>(d)) : 1.0;
  const double s2 = ntk ? 1.0 / std::sqrt(static_cast<double>(h)) : 1.0;
  Vector hidden(h);
  for (Index j = 0; j < h; ++j) {
    double acc = t(d * h + j);
    for (Index i = 0; i < d; ++i) acc += t(j * d + i) * x(i);
    hidden(j) = std::tanh(s1 * acc);
  }
  const Index off = d * h + h;
  Vector y(c);
  for (Index k = 0; k < c; ++k) {
    double acc = t(off + c * h + k);
    for (Index j = 0; j < h; ++j) acc += t(off + k * h + j) * hidden(j);
    y(k) = s2 * acc;
  }
  return y;
}

TEST(ForwardTest, MatchesHandComposition) {
  for (bool ntk : {false, true}) {
    const MlpSpec s = make_spec(4, 3, {7}, Activation::kTanh, ntk ? Scaling::kNtk : Scaling::kStandard, true);
    const Mlp net(s);
    const ParamVector theta = random_vector(s.param_count(), 9);
    const Vector x = random_vector(4, 10);
    EXPECT_LT((net.forward(theta, x) - hand_forward(theta, x, 7, 3, ntk)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ForwardTest, BatchRowsAreIndependent) {
  const MlpSpec s = make_spec(3, 2, {5}, Activation::kSilu);
  const Mlp net(s);
  const ParamVector theta = random_vector(s.param_count(), 4);
  const Matrix X = random_matrix(6, 3, 5);
  const Matrix Y = net.forward_batch(theta, X);
  for (Index i = 0; i < X.rows(); ++i) {
    EXPECT_LT((Y.row(i).transpose() - net.forward(theta, X.row(i).transpose())).norm(), 1e-14);
  }
}

TEST(ForwardTest, DimensionMismatchThrows) {
  const MlpSpec s = make_spec(3, 1, {4});
  const Mlp net(s);
  const ParamVector theta = ParamVector::Zero(s.param_count());
  EXPECT_THROW(net.forward(theta, Vector::Zero(2)), std::invalid_argument);
  EXPECT_THROW(net.forward(ParamVector::Zero(3), Vector::Zero(3)), std::invalid_argument);
  EXPECT_THROW(net.jvp(theta, Vector::Zero(3), Vector::Zero(2)), std::invalid_argument);
  EXPECT_THROW(net.vjp(theta, Vector::Zero(3), Vector::Zero(2)), std::invalid_argument);
}

TEST(ForwardTest, BitwiseDeterministic) {
  const MlpSpec s = make_spec(5, 2, {16, 16});
  const Mlp net(s);
  const ParamVector theta = random_vector(s.param_count(), 1);
  const Matrix X = random_matrix(10, 5, 2);
  const Matrix a = net.forward_batch(theta, X);
  const Matrix b = net.forward_batch(theta, X);
  EXPECT_EQ(a, b);
}

TEST(JacobianTest, LinearModelIsInput) {
  const MlpSpec s = make_spec(4, 1, {}, Activation::kIdentity, Scaling::kStandard, false);
  const Mlp net(s);
  const Vector x = random_vector(4, 7);
  const Matrix J = net.jacobian(random_vector(4, 8), x);
  EXPECT_LT((J - x.transpose()).norm(), 1e-15);
}

TEST(JacobianTest, ShapeForTwoOutputs) {
  const MlpSpec s = make_spec(3, 2, {4});
  const Mlp net(s);
  const Matrix J = net.jacobian(random_vector(s.param_count(), 1), random_vector(3, 2));
  EXPECT_EQ(J.rows(), 2);
  EXPECT_EQ(J.cols(), s.param_count());
}

class SmoothActivationTest : public ::testing::TestWithParam<std::tuple<Activation, Scaling, bool>> {};

TEST_P(SmoothActivationTest, MatchesFiniteDifferences) {
  const auto [act, scaling, bias] = GetParam();
  const MlpSpec s = make_spec(3, 2, {6, 5}, act, scaling, bias);
  const Mlp net(s);
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    const ParamVector theta = random_vector(s.param_count(), 100 + trial, 0.7);
    const Vector x = random_vector(3, 200 + trial);
    const Matrix J = net.jacobian(theta, x);
    const Matrix F = fd_jacobian(net, theta, x);
    const double err = ((J - F).array().abs() / (1.0 + J.array().abs())).maxCoeff();
    EXPECT_LT(err, 1e-5);
  }
}

TEST_P(SmoothActivationTest, AdjointIdentity) {
  const auto [act, scaling, bias] = GetParam();
  const MlpSpec s = make_spec(4, 3, {8, 8}, act, scaling, bias);
  const Mlp net(s);
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    const ParamVector theta = random_vector(s.param_count(), trial);
    const Vector x = random_vector(4, 50 + trial);
    const Vector v = random_vector(s.param_count(), 70 + trial);
    const Vector u = random_vector(3, 90 + trial);
    const double lhs = u.dot(net.jvp(theta, x, v));
    const double rhs = net.vjp(theta, x, u).dot(v);
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

INSTANTIATE_TEST_SUITE_P(Nets, SmoothActivationTest,
                         ::testing::Combine(::testing::Values(Activation::kTanh, Activation::kSilu),
                                            ::testing::Values(Scaling::kStandard, Scaling::kNtk),
                                            ::testing::Bool()));

TEST(JvpTest, ZeroTangentGivesZero) {
  const MlpSpec s = make_spec(3, 2, {5});
  const Mlp net(s);
  const Vector out = net.jvp(random_vector(s.param_count(), 1), random_vector(3, 2), Vector::Zero(s.param_count()));
  EXPECT_EQ(out, Vector::Zero(2));
}

TEST(JvpTest, BasisTangentsGiveJacobianColumns) {
  const MlpSpec s = make_spec(3, 2, {5, 4}, Activation::kTanh, Scaling::kNtk);
  const Mlp net(s);
  const ParamVector theta = random_vector(s.param_count(), 3);
  const Vector x = random_vector(3, 4);
  const Matrix J = net.jacobian(theta, x);
  for (Index k = 0; k < s.param_count(); ++k) {
    const Vector col = net.jvp(theta, x, Vector::Unit(s.param_count(), k));
    EXPECT_LT((col - J.col(k)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(BatchTest, BatchedProductsMatchStackedJacobian) {
  const MlpSpec s = make_spec(3, 2, {6}, Activation::kSilu);
  const Mlp net(s);
  const ParamVector theta = random_vector(s.param_count(), 5);
  const Matrix X = random_matrix(7, 3, 6);
  const Matrix J = net.jacobian_batch(theta, X);
  ASSERT_EQ(J.rows(), 14);
  for (Index i = 0; i < X.rows(); ++i) {
    EXPECT_LT((J.middleRows(2 * i, 2) - net.jacobian(theta, X.row(i).transpose())).norm(), 1e-13);
  }
  const Matrix V = random_matrix(s.param_count(), 3, 7);
  EXPECT_LT((net.jvp_batch(theta, X, V) - J * V).norm(), 1e-11);
  const Matrix U = random_matrix(14, 3, 8);
  EXPECT_LT((net.vjp_batch(theta, X, U) - J.transpose() * U).norm(), 1e-11);
}

TEST(BatchTest, ReluForwardAndJacobianShape) {
  const MlpSpec s = make_spec(2, 1, {4}, Activation::kRelu);
  const Mlp net(s);
  const ParamVector theta = random_vector(s.param_count(), 1);
  const Matrix X = random_matrix(5, 2, 2);
  EXPECT_TRUE(net.forward_batch(theta, X).allFinite());
  EXPECT_EQ(net.jacobian_batch(theta, X).rows(), 5);
}

double median_seconds(const std::function<void()>& fn, int reps) {
  std::vector<double> t;
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

TEST(CostTest, JvpAndVjpWithinFourForwards) {
  const MlpSpec s = make_spec(32, 4, {256, 256});
  const Mlp net(s);
  const ParamVector theta = random_vector(s.param_count(), 1, 0.1);
  const Matrix X = random_matrix(512, 32, 2);
  const Matrix V = random_matrix(s.param_count(), 1, 3);
  const Matrix U = random_matrix(512 * 4, 1, 4);
  volatile double sink = 0.0;
  const double fwd = median_seconds([&] { sink = sink + net.forward_batch(theta, X)(0, 0); }, 21);
  const double jvp = median_seconds([&] { sink = sink + net.jvp_batch(theta, X, V)(0, 0); }, 21);
  const double vjp = median_seconds([&] { sink = sink + net.vjp_batch(theta, X, U)(0, 0); }, 21);
  RecordProperty("jvp_over_forward", std::to_string(jvp / fwd));
  RecordProperty("vjp_over_forward", std::to_string(vjp / fwd));
  EXPECT_LE(jvp, 4.0 * fwd);
  EXPECT_LE(vjp, 4.0 * fwd);
}

}  // namespace
}  // namespace nuqls
