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

#include "nuqls/ntk_gp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "nuqls/log.hpp"
#include "test_util.hpp"

namespace nuqls {
namespace {

using testing::fd_jacobian;
using testing::make_spec;
using testing::random_matrix;
using testing::random_vector;

// Stacked finite-difference Jacobian: an oracle independent of reverse mode.
Matrix fd_stacked(const Mlp& net, const ParamVector& theta, const Matrix& X) {
  const Index c = net.output_dim();
  Matrix J(X.rows() * c, net.num_params());
  for (Index i = 0; i < X.rows(); ++i) J.middleRows(i * c, c) = fd_jacobian(net, theta, X.row(i).transpose(), 1e-6);
  return J;
}

// Posterior from an eigendecomposition of the FD Gram.
struct OraclePosterior {
  Vector mean;
  Vector variance;
};

OraclePosterior oracle_regression(const Mlp& net, const ParamVector& theta, const Dataset& train, const Matrix& Xs,
                                  double gamma) {
  const Matrix JX = fd_stacked(net, theta, train.X);
  const Matrix Js = fd_stacked(net, theta, Xs);
  const Matrix K = JX * JX.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(K);
  const Matrix Kinv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  const Matrix kxX = Js * JX.transpose();
  OraclePosterior out;
  out.mean = net.forward_batch(theta, Xs).col(0) + kxX * Kinv * (train.Y.col(0) - net.forward_batch(theta, train.X).col(0));
  out.variance = ((Js * Js.transpose()).diagonal() - (kxX * Kinv * kxX.transpose()).diagonal()) * gamma * gamma;
  return out;
}

struct SmallProblem {
  MlpSpec spec;
  ParamVector theta;
  Dataset train;
  Matrix X_test;
};

SmallProblem small_problem(Index n = 6, Index width = 20) {
  SmallProblem p;
  p.spec = make_spec(2, 1, {width}, Activation::kTanh, Scaling::kNtk, true);
  p.theta = random_vector(p.spec.param_count(), 42);
  p.train.X = random_matrix(n, 2, 43);
  p.train.Y = random_matrix(n, 1, 44);
  p.X_test = random_matrix(5, 2, 45);
  return p;
}

class QuietLog {
 public:
  QuietLog() : old_(set_log_sink([this](LogLevel, const std::string& m) { messages.push_back(m); })) {}
  ~QuietLog() { set_log_sink(old_); }
  std::vector<std::string> messages;

 private:
  LogSink old_;
};

TEST(NtkBlockTest, LinearModelIsInnerProduct) {
  const Mlp net(make_spec(4, 1, {}, Activation::kIdentity, Scaling::kStandard, false));
  const Vector x = random_vector(4, 1);
  const Vector y = random_vector(4, 2);
  EXPECT_NEAR(ntk_block(net, random_vector(4, 3), x, y)(0, 0), x.dot(y), 1e-14);
}

TEST(NtkBlockTest, SymmetryAndPsd) {
  const Mlp net(make_spec(3, 3, {10}, Activation::kSilu));
  const ParamVector theta = random_vector(net.num_params(), 4);
  const Vector x = random_vector(3, 5);
  const Vector y = random_vector(3, 6);
  EXPECT_LT((ntk_block(net, theta, x, y) - ntk_block(net, theta, y, x).transpose()).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix Kxx = ntk_block(net, theta, x, x);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(Kxx).eigenvalues().minCoeff(), -1e-10);
}

TEST(GramTest, SingleEntryIsSquaredGradientNorm) {
  const Mlp net(make_spec(2, 1, {5}));
  const ParamVector theta = random_vector(net.num_params(), 1);
  const Matrix X = random_matrix(1, 2, 2);
  const NtkGram g = gram(net, theta, X);
  ASSERT_EQ(g.size(), 1);
  EXPECT_NEAR(g.K()(0, 0), net.jacobian(theta, X.row(0).transpose()).squaredNorm(), 1e-12);
  EXPECT_EQ(g.jitter(), 0.0);
}

TEST(GramTest, ExplicitAndMatrixFreePathsAgree) {
  const Mlp net(make_spec(3, 2, {12}, Activation::kTanh, Scaling::kNtk));
  const ParamVector theta = random_vector(net.num_params(), 3);
  const Matrix X = random_matrix(7, 3, 4);
  const Matrix Y = random_matrix(4, 3, 5);
  const Matrix a = cross_kernel(net, theta, X, Y, 0);
  const Matrix b = cross_kernel(net, theta, X, Y, net.num_params());  // forces the matrix-free path
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix K = gram(net, theta, X).K();
  EXPECT_LT((K - K.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(K).eigenvalues().minCoeff(), -1e-10);
}

TEST(GramTest, DuplicatedRowNeedsJitter) {
  QuietLog quiet;
  const Mlp net(make_spec(2, 1, {30}));
  const ParamVector theta = random_vector(net.num_params(), 7);
  Matrix X = random_matrix(5, 2, 8);
  X.row(3) = X.row(1);
  const NtkGram g = gram(net, theta, X);
  EXPECT_GT(g.jitter(), 0.0);
  EXPECT_FALSE(quiet.messages.empty());
}

TEST(GramTest, BudgetGuards) {
  const Mlp net(make_spec(2, 1, {5}));
  const ParamVector theta = random_vector(net.num_params(), 7);
  EXPECT_THROW(gram(net, theta, random_matrix(20, 2, 1), 0, 100), std::length_error);
  EXPECT_THROW(stacked_jacobian(net, theta, random_matrix(20, 2, 1), 10), std::length_error);
}

TEST(GramTest, FactorizationFailureAfterMaxJitter) {
  Matrix K = Matrix::Zero(3, 3);
  K(0, 0) = -1.0;
  FactorizationOptions opts;
  opts.max_retries = 2;
  EXPECT_THROW(NtkGram::factorize(K, opts), NumericalError);
}

TEST(GramTest, ConditionEstimateMatchesEigenvalues) {
  const Matrix M = random_matrix(8, 8, 3);
  const Matrix K = M * M.transpose() + 0.1 * Matrix::Identity(8, 8);
  const NtkGram g = NtkGram::factorize(K);
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(K).eigenvalues();
  EXPECT_NEAR(g.condition_estimate() / (ev.maxCoeff() / ev.minCoeff()), 1.0, 1e-3);
}

TEST(GramTest, SyntheticTaskConditionWithinReportedRange) {
  // 100 Gaussian inputs in 5 dimensions, wide NTK-scaled tanh net at init.
  const Mlp net(make_spec(5, 1, {256}, Activation::kTanh, Scaling::kNtk, false));
  const ParamVector theta = init_params(net.spec(), InitScheme::kStandardNormal, 0);
  const NtkGram g = gram(net, theta, random_matrix(100, 5, 1));
  EXPECT_GT(g.condition_estimate(), 1e2);
  EXPECT_LT(g.condition_estimate(), 1e8);
}

TEST(PosteriorTest, MatchesFiniteDifferenceOracle) {
  const SmallProblem p = small_problem();
  const Mlp net(p.spec);
  const PosteriorSummary post = gp_posterior_regression(net, p.theta, p.train, p.X_test, 1.3);
  const OraclePosterior oracle = oracle_regression(net, p.theta, p.train, p.X_test, 1.3);
  EXPECT_LT((post.mean.col(0) - oracle.mean).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((post.variance.col(0) - oracle.variance).cwiseAbs().maxCoeff(), 1e-6 * oracle.variance.maxCoeff());
}

TEST(PosteriorTest, TrainingInputsHaveNearZeroVariance) {
  const SmallProblem p = small_problem();
  const Mlp net(p.spec);
  const PosteriorSummary post = gp_posterior_regression(net, p.theta, p.train, p.train.X, 1.0);
  for (Index i = 0; i < p.train.size(); ++i) {
    const double kappa = net.jacobian(p.theta, p.train.X.row(i).transpose()).squaredNorm();
    EXPECT_LT(post.variance(i, 0), 1e-8 * kappa);
    EXPECT_NEAR(post.mean(i, 0), p.train.Y(i, 0), 1e-8);
  }
}

TEST(PosteriorTest, GammaScalingExact) {
  const SmallProblem p = small_problem();
  const Mlp net(p.spec);
  const NtkGram g = gram(net, p.theta, p.train.X);
  const PosteriorSummary a = gp_posterior_regression(net, p.theta, p.train, p.X_test, 1.0, &g);
  const PosteriorSummary b = gp_posterior_regression(net, p.theta, p.train, p.X_test, 2.0, &g);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(b.variance, (4.0 * a.variance).eval());
  const PosteriorSummary c = gp_posterior_regression(net, p.theta, p.train, p.X_test, 0.37, &g);
  EXPECT_EQ(c.variance, (a.variance * (0.37 * 0.37)).eval());
}

TEST(PosteriorTest, InterpolatingReferenceGivesNetworkMean) {
  SmallProblem p = small_problem();
  const Mlp net(p.spec);
  p.train.Y = net.forward_batch(p.theta, p.train.X);
  const PosteriorSummary post = gp_posterior_regression(net, p.theta, p.train, p.X_test, 1.0);
  EXPECT_LT((post.mean - net.forward_batch(p.theta, p.X_test)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PosteriorTest, GeneralFormReducesToRegressionForScalarOutput) {
  const SmallProblem p = small_problem();
  const Mlp net(p.spec);
  const PosteriorSummary reg = gp_posterior_regression(net, p.theta, p.train, p.X_test, 0.7);
  const PosteriorSummary gen = gp_posterior_general(net, p.theta, p.train.X, p.X_test, 0.7);
  EXPECT_LT((reg.variance - gen.variance).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(gen.mean, net.forward_batch(p.theta, p.X_test));
}

TEST(PosteriorTest, GeneralBlocksSymmetricPsd) {
  const Mlp net(make_spec(2, 3, {25}, Activation::kTanh, Scaling::kNtk));
  const ParamVector theta = random_vector(net.num_params(), 1);
  const Matrix X = random_matrix(6, 2, 2);
  const Matrix Xs = random_matrix(4, 2, 3);
  const PosteriorSummary post = gp_posterior_general(net, theta, X, Xs, 1.0);
  ASSERT_EQ(post.covariance.size(), 4u);
  for (const Matrix& block : post.covariance) {
    EXPECT_LT((block - block.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(block).eigenvalues().minCoeff(), -1e-12);
  }
  // Cross-check against the dense Schur complement.
  const Matrix JX = net.jacobian_batch(theta, X);
  const Matrix Js = net.jacobian_batch(theta, Xs);
  const Matrix K = JX * JX.transpose();
  const Matrix full = Js * Js.transpose() - Js * JX.transpose() * K.llt().solve(JX * Js.transpose());
  for (Index i = 0; i < 4; ++i)
    EXPECT_LT((post.covariance[static_cast<std::size_t>(i)] - full.block(3 * i, 3 * i, 3, 3)).norm(),
              1e-8 * full.norm());
}

TEST(PosteriorTest, BadPrecomputedGramRejected) {
  const SmallProblem p = small_problem();
  const Mlp net(p.spec);
  const NtkGram g = gram(net, p.theta, p.X_test);
  EXPECT_THROW(gp_posterior_regression(net, p.theta, p.train, p.X_test, 1.0, &g), std::invalid_argument);
}

TEST(SevTest, Examples) {
  Vector a(2), b(2);
  a << 3, 4;
  b << 0, 0;
  EXPECT_DOUBLE_EQ(sev(a, b), 5.0);
  EXPECT_EQ(sev(a, a), 0.0);
  EXPECT_THROW(sev(a, Vector::Zero(3)), std::invalid_argument);
}

TEST(NullspaceResidualTest, Examples) {
  const Mlp net(make_spec(3, 1, {10}));
  const ParamVector theta = random_vector(net.num_params(), 1);
  const Matrix X = random_matrix(6, 3, 2);
  const ParamVector z0 = random_vector(net.num_params(), 3);
  EXPECT_EQ(nullspace_residual(net, theta, X, z0, z0), 0.0);
  const Matrix J = net.jacobian_batch(theta, X);
  const ParamVector in_range = z0 + J.transpose() * random_vector(6, 4);
  EXPECT_LT(nullspace_residual(net, theta, X, in_range, z0), 1e-8);
  const ParamVector arbitrary = z0 + random_vector(net.num_params(), 5);
  EXPECT_GT(nullspace_residual(net, theta, X, arbitrary, z0), 0.1);
  EXPECT_EQ(stacked_jacobian_rank(net, theta, X, 0), 6);
}

}  // namespace
}  // namespace nuqls
