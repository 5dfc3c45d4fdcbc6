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

#include "nuqls/tuning.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "nuqls/log.hpp"
#include "test_util.hpp"

namespace nuqls {
namespace {

using testing::make_spec;
using testing::random_matrix;

TEST(TernarySearchTest, Quadratic) {
  TernaryConfig cfg;
  cfg.left = 0.0;
  cfg.right = 10.0;
  cfg.tolerance = 1e-6;
  TernaryStats stats;
  const double x = ternary_search([](double v) { return (v - 2.0) * (v - 2.0); }, cfg, &stats);
  EXPECT_NEAR(x, 2.0, 1e-6);
  EXPECT_LE(stats.evaluations, 2 * cfg.max_iters);
}

TEST(TernarySearchTest, AbsoluteValueAtPi) {
  TernaryConfig cfg;
  cfg.left = 0.0;
  cfg.right = 10.0;
  cfg.tolerance = 1e-8;
  EXPECT_NEAR(ternary_search([](double v) { return std::abs(v - std::numbers::pi); }, cfg), std::numbers::pi, 1e-8);
}

TEST(TernarySearchTest, ConstantStaysInsideInterval) {
  TernaryConfig cfg;
  cfg.left = -1.0;
  cfg.right = 3.0;
  const double x = ternary_search([](double) { return 7.0; }, cfg);
  EXPECT_GE(x, -1.0);
  EXPECT_LE(x, 3.0);
}

TEST(TernarySearchTest, IterationCap) {
  TernaryConfig cfg;
  cfg.left = 0.0;
  cfg.right = 1.0;
  cfg.tolerance = 1e-300;
  cfg.max_iters = 5;
  TernaryStats stats;
  ternary_search([](double v) { return v * v; }, cfg, &stats);
  EXPECT_EQ(stats.iterations, 5);
  EXPECT_EQ(stats.evaluations, 10);
}

TEST(TernarySearchTest, NonFiniteAborts) {
  TernaryConfig cfg;
  cfg.left = 0.0;
  cfg.right = 1.0;
  try {
    ternary_search([](double v) { return v > 0.5 ? std::numeric_limits<double>::quiet_NaN() : v; }, cfg);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("x = "), std::string::npos);
  }
  cfg.right = 0.0;
  EXPECT_THROW(ternary_search([](double v) { return v; }, cfg), ConfigError);
}

// Validation targets drawn as N(mean, sigma_base^2 k^2).
struct Calibration {
  PosteriorSummary base;
  Matrix targets;
};

Calibration planted(double k, double gamma_base, Index m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Calibration c;
  c.base.mean.resize(m, 1);
  c.base.variance.resize(m, 1);
  c.targets.resize(m, 1);
  for (Index i = 0; i < m; ++i) {
    c.base.mean(i, 0) = n01(rng);
    const double sigma = gamma_base * std::exp(0.5 * n01(rng));
    c.base.variance(i, 0) = sigma * sigma;
    c.targets(i, 0) = c.base.mean(i, 0) + k * sigma * n01(rng);
  }
  return c;
}

TEST(TuneGammaTest, RecoversPlantedScale) {
  const double gamma_base = 0.01;
  for (double k : {3.7, 25.0, 80.0}) {
    const Calibration c = planted(k, gamma_base, 5000, 7);
    const GammaTuning t = tune_gamma(c.base, c.targets, gamma_base);
    EXPECT_FALSE(t.degenerate);
    EXPECT_NEAR(t.gamma / gamma_base / k, 1.0, 0.05) << "k = " << k;
  }
}

TEST(TuneGammaTest, DoublingDeviationsHalvesGamma) {
  const double gamma_base = 0.01;
  Calibration c = planted(40.0, gamma_base, 4000, 3);
  const double g1 = tune_gamma(c.base, c.targets, gamma_base).gamma;
  c.base.variance *= 4.0;
  const double g2 = tune_gamma(c.base, c.targets, gamma_base).gamma;
  EXPECT_NEAR(g2 / g1, 0.5, 1e-3);
}

TEST(TuneGammaTest, DegenerateVarianceReturnsMidpoint) {
  std::vector<std::string> messages;
  const LogSink old = set_log_sink([&](LogLevel, const std::string& m) { messages.push_back(m); });
  PosteriorSummary base;
  base.mean = Matrix::Zero(10, 1);
  base.variance = Matrix::Zero(10, 1);
  const TernaryConfig cfg;
  const GammaTuning t = tune_gamma(base, random_matrix(10, 1, 1), 0.1, cfg);
  set_log_sink(old);
  EXPECT_TRUE(t.degenerate);
  EXPECT_DOUBLE_EQ(t.gamma, 0.5 * (cfg.left + cfg.right));
  EXPECT_EQ(messages.size(), 1u);
}

TEST(TuneGammaTest, RepeatableAndNonMutating) {
  const Calibration c = planted(10.0, 0.01, 500, 11);
  const PosteriorSummary copy = c.base;
  const GammaTuning a = tune_gamma(c.base, c.targets, 0.01);
  const GammaTuning b = tune_gamma(c.base, c.targets, 0.01);
  EXPECT_EQ(a.gamma, b.gamma);
  EXPECT_EQ(a.ece, b.ece);
  EXPECT_EQ(c.base.variance, copy.variance);
  EXPECT_EQ(c.base.mean, copy.mean);
}

TEST(TuneGammaTest, EnsembleOverloadAndPostHocEquivalence) {
  const MlpSpec spec = make_spec(2, 1, {16}, Activation::kTanh, Scaling::kNtk);
  const LinearizedModel model(spec, init_params(spec, InitScheme::kStandardNormal, 1));
  Dataset train;
  train.X = random_matrix(6, 2, 2);
  train.Y = model.net().forward_batch(model.reference(), train.X);
  Dataset val;
  val.X = random_matrix(30, 2, 3);
  val.Y = model.net().forward_batch(model.reference(), val.X) + 0.3 * random_matrix(30, 1, 4);
  NuqlsConfig cfg;
  cfg.S = 20;
  cfg.gamma = 0.01;
  cfg.opt.kind = OptimizerKind::kGd;
  cfg.opt.learning_rate = 0.05;
  cfg.opt.momentum = 0.9;
  cfg.opt.epochs = 200;
  const NuqlsEnsemble ens = nuqls_sample(model, train, cfg);
  const GammaTuning t = tune_gamma(model, ens, val);
  EXPECT_GT(t.gamma, cfg.gamma);
  const EnsemblePredictions preds = ensemble_predict(model, ens, val.X);
  const PosteriorSummary base = ensemble_stats(preds, cfg.gamma, StatsMode::kRegression, cfg.gamma);
  const PosteriorSummary tuned = ensemble_stats(preds, t.gamma, StatsMode::kRegression, cfg.gamma);
  const double ratio = t.gamma / cfg.gamma;
  EXPECT_EQ(tuned.variance, ((ratio * ratio) * base.variance).eval());
  EXPECT_NEAR(ece_regression(tuned.mean, tuned.variance, val.Y), t.ece, 1e-15);
}

}  // namespace
}  // namespace nuqls
