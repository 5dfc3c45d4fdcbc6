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

#include "nuqls/data.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "test_util.hpp"

namespace nuqls {
namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  const auto dir = std::filesystem::temp_directory_path() / "nuqls_test_data";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << contents;
  return path;
}

TEST(CubicToyTest, HalfThePointsPerInterval) {
  const Dataset d = gen_cubic_toy(20, 1);
  ASSERT_EQ(d.size(), 20);
  int left = 0;
  int right = 0;
  for (Index i = 0; i < d.size(); ++i) {
    const double x = d.X(i, 0);
    EXPECT_GE(std::abs(x), 2.0);
    EXPECT_LE(std::abs(x), 4.0);
    (x < 0 ? left : right)++;
  }
  EXPECT_EQ(left, 10);
  EXPECT_EQ(right, 10);
}

TEST(CubicToyTest, OddCountPutsExtraInFirstInterval) {
  const Dataset d = gen_cubic_toy(7, 3);
  EXPECT_EQ((d.X.array() < 0).count(), 4);
}

TEST(CubicToyTest, DeterministicAndNoiselessFlag) {
  const Dataset a = gen_cubic_toy(20, 5);
  const Dataset b = gen_cubic_toy(20, 5);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.Y, b.Y);
  const Dataset clean = gen_cubic_toy(20, 5, true);
  EXPECT_EQ(clean.Y, clean.X.array().cube().matrix());
  // Noise std 3 around the cubic.
  const Dataset big = gen_cubic_toy(20000, 9);
  const Vector r = big.Y.col(0) - big.X.col(0).array().cube().matrix();
  EXPECT_NEAR(std::sqrt(r.squaredNorm() / r.size()), 3.0, 0.1);
}

TEST(GaussianSyntheticTest, DefaultShapeAndMeanBound) {
  const GaussianTask t = gen_gaussian_synthetic(100, 5, 4);
  EXPECT_EQ(t.train.X.rows(), 100);
  EXPECT_EQ(t.train.X.cols(), 5);
  EXPECT_EQ(t.train.Y.cols(), 1);
  EXPECT_EQ(t.test.X.rows(), 100);
  EXPECT_LT(std::abs(t.train.X.mean()), 3.0 / std::sqrt(500.0));
  EXPECT_NE(t.train.X, t.test.X);
  EXPECT_NE(gen_gaussian_synthetic(100, 5, 5).train.X, t.train.X);
}

TEST(BlobsTest, BalancedAndOodFarAway) {
  BlobsSpec spec;
  spec.n = 300;
  spec.classes = 3;
  const BlobsTask task = gen_blobs_classification(spec, 2);
  EXPECT_EQ(task.data.size(), 300);
  std::vector<int> counts(3, 0);
  for (int y : task.data.labels) counts[static_cast<std::size_t>(y)]++;
  EXPECT_EQ(counts, std::vector<int>({100, 100, 100}));
  EXPECT_EQ(task.ood.rows(), spec.n_ood);
  // Every OOD point is farther from every class mean than any ID point is from its nearest mean.
  double max_id = 0.0;
  for (Index i = 0; i < task.data.size(); ++i) {
    double nearest = 1e300;
    for (int k = 0; k < 3; ++k) nearest = std::min(nearest, (task.data.X.row(i) - task.class_means.row(k)).norm());
    max_id = std::max(max_id, nearest);
  }
  for (Index i = 0; i < task.ood.rows(); ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_GT((task.ood.row(i) - task.class_means.row(k)).norm(), max_id);
  }
}

TEST(BlobsTest, SeparableLimitIsLinearlyClassifiable) {
  BlobsSpec spec;
  spec.classes = 2;
  spec.separation = 100.0;
  const BlobsTask task = gen_blobs_classification(spec, 7);
  // Nearest-mean is a linear classifier for two classes.
  const Vector w = (task.class_means.row(1) - task.class_means.row(0)).transpose();
  const double b = -0.5 * (task.class_means.row(1).squaredNorm() - task.class_means.row(0).squaredNorm());
  int correct = 0;
  for (Index i = 0; i < task.data.size(); ++i) {
    const int pred = task.data.X.row(i).dot(w) + b > 0 ? 1 : 0;
    correct += pred == task.data.labels[static_cast<std::size_t>(i)];
  }
  EXPECT_EQ(correct, task.data.size());
}

TEST(CsvTest, LoadsHandWrittenFile) {
  const auto path = temp_file("three.csv", "1.5,2\n-3,4e-1\n5,6\n");
  const Dataset d = load_csv(path.string(), {-1}, false);
  EXPECT_EQ(d.size(), 3);
  EXPECT_EQ(d.input_dim(), 1);
  EXPECT_EQ(d.target_dim(), 1);
  EXPECT_DOUBLE_EQ(d.X(1, 0), -3.0);
  EXPECT_DOUBLE_EQ(d.Y(1, 0), 0.4);
}

TEST(CsvTest, HeaderWithOneRow) {
  const auto path = temp_file("header.csv", "a,b,c\n1,2,3\n");
  const Dataset d = load_csv(path.string(), {0}, true);
  EXPECT_EQ(d.size(), 1);
  EXPECT_EQ(d.input_dim(), 2);
  EXPECT_DOUBLE_EQ(d.Y(0, 0), 1.0);
}

TEST(CsvTest, Errors) {
  EXPECT_THROW(load_csv(temp_file("empty.csv", "").string(), {-1}, false), IoError);
  EXPECT_THROW(load_csv(temp_file("ragged.csv", "1,2\n3\n").string(), {-1}, false), IoError);
  try {
    load_csv(temp_file("text.csv", "1,2\n3,x\n").string(), {-1}, false);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("text.csv:2:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_csv("/nonexistent/nope.csv", {-1}, false), IoError);
}

TEST(CsvTest, SaveRoundTrip) {
  const Dataset d = gen_cubic_toy(9, 1);
  const auto path = std::filesystem::temp_directory_path() / "nuqls_test_data" / "toy.csv";
  std::filesystem::create_directories(path.parent_path());
  save_csv(path.string(), d);
  const Dataset back = load_csv(path.string(), {-1}, true);
  EXPECT_EQ(back.X, d.X);
  EXPECT_EQ(back.Y, d.Y);
}

TEST(SplitTest, SizesDisjointAndCovering) {
  Dataset d;
  d.X = testing::random_matrix(100, 2, 1);
  d.Y = Matrix(100, 1);
  for (Index i = 0; i < 100; ++i) d.Y(i, 0) = static_cast<double>(i);
  const DataSplits s = split(d, 0.7, 0.15, 0.15, 3);
  EXPECT_EQ(s.train.size(), 70);
  EXPECT_EQ(s.val.size(), 15);
  EXPECT_EQ(s.test.size(), 15);
  std::set<double> seen;
  for (const Dataset* part : {&s.train, &s.val, &s.test})
    for (Index i = 0; i < part->size(); ++i) seen.insert(part->Y(i, 0));
  EXPECT_EQ(seen.size(), 100u);
}

TEST(SplitTest, RemainderGoesToTrainAndTinyFails) {
  Dataset d;
  d.X = testing::random_matrix(11, 1, 1);
  d.Y = testing::random_matrix(11, 1, 2);
  const DataSplits s = split(d, 0.7, 0.15, 0.15, 0);
  EXPECT_EQ(s.val.size(), 1);
  EXPECT_EQ(s.test.size(), 1);
  EXPECT_EQ(s.train.size(), 9);
  Dataset tiny;
  tiny.X = testing::random_matrix(3, 1, 1);
  tiny.Y = testing::random_matrix(3, 1, 2);
  EXPECT_THROW(split(tiny, 0.7, 0.15, 0.15, 0), std::invalid_argument);
  EXPECT_THROW(split(d, 0.7, 0.2, 0.2, 0), std::invalid_argument);
}

TEST(NormalizeTest, InvertsAndFlagsConstantColumns) {
  Dataset d;
  d.X = testing::random_matrix(50, 3, 4, 5.0);
  d.X.col(1).setConstant(7.0);
  d.Y = testing::random_matrix(50, 1, 5, 10.0).array() + 3.0;
  const Normalization norm = fit_normalization(d);
  EXPECT_TRUE(norm.inputs.constant[1]);
  EXPECT_FALSE(norm.inputs.constant[0]);
  const Dataset n = apply_normalization(d, norm);
  EXPECT_NEAR(n.X.col(0).mean(), 0.0, 1e-12);
  EXPECT_EQ(n.X.col(1), d.X.col(1));
  EXPECT_LT((norm.inputs.inverse(n.X) - d.X).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((denormalize_targets(n.Y, norm) - d.Y).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix ones = Matrix::Ones(2, 1);
  EXPECT_NEAR(denormalize_variance(ones, norm)(0, 0), norm.targets.std(0) * norm.targets.std(0), 1e-12);
}

TEST(NormalizeTest, StatisticsAreTrainOnly) {
  Dataset d;
  d.X = testing::random_matrix(60, 2, 8);
  d.Y = testing::random_matrix(60, 1, 9);
  DataSplits s = split(d, 0.7, 0.15, 0.15, 1);
  const DataSplits a = normalize(s);
  // Replacing val/test leaves the transform unchanged.
  s.val.X = s.val.X.reverse().eval();
  s.test.X *= 100.0;
  const DataSplits b = normalize(s);
  EXPECT_EQ(a.train.normalization.inputs.mean, b.train.normalization.inputs.mean);
  EXPECT_EQ(a.train.normalization.inputs.std, b.train.normalization.inputs.std);
  EXPECT_EQ(a.train.X, b.train.X);
}

}  // namespace
}  // namespace nuqls
