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

#ifndef NUQLS_DATA_HPP_
#define NUQLS_DATA_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nuqls/types.hpp"

namespace nuqls {

// Per-column affine scaling x -> (x - mean) / std. Columns whose training
// std is zero are flagged constant and passed through untouched.
struct ColumnScaler {
  Vector mean;
  Vector std;
  std::vector<bool> constant;

  bool empty() const { return mean.size() == 0; }
  Matrix transform(const Matrix& values) const;
  Matrix inverse(const Matrix& values) const;
};

struct Normalization {
  ColumnScaler inputs;
  ColumnScaler targets;  // empty for classification data

  bool applied() const { return !inputs.empty(); }
};

// Regression datasets carry targets in Y (n x t). Classification datasets
// carry integer labels in [0, num_classes) and an empty Y.
struct Dataset {
  Matrix X;
  Matrix Y;
  std::vector<int> labels;
  int num_classes = 0;
  Normalization normalization;
  std::string split = "all";

  Index size() const { return X.rows(); }
  Index input_dim() const { return X.cols(); }
  Index target_dim() const { return is_classification() ? 1 : Y.cols(); }
  bool is_classification() const { return num_classes > 0; }

  // Throws std::invalid_argument on inconsistent shapes or empty data.
  void validate() const;
  Dataset subset(std::span<const Index> rows) const;
};

// Toy cubic regression: x uniform on [-4,-2] U [2,4] (half the points per
// interval, the extra odd point in the first), y = x^3 + N(0, noise_std^2).
Dataset gen_cubic_toy(Index n, std::uint64_t seed, bool noiseless = false, double noise_std = 3.0);

struct GaussianTask {
  Dataset train;
  Dataset test;
};

// Standard-normal inputs (n x d) and scalar standard-normal targets; train and
// test are drawn independently.
GaussianTask gen_gaussian_synthetic(Index n, Index d, std::uint64_t seed);

struct BlobsSpec {
  Index n = 300;  // in-distribution points, split evenly across classes
  int classes = 3;
  Index dim = 2;
  double separation = 3.0;  // distance of each class mean from the origin
  double cluster_std = 1.0;
  Index n_ood = 100;
  double ood_distance = 0.0;  // 0 selects 4 * separation + 6 * cluster_std
};

struct BlobsTask {
  Dataset data;
  Matrix ood;
  Matrix class_means;  // classes x dim
  Vector ood_center;
};

// Isotropic Gaussian clusters plus a far-away out-of-distribution cluster.
BlobsTask gen_blobs_classification(const BlobsSpec& spec, std::uint64_t seed);

// Draws n_ood more OOD points around the given center.
Matrix gen_ood_cluster(const Vector& center, Index n, double cluster_std, std::uint64_t seed);

// Plain numeric CSV (comma delimiter, '.' decimal point, no quoting).
// Negative target column indices count from the end (-1 = last column).
Dataset load_csv(const std::string& path, const std::vector<int>& target_columns, bool header);
void save_csv(const std::string& path, const Dataset& data);

struct DataSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Random disjoint split. Sizes are floor(n * fraction) for val and test; the
// remainder goes to train. Throws if any part would be empty.
DataSplits split(const Dataset& data, double train_fraction, double val_fraction, double test_fraction,
                 std::uint64_t seed);

// Statistics come from train only. Regression targets are always scaled.
Normalization fit_normalization(const Dataset& train);
Dataset apply_normalization(const Dataset& data, const Normalization& norm);
DataSplits normalize(const DataSplits& splits);

// Undo target scaling on means (m x t) and variances (m x t).
Matrix denormalize_targets(const Matrix& values, const Normalization& norm);
Matrix denormalize_variance(const Matrix& variance, const Normalization& norm);

}  // namespace nuqls

#endif  // NUQLS_DATA_HPP_
