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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "nuqls/random.hpp"

namespace nuqls {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

Matrix ColumnScaler::transform(const Matrix& values) const {
  if (empty()) return values;
  Matrix out = values;
  for (Index j = 0; j < out.cols(); ++j) {
    if (constant[j]) continue;
    out.col(j) = (out.col(j).array() - mean[j]) / std[j];
  }
  return out;
}

Matrix ColumnScaler::inverse(const Matrix& values) const {
  if (empty()) return values;
  Matrix out = values;
  for (Index j = 0; j < out.cols(); ++j) {
    if (constant[j]) continue;
    out.col(j) = out.col(j).array() * std[j] + mean[j];
  }
  return out;
}

void Dataset::validate() const {
  if (X.rows() < 1) throw std::invalid_argument("dataset is empty");
  if (is_classification()) {
    if (static_cast<Index>(labels.size()) != X.rows())
      throw std::invalid_argument("label count does not match number of inputs");
    for (int label : labels)
      if (label < 0 || label >= num_classes)
        throw std::invalid_argument("class label " + std::to_string(label) + " outside [0, " +
                                    std::to_string(num_classes) + ")");
  } else if (Y.rows() != X.rows()) {
    throw std::invalid_argument("target rows do not match number of inputs");
  }
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  Dataset out;
  out.num_classes = num_classes;
  out.normalization = normalization;
  out.split = split;
  out.X.resize(static_cast<Index>(rows.size()), X.cols());
  if (!is_classification()) out.Y.resize(static_cast<Index>(rows.size()), Y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Index>(i)) = X.row(rows[i]);
    if (is_classification()) {
      out.labels.push_back(labels[static_cast<std::size_t>(rows[i])]);
    } else {
      out.Y.row(static_cast<Index>(i)) = Y.row(rows[i]);
    }
  }
  return out;
}

Dataset gen_cubic_toy(Index n, std::uint64_t seed, bool noiseless, double noise_std) {
  if (n < 2) throw std::invalid_argument("cubic toy needs at least 2 points");
  Rng rng = make_rng(seed, Stream::kData);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, noise_std);
  const Index first = (n + 1) / 2;
  Dataset data;
  data.X.resize(n, 1);
  data.Y.resize(n, 1);
  for (Index i = 0; i < n; ++i) {
    const double u = unit(rng);
    const double x = i < first ? -4.0 + 2.0 * u : 2.0 + 2.0 * u;
    const double eps = noise(rng);
    data.X(i, 0) = x;
    data.Y(i, 0) = x * x * x + (noiseless ? 0.0 : eps);
  }
  return data;
}

GaussianTask gen_gaussian_synthetic(Index n, Index d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("gaussian synthetic task needs n, d >= 1");
  GaussianTask task;
  Rng train_rng = make_rng(seed, Stream::kData, 0);
  Rng test_rng = make_rng(seed, Stream::kData, 1);
  task.train.X = standard_normal(train_rng, n, d);
  task.train.Y = standard_normal(train_rng, n, 1);
  task.train.split = "train";
  task.test.X = standard_normal(test_rng, n, d);
  task.test.Y = standard_normal(test_rng, n, 1);
  task.test.split = "test";
  return task;
}

BlobsTask gen_blobs_classification(const BlobsSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2) throw std::invalid_argument("blobs need at least 2 classes");
  if (spec.dim < 1 || spec.n < spec.classes) throw std::invalid_argument("blobs need dim >= 1 and n >= classes");
  BlobsTask task;
  const Index d = spec.dim;
  task.class_means = Matrix::Zero(spec.classes, d);
  for (int k = 0; k < spec.classes; ++k) {
    if (d >= 2) {
      const double angle = 2.0 * std::numbers::pi * k / spec.classes;
      task.class_means(k, 0) = spec.separation * std::cos(angle);
      task.class_means(k, 1) = spec.separation * std::sin(angle);
    } else {
      task.class_means(k, 0) = spec.separation * (k - 0.5 * (spec.classes - 1));
    }
  }
  Rng rng = make_rng(seed, Stream::kData, 0);
  Dataset& data = task.data;
  data.num_classes = spec.classes;
  data.X.resize(spec.n, d);
  for (Index i = 0; i < spec.n; ++i) {
    const int k = static_cast<int>(i % spec.classes);
    data.X.row(i) = task.class_means.row(k) + spec.cluster_std * standard_normal(rng, d).transpose();
    data.labels.push_back(k);
  }
  const double distance = spec.ood_distance > 0.0 ? spec.ood_distance : 4.0 * spec.separation + 6.0 * spec.cluster_std;
  task.ood_center = Vector::Zero(d);
  if (d >= 2) {
    const double angle = std::numbers::pi / spec.classes;
    task.ood_center[0] = distance * std::cos(angle);
    task.ood_center[1] = distance * std::sin(angle);
  } else {
    task.ood_center[0] = distance;
  }
  task.ood = gen_ood_cluster(task.ood_center, spec.n_ood, spec.cluster_std, derive_seed(seed, Stream::kData, 1));
  return task;
}

Matrix gen_ood_cluster(const Vector& center, Index n, double cluster_std, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::kData, 2);
  Matrix out(n, center.size());
  for (Index i = 0; i < n; ++i) out.row(i) = center.transpose() + cluster_std * standard_normal(rng, center.size()).transpose();
  return out;
}

Dataset load_csv(const std::string& path, const std::vector<int>& target_columns, bool header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool skipped_header = !header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    const auto fields = split_fields(line);
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw IoError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) + " fields, found " +
                    std::to_string(fields.size()));
    std::vector<double> row(width);
    for (std::size_t j = 0; j < width; ++j) {
      const std::string_view f = fields[j];
      const char* last = f.data() + f.size();
      auto [ptr, ec] = std::from_chars(f.data(), last, row[j]);
      if (f.empty() || ec != std::errc() || ptr != last || !std::isfinite(row[j]))
        throw IoError(path + ":" + std::to_string(line_no) + ": column " + std::to_string(j + 1) +
                      " is not a finite number: '" + std::string(f) + "'");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("CSV file '" + path + "' has no data rows");
  if (target_columns.empty()) throw std::invalid_argument("load_csv needs at least one target column");

  const int cols = static_cast<int>(width);
  std::vector<bool> is_target(width, false);
  std::vector<int> targets;
  for (int t : target_columns) {
    const int col = t < 0 ? cols + t : t;
    if (col < 0 || col >= cols || is_target[col])
      throw std::invalid_argument("invalid target column " + std::to_string(t) + " for " + std::to_string(cols) +
                                  "-column CSV");
    is_target[col] = true;
    targets.push_back(col);
  }
  const Index n = static_cast<Index>(rows.size());
  const Index t = static_cast<Index>(targets.size());
  const Index d = cols - t;
  if (d < 1) throw std::invalid_argument("CSV has no input columns left after selecting targets");
  Dataset data;
  data.X.resize(n, d);
  data.Y.resize(n, t);
  for (Index i = 0; i < n; ++i) {
    Index k = 0;
    for (int j = 0; j < cols; ++j)
      if (!is_target[j]) data.X(i, k++) = rows[i][j];
    for (Index j = 0; j < t; ++j) data.Y(i, j) = rows[i][targets[j]];
  }
  return data;
}

void save_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write CSV file '" + path + "'");
  out.precision(17);
  for (Index j = 0; j < data.X.cols(); ++j) out << (j ? "," : "") << "x" << j;
  if (data.is_classification()) {
    out << ",label\n";
  } else {
    for (Index j = 0; j < data.Y.cols(); ++j) out << ",y" << j;
    out << "\n";
  }
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < data.X.cols(); ++j) out << (j ? "," : "") << data.X(i, j);
    if (data.is_classification()) {
      out << "," << data.labels[static_cast<std::size_t>(i)];
    } else {
      for (Index j = 0; j < data.Y.cols(); ++j) out << "," << data.Y(i, j);
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing CSV file '" + path + "'");
}

DataSplits split(const Dataset& data, double train_fraction, double val_fraction, double test_fraction,
                 std::uint64_t seed) {
  if (train_fraction < 0 || val_fraction < 0 || test_fraction < 0 ||
      std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must be nonnegative and sum to 1");
  const Index n = data.size();
  const Index n_val = static_cast<Index>(std::floor(n * val_fraction + 1e-9));
  const Index n_test = static_cast<Index>(std::floor(n * test_fraction + 1e-9));
  const Index n_train = n - n_val - n_test;
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw std::invalid_argument("split of " + std::to_string(n) + " rows leaves an empty part");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng = make_rng(seed, Stream::kSplit);
  std::shuffle(order.begin(), order.end(), rng);
  std::span<const Index> all(order);
  DataSplits out;
  out.train = data.subset(all.subspan(0, static_cast<std::size_t>(n_train)));
  out.val = data.subset(all.subspan(static_cast<std::size_t>(n_train), static_cast<std::size_t>(n_val)));
  out.test = data.subset(all.subspan(static_cast<std::size_t>(n_train + n_val)));
  out.train.split = "train";
  out.val.split = "val";
  out.test.split = "test";
  return out;
}

namespace {

ColumnScaler fit_scaler(const Matrix& values) {
  ColumnScaler s;
  const Index n = values.rows();
  s.mean = values.colwise().mean().transpose();
  s.std = Vector::Zero(values.cols());
  s.constant.assign(static_cast<std::size_t>(values.cols()), false);
  for (Index j = 0; j < values.cols(); ++j) {
    const double var = n > 1 ? (values.col(j).array() - s.mean[j]).square().sum() / (n - 1) : 0.0;
    s.std[j] = std::sqrt(var);
    if (!(s.std[j] > 1e-12 * std::max(1.0, std::abs(s.mean[j])))) {
      s.constant[j] = true;
      s.std[j] = 1.0;
      s.mean[j] = 0.0;
    }
  }
  return s;
}

}  // namespace

Normalization fit_normalization(const Dataset& train) {
  train.validate();
  Normalization norm;
  norm.inputs = fit_scaler(train.X);
  if (!train.is_classification()) norm.targets = fit_scaler(train.Y);
  return norm;
}

Dataset apply_normalization(const Dataset& data, const Normalization& norm) {
  Dataset out = data;
  out.X = norm.inputs.transform(data.X);
  if (!data.is_classification()) out.Y = norm.targets.transform(data.Y);
  out.normalization = norm;
  return out;
}

DataSplits normalize(const DataSplits& splits) {
  const Normalization norm = fit_normalization(splits.train);
  return {apply_normalization(splits.train, norm), apply_normalization(splits.val, norm),
          apply_normalization(splits.test, norm)};
}

Matrix denormalize_targets(const Matrix& values, const Normalization& norm) { return norm.targets.inverse(values); }

Matrix denormalize_variance(const Matrix& variance, const Normalization& norm) {
  if (norm.targets.empty()) return variance;
  Matrix out = variance;
  for (Index j = 0; j < out.cols(); ++j)
    if (!norm.targets.constant[j]) out.col(j) *= norm.targets.std[j] * norm.targets.std[j];
  return out;
}

}  // namespace nuqls
