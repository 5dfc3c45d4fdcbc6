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

#include "nuqls/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

namespace nuqls {
namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
    throw std::invalid_argument(os.str());
  }
}

void check_variance(const Matrix& variance, const char* what) {
  if (!(variance.array() >= 0.0).all()) {
    throw std::invalid_argument(std::string(what) + ": variance must be nonnegative and finite");
  }
}

double central_quantile(double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("coverage level must lie in (0, 1)");
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 0.5 * (1.0 + level));
}

}  // namespace

double rmse(const Matrix& pred, const Matrix& target) {
  check_same_shape(pred, target, "rmse");
  if (pred.size() == 0) throw std::invalid_argument("rmse: empty input");
  return std::sqrt((pred - target).squaredNorm() / static_cast<double>(pred.size()));
}

double gaussian_nll_metric(const Matrix& mean, const Matrix& variance, const Matrix& target) {
  check_same_shape(mean, target, "gaussian_nll_metric");
  check_same_shape(variance, target, "gaussian_nll_metric");
  if (mean.size() == 0) throw std::invalid_argument("gaussian_nll_metric: empty input");
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (Index j = 0; j < mean.cols(); ++j) {
    for (Index i = 0; i < mean.rows(); ++i) {
      const double s2 = std::max(variance(i, j), kVarianceFloor);
      const double r = target(i, j) - mean(i, j);
      total += 0.5 * (r * r / s2 + std::log(s2) + log2pi);
    }
  }
  return total / static_cast<double>(mean.size());
}

std::vector<double> default_ece_levels() {
  std::vector<double> levels;
  for (int k = 1; k <= 19; ++k) levels.push_back(0.05 * k);
  return levels;
}

double ece_regression(const Matrix& mean, const Matrix& variance, const Matrix& target,
                      const std::vector<double>& levels) {
  check_same_shape(mean, target, "ece_regression");
  check_same_shape(variance, target, "ece_regression");
  check_variance(variance, "ece_regression");
  if (levels.empty()) throw std::invalid_argument("ece_regression: empty level list");
  if (mean.size() == 0) throw std::invalid_argument("ece_regression: empty input");
  const auto n = static_cast<double>(mean.size());
  // |y - mu| / sigma per entry; inside the interval iff that ratio <= z.
  std::vector<double> ratio(static_cast<std::size_t>(mean.size()));
  std::size_t k = 0;
  for (Index j = 0; j < mean.cols(); ++j) {
    for (Index i = 0; i < mean.rows(); ++i) {
      const double r = std::abs(target(i, j) - mean(i, j));
      const double s = std::sqrt(variance(i, j));
      ratio[k++] = r == 0.0 ? 0.0 : (s == 0.0 ? std::numeric_limits<double>::infinity() : r / s);
    }
  }
  std::sort(ratio.begin(), ratio.end());
  double total = 0.0;
  for (double level : levels) {
    const double z = central_quantile(level);
    const auto inside = std::upper_bound(ratio.begin(), ratio.end(), z) - ratio.begin();
    total += std::abs(static_cast<double>(inside) / n - level);
  }
  return total / static_cast<double>(levels.size());
}

double ece_classification(const Matrix& probs, std::span<const int> labels, int bins) {
  if (bins <= 0) throw std::invalid_argument("ece_classification: bins must be positive");
  if (probs.rows() != static_cast<Index>(labels.size())) {
    throw std::invalid_argument("ece_classification: one label per probability row required");
  }
  if (probs.rows() == 0) throw std::invalid_argument("ece_classification: empty input");
  std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> correct(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> count(static_cast<std::size_t>(bins), 0.0);
  for (Index i = 0; i < probs.rows(); ++i) {
    const Vector row = probs.row(i).transpose();
    if (!row.allFinite() || row.minCoeff() < -1e-12 || std::abs(row.sum() - 1.0) > 1e-6) {
      throw std::invalid_argument("ece_classification: row " + std::to_string(i) + " is not a probability vector");
    }
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= probs.cols()) throw std::invalid_argument("ece_classification: label out of range");
    const Index pred = argmax_lowest(row);
    const double conf = row(pred);
    const int b = std::clamp(static_cast<int>(std::floor(conf * bins)), 0, bins - 1);
    conf_sum[static_cast<std::size_t>(b)] += conf;
    correct[static_cast<std::size_t>(b)] += pred == label ? 1.0 : 0.0;
    count[static_cast<std::size_t>(b)] += 1.0;
  }
  double ece = 0.0;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (count[b] > 0) ece += std::abs(correct[b] - conf_sum[b]);
  }
  return ece / static_cast<double>(probs.rows());
}

Index argmax_lowest(const Vector& v) {
  if (v.size() == 0) throw std::invalid_argument("argmax of an empty vector");
  Index best = 0;
  for (Index k = 1; k < v.size(); ++k) {
    if (v(k) > v(best)) best = k;
  }
  return best;
}

double vmsp(const Matrix& member_probs, const Vector& mean_probs) {
  if (member_probs.rows() < 2) throw std::invalid_argument("vmsp needs at least two members");
  if (member_probs.cols() != mean_probs.size()) throw std::invalid_argument("vmsp: class count mismatch");
  const Index c_hat = argmax_lowest(mean_probs);
  // Shifted by the first member so identical members give exactly zero.
  const Vector d = member_probs.col(c_hat).array() - member_probs(0, c_hat);
  const auto S = static_cast<double>(d.size());
  return std::max(0.0, (d.squaredNorm() - d.sum() * d.sum() / S) / (S - 1.0));
}

Vector vmsp_batch(const std::vector<Matrix>& member_probs, const Matrix& mean_probs) {
  const auto S = static_cast<Index>(member_probs.size());
  if (S < 2) throw std::invalid_argument("vmsp needs at least two members");
  Vector out(mean_probs.rows());
  Matrix per_point(S, mean_probs.cols());
  for (Index i = 0; i < mean_probs.rows(); ++i) {
    for (Index s = 0; s < S; ++s) {
      const Matrix& m = member_probs[static_cast<std::size_t>(s)];
      if (m.rows() != mean_probs.rows() || m.cols() != mean_probs.cols()) {
        throw std::invalid_argument("vmsp_batch: member shape mismatch");
      }
      per_point.row(s) = m.row(i);
    }
    out(i) = vmsp(per_point, mean_probs.row(i).transpose());
  }
  return out;
}

double auc_roc(const Vector& scores, const std::vector<bool>& is_positive) {
  if (static_cast<std::size_t>(scores.size()) != is_positive.size()) {
    throw std::invalid_argument("auc_roc: one label per score required");
  }
  if (!scores.allFinite()) throw std::invalid_argument("auc_roc: non-finite score");
  const auto n = static_cast<std::size_t>(scores.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Index>(a)) < scores(static_cast<Index>(b));
  });
  double rank_sum = 0.0;
  double positives = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores(static_cast<Index>(order[j + 1])) == scores(static_cast<Index>(order[i]))) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (is_positive[order[k]]) {
        rank_sum += avg_rank;
        positives += 1.0;
      }
    }
    i = j + 1;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) throw std::invalid_argument("auc_roc: both classes must be present");
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

IntervalStats interval_coverage(const Matrix& mean, const Matrix& variance, const Matrix& target, double level,
                                double variance_multiplier) {
  check_same_shape(mean, target, "interval_coverage");
  check_same_shape(variance, target, "interval_coverage");
  check_variance(variance, "interval_coverage");
  if (!(variance_multiplier > 0.0)) throw std::invalid_argument("interval_coverage: multiplier must be positive");
  if (mean.size() == 0) throw std::invalid_argument("interval_coverage: empty input");
  const double z = central_quantile(level);
  double inside = 0.0;
  double width = 0.0;
  for (Index j = 0; j < mean.cols(); ++j) {
    for (Index i = 0; i < mean.rows(); ++i) {
      const double half = z * std::sqrt(variance_multiplier * variance(i, j));
      inside += std::abs(target(i, j) - mean(i, j)) <= half ? 1.0 : 0.0;
      width += 2.0 * half;
    }
  }
  const auto n = static_cast<double>(mean.size());
  return {inside / n, width / n};
}

double sample_skew(const Vector& xs) {
  if (xs.size() < 3) throw std::invalid_argument("sample_skew needs at least three values");
  const double mu = xs.mean();
  const auto centered = (xs.array() - mu).eval();
  const double m2 = centered.square().mean();
  const double m3 = centered.cube().mean();
  if (m2 <= 0.0) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

double median(const Vector& xs) {
  if (xs.size() == 0) throw std::invalid_argument("median of an empty sample");
  std::vector<double> v(xs.data(), xs.data() + xs.size());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace nuqls
