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

#ifndef NUQLS_METRICS_HPP_
#define NUQLS_METRICS_HPP_

#include <span>
#include <vector>

#include "nuqls/types.hpp"

namespace nuqls {

// Elementwise metrics accept any m x t matrix and treat all entries alike.

double rmse(const Matrix& pred, const Matrix& target);

inline constexpr double kVarianceFloor = 1e-12;

// Mean over entries of 0.5 [(y - mu)^2 / s2 + log s2 + log 2 pi], s2 floored at 1e-12.
double gaussian_nll_metric(const Matrix& mean, const Matrix& variance, const Matrix& target);

// {0.05, 0.10, ..., 0.95}
std::vector<double> default_ece_levels();

// Mean absolute gap between empirical and nominal coverage of central
// Gaussian intervals. A target on the interval boundary counts as inside.
double ece_regression(const Matrix& mean, const Matrix& variance, const Matrix& target,
                      const std::vector<double>& levels = default_ece_levels());

// Top-label ECE with equal-width confidence bins on [0, 1].
double ece_classification(const Matrix& probs, std::span<const int> labels, int bins = 10);

// Index of the largest entry; ties go to the lowest index.
Index argmax_lowest(const Vector& v);

// Unbiased variance across rows of member_probs (S x c) of the column chosen
// by argmax of mean_probs.
double vmsp(const Matrix& member_probs, const Vector& mean_probs);
// member_probs[s] is m x c; returns one VMSP per point.
Vector vmsp_batch(const std::vector<Matrix>& member_probs, const Matrix& mean_probs);

// Mann-Whitney AUC; tied scores contribute 1/2.
double auc_roc(const Vector& scores, const std::vector<bool>& is_positive);

struct IntervalStats {
  double coverage = 0.0;
  double mean_width = 0.0;
};

// Central Gaussian intervals mu +- z sqrt(multiplier * variance).
IntervalStats interval_coverage(const Matrix& mean, const Matrix& variance, const Matrix& target, double level,
                                double variance_multiplier = 1.0);

// Fisher-Pearson g1 = m3 / m2^{3/2} from population moments; 0 for a constant sample.
double sample_skew(const Vector& xs);
double median(const Vector& xs);

}  // namespace nuqls

#endif  // NUQLS_METRICS_HPP_
