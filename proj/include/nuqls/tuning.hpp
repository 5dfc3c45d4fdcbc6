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

#ifndef NUQLS_TUNING_HPP_
#define NUQLS_TUNING_HPP_

#include <functional>
#include <vector>

#include "nuqls/data.hpp"
#include "nuqls/linearized.hpp"
#include "nuqls/metrics.hpp"
#include "nuqls/posterior.hpp"

namespace nuqls {

struct TernaryConfig {
  double left = 1e-3;
  double right = 10.0;
  double tolerance = 1e-4;
  int max_iters = 100;

  void validate() const;
};

struct TernaryStats {
  int iterations = 0;
  int evaluations = 0;
};

// Minimizes a unimodal f on [left, right] and returns the midpoint of the
// final bracket. Throws NumericalError when f returns a non-finite value.
double ternary_search(const std::function<double(double)>& f, const TernaryConfig& cfg, TernaryStats* stats = nullptr);

struct GammaTuning {
  double gamma = 1.0;
  double gamma_base = 1.0;
  double ece = 0.0;  // validation ECE at gamma
  bool degenerate = false;
  int evaluations = 0;
  double search_left = 0.0;  // bracket actually searched
  double search_right = 0.0;
};

// `base` holds the ensemble mean and the variance at gamma_base. Searches
// gamma for the lowest validation ECE of (mean, variance (gamma/gamma_base)^2).
// The bracket is narrowed to the range where the ECE is not flat. An all-zero
// variance makes the ECE flat everywhere; the interval midpoint is returned
// with `degenerate` set.
GammaTuning tune_gamma(const PosteriorSummary& base, const Matrix& val_targets, double gamma_base,
                       const TernaryConfig& cfg = {}, const std::vector<double>& levels = default_ece_levels());

// Predicts the validation set with the linearized members and tunes gamma
// relative to the perturbation scale the ensemble was trained with.
GammaTuning tune_gamma(const LinearizedModel& model, const NuqlsEnsemble& ens, const Dataset& val,
                       const TernaryConfig& cfg = {}, const std::vector<double>& levels = default_ece_levels());

}  // namespace nuqls

#endif  // NUQLS_TUNING_HPP_
