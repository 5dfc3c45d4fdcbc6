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

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "nuqls/log.hpp"

namespace nuqls {

void TernaryConfig::validate() const {
  if (!(left < right)) throw ConfigError("ternary search needs left < right");
  if (!(tolerance > 0.0)) throw ConfigError("ternary search tolerance must be positive");
  if (max_iters <= 0) throw ConfigError("ternary search max_iters must be positive");
}

double ternary_search(const std::function<double(double)>& f, const TernaryConfig& cfg, TernaryStats* stats) {
  cfg.validate();
  TernaryStats local;
  auto eval = [&](double x) {
    const double v = f(x);
    ++local.evaluations;
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "ternary search: objective is not finite at x = " << x << " (iteration " << local.iterations << ")";
      throw NumericalError(os.str());
    }
    return v;
  };
  double l = cfg.left;
  double r = cfg.right;
  while (std::abs(l - r) >= cfg.tolerance && local.iterations < cfg.max_iters) {
    const double l13 = l + (r - l) / 3.0;
    const double r13 = r - (r - l) / 3.0;
    if (eval(l13) < eval(r13)) {
      r = r13;
    } else {
      l = l13;
    }
    ++local.iterations;
  }
  if (stats != nullptr) *stats = local;
  return 0.5 * (l + r);
}

GammaTuning tune_gamma(const PosteriorSummary& base, const Matrix& val_targets, double gamma_base,
                       const TernaryConfig& cfg, const std::vector<double>& levels) {
  if (!(gamma_base > 0.0)) throw std::invalid_argument("tune_gamma: gamma_base must be positive");
  if (val_targets.rows() == 0) throw std::invalid_argument("tune_gamma: empty validation set");
  if (levels.empty()) throw std::invalid_argument("tune_gamma: empty level list");
  cfg.validate();
  GammaTuning out;
  out.gamma_base = gamma_base;
  auto ece_at = [&](double gamma) {
    const double scale = (gamma / gamma_base) * (gamma / gamma_base);
    return ece_regression(base.mean, base.variance * scale, val_targets, levels);
  };
  if (base.variance.size() > 0 && base.variance.maxCoeff() <= 0.0) {
    out.gamma = 0.5 * (cfg.left + cfg.right);
    out.degenerate = true;
    out.ece = ece_at(out.gamma);
    out.evaluations = 1;
    log_warning("tune_gamma: ensemble variance is zero everywhere; returning the interval midpoint");
    return out;
  }
  // Outside [gamma_b r_min / z_max, gamma_b r_max / z_min] every interval is
  // empty or every interval is full, so the ECE is flat there and a ternary
  // probe pair can tie on the wrong side. Search the informative part only.
  double r_min = std::numeric_limits<double>::infinity();
  double r_max = 0.0;
  for (Index j = 0; j < base.mean.cols(); ++j) {
    for (Index i = 0; i < base.mean.rows(); ++i) {
      const double s2 = base.variance(i, j);
      if (!(s2 > 0.0)) continue;
      const double r = std::abs(val_targets(i, j) - base.mean(i, j)) / std::sqrt(s2);
      r_min = std::min(r_min, r);
      r_max = std::max(r_max, r);
    }
  }
  static const boost::math::normal_distribution<double> standard;
  const auto [lo_level, hi_level] = std::minmax_element(levels.begin(), levels.end());
  const double z_min = boost::math::quantile(standard, 0.5 * (1.0 + *lo_level));
  const double z_max = boost::math::quantile(standard, 0.5 * (1.0 + *hi_level));
  TernaryConfig search = cfg;
  search.left = std::max(cfg.left, gamma_base * r_min / z_max);
  search.right = std::min(cfg.right, gamma_base * r_max / z_min);
  if (!(search.left < search.right)) search = cfg;
  out.search_left = search.left;
  out.search_right = search.right;
  TernaryStats stats;
  out.gamma = ternary_search(ece_at, search, &stats);
  out.ece = ece_at(out.gamma);
  out.evaluations = stats.evaluations + 1;
  return out;
}

GammaTuning tune_gamma(const LinearizedModel& model, const NuqlsEnsemble& ens, const Dataset& val,
                       const TernaryConfig& cfg, const std::vector<double>& levels) {
  if (val.is_classification()) throw std::invalid_argument("tune_gamma needs a regression validation set");
  const EnsemblePredictions preds = ensemble_predict(model, ens, val.X, ens.config.jacobian_budget);
  const double gamma_base = ens.config.gamma;
  const PosteriorSummary base = ensemble_stats(preds, gamma_base, StatsMode::kRegression, gamma_base);
  return tune_gamma(base, val.Y, gamma_base, cfg, levels);
}

}  // namespace nuqls
