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


#include <cmath>
#include <random>

#include "common.hpp"
#include "nuqls/metrics.hpp"

namespace nuqls {
namespace {

// Inputs uniform on [0, input_max]^d, y = sum_i sin(x_i) + N(0, noise^2).
Dataset gen_sine_sum(Index n, Index d, double input_max, double noise_std, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::kData, 23);
  std::uniform_real_distribution<double> unit(0.0, input_max);
  std::normal_distribution<double> noise(0.0, noise_std);
  Dataset data;
  data.X.resize(n, d);
  data.Y.resize(n, 1);
  for (Index i = 0; i < n; ++i) {
    double f = 0.0;
    for (Index j = 0; j < d; ++j) {
      data.X(i, j) = unit(rng);
      f += std::sin(data.X(i, j));
    }
    data.Y(i, 0) = f + noise(rng);
  }
  return data;
}

std::string level_tag(double level) { return std::to_string(static_cast<int>(std::lround(100.0 * level))); }

}  // namespace

IntervalsConfig read_intervals_config(Settings& s) {
  IntervalsConfig cfg;
  cfg.seed = s.get_u64("seed", 0);
  cfg.d = s.get_int("data.d", 2);
  cfg.n = s.get_int("data.n", 128);
  cfg.input_max = s.get_double("data.input_max", 0.2);
  cfg.noise_std = s.get_double("data.noise_std", 0.001);
  cfg.n_val = s.get_int("data.n_val", 128);
  cfg.repeats = s.get_int("repeats", 20);

  MapSettings map;
  map.net.hidden_widths = {static_cast<Index>(cfg.n)};
  map.net.activation = Activation::kTanh;
  map.net.scaling = Scaling::kNtk;
  map.init = InitScheme::kStandardNormal;
  map.opt.kind = OptimizerKind::kGd;
  map.opt.learning_rate = 0.5;
  map.opt.epochs = 100;
  cfg.map = detail::read_map(s, map);

  NuqlsConfig nuqls;
  nuqls.S = 10;
  nuqls.gamma = 0.01;
  nuqls.opt.kind = OptimizerKind::kGd;
  nuqls.opt.learning_rate = 0.5;
  nuqls.opt.epochs = 100;
  cfg.nuqls = read_nuqls(s, "nuqls", nuqls);
  cfg.tune = s.get_bool("tune.enabled", true);
  cfg.ternary = read_ternary(s, "tune", TernaryConfig{});
  cfg.levels = s.get_double_list("levels", cfg.levels);
  cfg.variance_multiplier = s.get_double("variance_multiplier", 1.0);

  if (cfg.d < 1 || cfg.n < 2 || cfg.n_val < 2) throw ConfigError("intervals need d >= 1, n >= 2 and n_val >= 2");
  if (!(cfg.input_max > 0.0) || !(cfg.noise_std >= 0.0)) throw ConfigError("input_max must be positive, noise >= 0");
  if (cfg.repeats < 1) throw ConfigError("repeats must be at least 1");
  if (!(cfg.variance_multiplier > 0.0)) throw ConfigError("variance_multiplier must be positive");
  for (double l : cfg.levels) {
    if (!(l > 0.0 && l < 1.0)) throw ConfigError("interval levels must lie in (0, 1)");
  }
  return cfg;
}

UqReport run_intervals(const IntervalsConfig& cfg, const RunOptions& run) {
  detail::Stopwatch total;
  const LossSpec loss{LossKind::kMse, Reduction::kMean};
  const Matrix x0 = Matrix::Constant(1, cfg.d, 0.5 * cfg.input_max);
  const double truth = static_cast<double>(cfg.d) * std::sin(0.5 * cfg.input_max);
  const Matrix target = Matrix::Constant(1, 1, truth);

  ReportTable runs;
  runs.columns = {"repeat", "mean", "std", "gamma", "map"};
  for (double l : cfg.levels) {
    runs.columns.push_back("covered_" + level_tag(l));
    runs.columns.push_back("width_" + level_tag(l));
  }
  double map_seconds = 0.0, nuqls_seconds = 0.0;

  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = detail::repeat_seed(cfg.seed, r);
    const Dataset train = gen_sine_sum(cfg.n, cfg.d, cfg.input_max, cfg.noise_std, seed);
    const Dataset val =
        gen_sine_sum(cfg.n_val, cfg.d, cfg.input_max, cfg.noise_std, derive_seed(seed, Stream::kSplit));
    const detail::MapFit fit = detail::fit_map(cfg.map, cfg.d, 1, train, loss, seed);
    map_seconds += fit.seconds;
    MlpSpec spec = cfg.map.net;
    spec.input_dim = cfg.d;
    spec.output_dim = 1;
    const LinearizedModel model(spec, fit.params);

    NuqlsConfig ncfg = cfg.nuqls;
    ncfg.seed = derive_seed(seed, Stream::kMember);
    ncfg.loss = loss;
    ncfg.workers = run.workers;
    ncfg.opt.seed = derive_seed(seed, Stream::kShuffle, 1);
    detail::Stopwatch clock;
    const NuqlsEnsemble ens = nuqls_sample(model, train, ncfg);
    GammaTuning tuned;
    tuned.gamma = tuned.gamma_base = ncfg.gamma;
    if (cfg.tune) tuned = tune_gamma(model, ens, val, cfg.ternary);
    const PosteriorSummary post =
        ensemble_stats(ensemble_predict(model, ens, x0), tuned.gamma, StatsMode::kRegression, ncfg.gamma);
    nuqls_seconds += clock.seconds();

    std::vector<double> row{static_cast<double>(r), post.mean(0, 0), std::sqrt(post.variance(0, 0)), tuned.gamma,
                            model.net().forward_batch(model.reference(), x0)(0, 0)};
    for (double l : cfg.levels) {
      const IntervalStats st = interval_coverage(post.mean, post.variance, target, l, cfg.variance_multiplier);
      row.push_back(st.coverage);
      row.push_back(st.mean_width);
    }
    runs.add_row(std::move(row));
  }

  UqReport report;
  report.experiment = "intervals";
  report.dataset = "sine_sum_d" + std::to_string(cfg.d);
  report.seed = cfg.seed;
  report.metadata["target"] = "sum of sin at x = input_max / 2 in every coordinate";
  report.metadata["units"] = "original";

  const auto column_mean = [&](std::size_t c) {
    std::vector<double> xs;
    for (const auto& row : runs.rows) xs.push_back(row[c]);
    return detail::mean_ci(xs);
  };
  report.set_metric("nuqls", "truth", truth);
  report.set_metric("nuqls", "mean_prediction", column_mean(1).mean);
  report.set_metric("nuqls", "mean_std", column_mean(2).mean);
  report.set_metric("nuqls", "mean_gamma", column_mean(3).mean);
  report.set_metric("map", "mean_prediction", column_mean(4).mean);
  for (std::size_t k = 0; k < cfg.levels.size(); ++k) {
    const std::string tag = level_tag(cfg.levels[k]);
    report.set_metric("nuqls", "coverage_" + tag, column_mean(5 + 2 * k).mean);
    report.set_metric("nuqls", "width_" + tag, column_mean(6 + 2 * k).mean);
  }
  report.add_table("runs", std::move(runs));
  report.timing["map"] = map_seconds;
  report.timing["nuqls"] = nuqls_seconds;
  report.timing["total"] = total.seconds();
  return report;
}

}  // namespace nuqls
