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

#include <algorithm>
#include <cmath>

#include "common.hpp"
#include "nuqls/metrics.hpp"

namespace nuqls {
namespace {

struct BandStats {
  double containment = 0.0;
  double sigma_left = 0.0;
  double sigma_right = 0.0;
  double sigma_in_data = 0.0;  // median over grid points inside the data support
};

bool in_support(double x) { return (x >= -4.0 && x <= -2.0) || (x >= 2.0 && x <= 4.0); }

BandStats band_stats(const Vector& grid, const Vector& mean, const Vector& sd, double sigmas) {
  BandStats b;
  std::vector<double> inside;
  Index hits = 0;
  for (Index i = 0; i < grid.size(); ++i) {
    const double truth = grid[i] * grid[i] * grid[i];
    if (std::abs(truth - mean[i]) <= sigmas * sd[i]) ++hits;
    if (in_support(grid[i])) inside.push_back(sd[i]);
  }
  b.containment = static_cast<double>(hits) / static_cast<double>(grid.size());
  b.sigma_left = sd[0];
  b.sigma_right = sd[grid.size() - 1];
  b.sigma_in_data = inside.empty() ? 0.0 : median(detail::to_vector(inside));
  return b;
}

void record_band(UqReport& report, const std::string& method, const BandStats& b) {
  report.set_metric(method, "containment", b.containment);
  report.set_metric(method, "sigma_left", b.sigma_left);
  report.set_metric(method, "sigma_right", b.sigma_right);
  report.set_metric(method, "sigma_in_data_median", b.sigma_in_data);
  const double edge = std::min(b.sigma_left, b.sigma_right);
  report.set_metric(method, "edge_ratio", b.sigma_in_data > 0.0 ? edge / b.sigma_in_data : 0.0);
}

}  // namespace

ToyConfig read_toy_config(Settings& s) {
  ToyConfig cfg;
  cfg.seed = s.get_u64("seed", 0);
  cfg.n = s.get_int("data.n", 20);
  cfg.n_val = s.get_int("data.n_val", 20);
  cfg.noise_std = s.get_double("data.noise_std", 3.0);

  MapSettings map;
  map.net.hidden_widths = {50};
  map.net.activation = Activation::kSilu;
  map.init = InitScheme::kXavierNormal;
  map.opt.kind = OptimizerKind::kAdam;
  map.opt.learning_rate = 1e-3;
  map.opt.epochs = 10000;
  map.opt.scheduler.kind = SchedulerKind::kPolynomial;
  map.opt.scheduler.power = 0.5;
  cfg.map = detail::read_map(s, map);

  NuqlsConfig nuqls;
  nuqls.S = 10;
  nuqls.gamma = 5.0;
  nuqls.opt.kind = OptimizerKind::kSgd;
  nuqls.opt.learning_rate = 1e-3;
  nuqls.opt.momentum = 0.9;
  nuqls.opt.epochs = 1000;
  cfg.nuqls = read_nuqls(s, "nuqls", nuqls);
  cfg.tune = s.get_bool("tune.enabled", true);
  TernaryConfig ternary;
  ternary.left = 1e-2;
  ternary.right = 1e3;
  cfg.ternary = read_ternary(s, "tune", ternary);

  cfg.run_de = s.get_bool("de.enabled", true);
  DeConfig de;
  de.S = 10;
  de.opt.kind = OptimizerKind::kAdam;
  de.opt.learning_rate = 0.05;
  de.opt.epochs = 2000;
  cfg.de = read_de(s, "de", de);

  cfg.grid_points = s.get_int("grid.points", 200);
  cfg.grid_min = s.get_double("grid.min", -6.0);
  cfg.grid_max = s.get_double("grid.max", 6.0);
  cfg.band_sigmas = s.get_double("grid.band_sigmas", 3.0);
  if (cfg.n < 2 || cfg.n_val < 2) throw ConfigError("toy data needs at least 2 training and 2 validation points");
  if (cfg.grid_points < 2 || !(cfg.grid_max > cfg.grid_min)) throw ConfigError("grid needs 2+ points and max > min");
  return cfg;
}

UqReport run_toy(const ToyConfig& cfg, const RunOptions& run) {
  detail::Stopwatch total;
  const LossSpec loss{LossKind::kMse, Reduction::kMean};
  const Dataset train = gen_cubic_toy(cfg.n, cfg.seed, false, cfg.noise_std);
  const Dataset val = gen_cubic_toy(cfg.n_val, derive_seed(cfg.seed, Stream::kSplit), false, cfg.noise_std);

  const detail::MapFit fit = detail::fit_map(cfg.map, 1, 1, train, loss, cfg.seed);
  MlpSpec spec = cfg.map.net;
  spec.input_dim = 1;
  spec.output_dim = 1;
  const LinearizedModel model(spec, fit.params);

  NuqlsConfig ncfg = cfg.nuqls;
  ncfg.seed = derive_seed(cfg.seed, Stream::kMember);
  ncfg.loss = loss;
  ncfg.workers = run.workers;
  ncfg.opt.seed = derive_seed(cfg.seed, Stream::kShuffle, 1);
  detail::Stopwatch nuqls_clock;
  const NuqlsEnsemble ens = nuqls_sample(model, train, ncfg);
  GammaTuning tuned;
  tuned.gamma = tuned.gamma_base = ncfg.gamma;
  if (cfg.tune) tuned = tune_gamma(model, ens, val, cfg.ternary);
  const double t_nuqls = nuqls_clock.seconds();

  const Vector grid = Vector::LinSpaced(cfg.grid_points, cfg.grid_min, cfg.grid_max);
  const Matrix Xg = grid;
  const PosteriorSummary post =
      ensemble_stats(ensemble_predict(model, ens, Xg), tuned.gamma, StatsMode::kRegression, ncfg.gamma);
  const Vector nuqls_mean = post.mean.col(0);
  const Vector nuqls_sd = post.variance.col(0).cwiseSqrt();

  UqReport report;
  report.experiment = "toy";
  report.dataset = "cubic";
  report.seed = cfg.seed;
  report.metadata["units"] = "original";
  report.metadata["band"] = format_double(cfg.band_sigmas) + " sigma";

  ReportTable table;
  table.columns = {"x", "truth", "map", "nuqls_mean", "nuqls_std"};
  Vector de_mean, de_sd;
  double t_de = 0.0;
  if (cfg.run_de) {
    DeConfig dcfg = cfg.de;
    dcfg.seed = derive_seed(cfg.seed, Stream::kBaseline);
    dcfg.workers = run.workers;
    dcfg.opt.seed = derive_seed(cfg.seed, Stream::kShuffle, 2);
    detail::Stopwatch de_clock;
    MlpSpec de_spec = spec;
    de_spec.output_dim = 2;
    const DeepEnsemble de = de_train(de_spec, train, dcfg);
    const PosteriorSummary dp = de_predict(de, Xg);
    t_de = de_clock.seconds();
    de_mean = dp.mean.col(0);
    de_sd = dp.variance.col(0).cwiseSqrt();
    table.columns.push_back("de_mean");
    table.columns.push_back("de_std");
  }
  const Matrix map_out = model.net().forward_batch(model.reference(), Xg);
  for (Index i = 0; i < grid.size(); ++i) {
    std::vector<double> row{grid[i], grid[i] * grid[i] * grid[i], map_out(i, 0), nuqls_mean[i], nuqls_sd[i]};
    if (cfg.run_de) {
      row.push_back(de_mean[i]);
      row.push_back(de_sd[i]);
    }
    table.add_row(std::move(row));
  }
  report.add_table("grid", std::move(table));
  ReportTable points;
  points.columns = {"x", "y"};
  for (Index i = 0; i < train.size(); ++i) points.add_row({train.X(i, 0), train.Y(i, 0)});
  report.add_table("train", std::move(points));

  record_band(report, "nuqls", band_stats(grid, nuqls_mean, nuqls_sd, cfg.band_sigmas));
  report.set_metric("nuqls", "gamma", tuned.gamma);
  report.set_metric("nuqls", "val_ece", tuned.ece);
  report.set_metric("nuqls", "tuning_degenerate", tuned.degenerate ? 1.0 : 0.0);
  report.set_metric("nuqls", "mean_train_loss", ens.final_train_losses.mean());
  report.set_metric("map", "train_loss", fit.train_loss);
  if (cfg.run_de) record_band(report, "de", band_stats(grid, de_mean, de_sd, cfg.band_sigmas));

  report.timing["map"] = fit.seconds;
  report.timing["nuqls"] = t_nuqls;
  report.timing["nuqls_inclusive"] = t_nuqls + fit.seconds;
  if (cfg.run_de) report.timing["de"] = t_de;
  report.timing["total"] = total.seconds();
  return report;
}

}  // namespace nuqls
