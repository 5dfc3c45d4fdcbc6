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

#include "common.hpp"
#include "nuqls/metrics.hpp"

namespace nuqls {

Dataset gen_synthetic_regression(const SyntheticRegressionSpec& spec, std::uint64_t seed) {
  if (spec.n < 10 || spec.d < 2) throw ConfigError("synthetic regression needs n >= 10 and d >= 2");
  if (!(spec.noise_std > 0.0)) throw ConfigError("synthetic regression noise must be positive");
  Rng rng = make_rng(seed, Stream::kData, 17);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  Dataset data;
  data.X.resize(spec.n, spec.d);
  data.Y.resize(spec.n, 1);
  for (Index i = 0; i < spec.n; ++i) {
    for (Index j = 0; j < spec.d; ++j) data.X(i, j) = unit(rng);
    double f = std::sin(data.X(i, 0)) + 0.5 * data.X(i, 1) * data.X(i, 1);
    for (Index j = 2; j < spec.d; ++j) f += 0.3 * std::cos(data.X(i, j)) * data.X(i, 0);
    data.Y(i, 0) = f + noise(rng);
  }
  return data;
}

RegressionConfig read_regression_config(Settings& s) {
  RegressionConfig cfg;
  cfg.seed = s.get_u64("seed", 0);
  cfg.path = s.get_string("data.path", "");
  cfg.target_columns = s.get_int_list("data.target_columns", cfg.target_columns);
  cfg.header = s.get_bool("data.header", true);
  cfg.synthetic.n = s.get_int("data.synthetic_n", static_cast<int>(cfg.synthetic.n));
  cfg.synthetic.d = s.get_int("data.synthetic_d", static_cast<int>(cfg.synthetic.d));
  cfg.synthetic.noise_std = s.get_double("data.synthetic_noise", cfg.synthetic.noise_std);
  cfg.repeats = s.get_int("repeats", 1);
  cfg.train_fraction = s.get_double("split.train", 0.70);
  cfg.val_fraction = s.get_double("split.val", 0.15);
  cfg.test_fraction = s.get_double("split.test", 0.15);

  MapSettings map;
  map.net.hidden_widths = {150};
  map.net.activation = Activation::kTanh;
  map.init = InitScheme::kXavierNormal;
  map.opt.kind = OptimizerKind::kAdam;
  map.opt.learning_rate = 1e-2;
  map.opt.epochs = 1500;
  map.opt.weight_decay = 1e-5;
  map.opt.scheduler.kind = SchedulerKind::kPolynomial;
  map.opt.scheduler.power = 0.5;
  map.opt.scheduler.total_iters = 15000;
  cfg.map = detail::read_map(s, map);

  NuqlsConfig nuqls;
  nuqls.S = 10;
  nuqls.gamma = 0.01;
  nuqls.opt.kind = OptimizerKind::kGd;
  nuqls.opt.learning_rate = 1e-2;
  nuqls.opt.momentum = 0.9;
  nuqls.opt.nesterov = true;
  nuqls.opt.epochs = 150;
  cfg.nuqls = read_nuqls(s, "nuqls", nuqls);
  cfg.ternary = read_ternary(s, "tune", TernaryConfig{});

  cfg.run_de = s.get_bool("de.enabled", true);
  DeConfig de;
  de.S = 10;
  de.opt.kind = OptimizerKind::kAdam;
  de.opt.learning_rate = 1e-3;
  de.opt.epochs = 1500;
  cfg.de = read_de(s, "de", de);
  if (cfg.repeats < 1) throw ConfigError("repeats must be at least 1");
  return cfg;
}

UqReport run_regression_csv(const RegressionConfig& cfg, const RunOptions& run) {
  detail::Stopwatch total;
  const Dataset data = cfg.path.empty() ? gen_synthetic_regression(cfg.synthetic, cfg.seed)
                                        : load_csv(cfg.path, cfg.target_columns, cfg.header);
  data.validate();
  const LossSpec loss{LossKind::kMse, Reduction::kMean};
  const Index t = data.Y.cols();

  ReportTable runs;
  runs.columns = {"repeat", "nuqls_rmse", "nuqls_nll", "nuqls_ece", "nuqls_gamma", "map_rmse"};
  if (cfg.run_de) {
    for (const char* c : {"de_rmse", "de_nll", "de_ece"}) runs.columns.push_back(c);
  }
  // Wall-clock seconds summed over repeats; kept out of the tables so that
  // reports compare equal across runs.
  double t_map = 0.0, t_nuqls = 0.0, t_de = 0.0;

  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = detail::repeat_seed(cfg.seed, r);
    const DataSplits splits =
        normalize(split(data, cfg.train_fraction, cfg.val_fraction, cfg.test_fraction, derive_seed(seed, Stream::kSplit)));
    const detail::MapFit fit = detail::fit_map(cfg.map, data.input_dim(), t, splits.train, loss, seed);
    MlpSpec spec = cfg.map.net;
    spec.input_dim = data.input_dim();
    spec.output_dim = t;
    const LinearizedModel model(spec, fit.params);

    NuqlsConfig ncfg = cfg.nuqls;
    ncfg.seed = derive_seed(seed, Stream::kMember);
    ncfg.loss = loss;
    ncfg.workers = run.workers;
    ncfg.opt.seed = derive_seed(seed, Stream::kShuffle, 1);
    detail::Stopwatch nuqls_clock;
    const NuqlsEnsemble ens = nuqls_sample(model, splits.train, ncfg);
    const GammaTuning tuned = tune_gamma(model, ens, splits.val, cfg.ternary);
    const PosteriorSummary post = ensemble_stats(ensemble_predict(model, ens, splits.test.X), tuned.gamma,
                                                 StatsMode::kRegression, ncfg.gamma);
    const double nuqls_seconds = nuqls_clock.seconds();
    const Matrix map_pred = model.net().forward_batch(model.reference(), splits.test.X);

    std::vector<double> row{static_cast<double>(r),
                            rmse(post.mean, splits.test.Y),
                            gaussian_nll_metric(post.mean, post.variance, splits.test.Y),
                            ece_regression(post.mean, post.variance, splits.test.Y),
                            tuned.gamma,
                            rmse(map_pred, splits.test.Y)};
    t_map += fit.seconds;
    t_nuqls += nuqls_seconds;
    if (cfg.run_de) {
      DeConfig dcfg = cfg.de;
      dcfg.seed = derive_seed(seed, Stream::kBaseline);
      dcfg.workers = run.workers;
      dcfg.opt.seed = derive_seed(seed, Stream::kShuffle, 2);
      MlpSpec de_spec = spec;
      de_spec.output_dim = 2 * t;
      detail::Stopwatch de_clock;
      const DeepEnsemble de = de_train(de_spec, splits.train, dcfg);
      const PosteriorSummary dp = de_predict(de, splits.test.X);
      t_de += de_clock.seconds();
      row.push_back(rmse(dp.mean, splits.test.Y));
      row.push_back(gaussian_nll_metric(dp.mean, dp.variance, splits.test.Y));
      row.push_back(ece_regression(dp.mean, dp.variance, splits.test.Y));
    }
    runs.add_row(std::move(row));
  }

  UqReport report;
  report.experiment = "regression";
  report.dataset = cfg.path.empty() ? std::string("synthetic") : cfg.path;
  report.seed = cfg.seed;
  report.metadata["units"] = "normalized";
  report.metadata["split"] = format_double(cfg.train_fraction) + "/" + format_double(cfg.val_fraction) + "/" +
                             format_double(cfg.test_fraction);
  report.metadata["time_convention"] =
      "seconds per repeat; nuqls excludes map training, nuqls_inclusive includes it";

  // Mean and sample standard deviation over repeats, per column.
  for (std::size_t c = 1; c < runs.columns.size(); ++c) {
    const std::string& name = runs.columns[c];
    const auto split_at = name.find('_');
    const std::string method = name.substr(0, split_at);
    const std::string metric = name.substr(split_at + 1);
    std::vector<double> xs;
    for (const auto& row : runs.rows) xs.push_back(row[c]);
    const detail::MeanCi m = detail::mean_ci(xs);
    report.set_metric(method, metric, m.mean);
    report.set_metric(method, metric + "_std", m.sd);
  }
  report.add_table("runs", std::move(runs));
  const double reps = static_cast<double>(cfg.repeats);
  report.timing["map"] = t_map / reps;
  report.timing["nuqls"] = t_nuqls / reps;
  report.timing["nuqls_inclusive"] = (t_nuqls + t_map) / reps;
  if (cfg.run_de) report.timing["de"] = t_de / reps;
  report.timing["total"] = total.seconds();
  return report;
}

}  // namespace nuqls
