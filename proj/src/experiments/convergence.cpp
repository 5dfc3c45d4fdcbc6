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
#include <limits>
#include <map>

#include "common.hpp"
#include "nuqls/metrics.hpp"
#include "nuqls/ntk_gp.hpp"

namespace nuqls {
namespace {

using detail::mean_ci;
using detail::MeanCi;

Vector member_variance(const Matrix& outputs, int S, double gamma) {
  EnsemblePredictions preds;
  for (int s = 0; s < S; ++s) preds.members.push_back(outputs.col(s));
  return ensemble_stats(preds, gamma, StatsMode::kRegression, gamma).variance.col(0);
}

// mean |estimate - reference| / mean reference
double mean_relative_error(const Vector& estimate, const Vector& reference) {
  return (estimate - reference).cwiseAbs().sum() / std::max(reference.sum(), kVarianceFloor);
}

struct SweepPoint {
  std::vector<double> sev, loss, condition, rel_error;
};

}  // namespace

ConvergenceConfig read_convergence_config(Settings& s) {
  ConvergenceConfig cfg;
  cfg.seed = s.get_u64("seed", 0);
  cfg.repeats = s.get_int("repeats", 10);
  cfg.n = s.get_int("data.n", 100);
  cfg.d = s.get_int("data.d", 5);

  MapSettings map;
  map.net.hidden_widths = {256};
  map.net.activation = Activation::kTanh;
  map.net.scaling = Scaling::kNtk;
  map.net.bias = false;
  map.init = InitScheme::kStandardNormal;
  map.opt.kind = OptimizerKind::kGd;
  map.opt.learning_rate = 0.1;
  map.opt.momentum = 0.9;
  map.opt.nesterov = true;
  map.opt.epochs = 5000;
  cfg.map = detail::read_map(s, map);

  NuqlsConfig nuqls;
  nuqls.gamma = 1.0;
  nuqls.space = TrainingSpace::kRange;
  nuqls.member_block = 100;
  nuqls.opt.kind = OptimizerKind::kGd;
  nuqls.opt.learning_rate = 1.0;
  nuqls.opt.momentum = 0.9;
  nuqls.opt.nesterov = true;
  // Members train until the loss target; the cap only guards against stalls.
  nuqls.opt.epochs = 100000;
  nuqls.opt.target_loss = 1e-10;
  cfg.nuqls = read_nuqls(s, "nuqls", nuqls);
  cfg.epoch_checkpoints = s.get_int_list("sweep.epochs", cfg.epoch_checkpoints);
  cfg.epoch_sweep_size = s.get_int("sweep.epochs_size", cfg.epoch_sweep_size);
  cfg.sample_sizes = s.get_int_list("sweep.sizes", cfg.sample_sizes);
  cfg.equivalence_size = s.get_int("equivalence.size", cfg.equivalence_size);

  if (cfg.repeats < 1) throw ConfigError("repeats must be at least 1");
  if (cfg.n < 2 || cfg.d < 1) throw ConfigError("convergence data needs n >= 2 and d >= 1");
  if (cfg.epoch_checkpoints.empty() || cfg.sample_sizes.empty())
    throw ConfigError("sweep.epochs and sweep.sizes must be nonempty");
  for (int e : cfg.epoch_checkpoints)
    if (e < 1 || e > cfg.nuqls.opt.epochs)
      throw ConfigError("sweep.epochs entries must lie in [1, nuqls.epochs]");
  for (int S : cfg.sample_sizes)
    if (S < 2) throw ConfigError("sweep.sizes entries must be at least 2");
  if (cfg.epoch_sweep_size < 2 || cfg.equivalence_size < 2)
    throw ConfigError("sweep.epochs_size and equivalence.size must be at least 2");
  return cfg;
}

UqReport run_convergence(const ConvergenceConfig& cfg, const RunOptions& run) {
  detail::Stopwatch total;
  int S_max = std::max(cfg.epoch_sweep_size, cfg.equivalence_size);
  for (int S : cfg.sample_sizes) S_max = std::max(S_max, S);
  int final_epoch = 0;  // longest member run over all repeats
  const LossSpec loss{LossKind::kMse, Reduction::kMean};

  std::map<int, SweepPoint> by_epoch;
  std::map<int, SweepPoint> by_size;
  std::vector<double> equivalence_error, max_loss, map_loss;
  double t_map = 0.0, t_gp = 0.0, t_nuqls = 0.0;
  ReportTable repeats;
  repeats.columns = {"repeat", "sweep", "epochs", "S", "sev", "loss", "condition", "rel_error"};

  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = detail::repeat_seed(cfg.seed, r);
    const GaussianTask task = gen_gaussian_synthetic(cfg.n, cfg.d, seed);
    const detail::MapFit fit = detail::fit_map(cfg.map, cfg.d, 1, task.train, loss, seed);
    t_map += fit.seconds;
    map_loss.push_back(fit.train_loss);
    MlpSpec spec = cfg.map.net;
    spec.input_dim = cfg.d;
    spec.output_dim = 1;
    const LinearizedModel model(spec, fit.params);

    detail::Stopwatch gp_clock;
    const NtkGram G = gram(model.net(), model.reference(), task.train.X);
    const double condition = G.condition_estimate();
    const Vector reference =
        gp_posterior_regression(model.net(), model.reference(), task.train, task.test.X, cfg.nuqls.gamma, &G)
            .variance.col(0);
    t_gp += gp_clock.seconds();

    NuqlsConfig ncfg = cfg.nuqls;
    ncfg.S = S_max;
    ncfg.seed = derive_seed(seed, Stream::kMember);
    ncfg.loss = loss;
    ncfg.workers = run.workers;
    ncfg.checkpoint_epochs = cfg.epoch_checkpoints;
    const LinearizedCache test_cache = model.cache(task.test.X);
    const Index m = task.test.size();
    std::map<int, Matrix> outputs_at;
    std::map<int, Vector> loss_at;
    std::map<int, std::vector<bool>> seen_at;
    for (int e : cfg.epoch_checkpoints) {
      outputs_at[e] = Matrix::Zero(m, S_max);
      loss_at[e] = Vector::Zero(S_max);
      seen_at[e].assign(static_cast<std::size_t>(S_max), false);
    }
    detail::Stopwatch nuqls_clock;
    const NuqlsEnsemble ens =
        nuqls_sample(model, task.train, ncfg, [&](int epoch, Index first, const Matrix& params, const Vector& l) {
          outputs_at[epoch].middleCols(first, params.cols()) = model.forward_block(test_cache, params);
          loss_at[epoch].segment(first, params.cols()) = l;
          for (Index j = 0; j < params.cols(); ++j) seen_at[epoch][static_cast<std::size_t>(first + j)] = true;
        });
    t_nuqls += nuqls_clock.seconds();
    const int run_epochs = *std::max_element(ens.epochs_run.begin(), ens.epochs_run.end());
    final_epoch = std::max(final_epoch, run_epochs);

    Matrix final_params(model.num_params(), S_max);
    for (int s = 0; s < S_max; ++s) final_params.col(s) = ens.members[static_cast<std::size_t>(s)];
    const Matrix final_outputs = model.forward_block(test_cache, final_params);
    // Members that stopped early keep their final parameters at later checkpoints.
    for (int e : cfg.epoch_checkpoints)
      for (int s = 0; s < S_max; ++s)
        if (!seen_at[e][static_cast<std::size_t>(s)]) {
          outputs_at[e].col(s) = final_outputs.col(s);
          loss_at[e][s] = ens.final_train_losses[s];
        }

    for (int e : cfg.epoch_checkpoints) {
      const int S = cfg.epoch_sweep_size;
      const Vector v = member_variance(outputs_at[e], S, cfg.nuqls.gamma);
      SweepPoint& point = by_epoch[e];
      point.sev.push_back(sev(v, reference));
      point.loss.push_back(loss_at[e].head(S).mean());
      point.condition.push_back(condition);
      point.rel_error.push_back(mean_relative_error(v, reference));
      repeats.add_row({static_cast<double>(r), 0.0, static_cast<double>(e), static_cast<double>(S), point.sev.back(),
                       point.loss.back(), condition, point.rel_error.back()});
    }
    for (int S : cfg.sample_sizes) {
      const Vector v = member_variance(final_outputs, S, cfg.nuqls.gamma);
      SweepPoint& point = by_size[S];
      point.sev.push_back(sev(v, reference));
      point.loss.push_back(ens.final_train_losses.head(S).mean());
      point.condition.push_back(condition);
      point.rel_error.push_back(mean_relative_error(v, reference));
      repeats.add_row({static_cast<double>(r), 1.0, static_cast<double>(run_epochs), static_cast<double>(S),
                       point.sev.back(), point.loss.back(), condition, point.rel_error.back()});
    }
    const int Se = cfg.equivalence_size;
    equivalence_error.push_back(mean_relative_error(member_variance(final_outputs, Se, cfg.nuqls.gamma), reference));
    max_loss.push_back(ens.final_train_losses.head(Se).maxCoeff());
  }

  UqReport report;
  report.experiment = "convergence";
  report.dataset = "gaussian_synthetic";
  report.seed = cfg.seed;
  report.metadata["variance_reference"] = "ntk_gp";
  report.metadata["sweep_codes"] = "0=epochs,1=samples";
  report.metadata["ci"] = "student_t_95";

  auto summary_columns = [](const std::string& lead) {
    return std::vector<std::string>{lead,        "S",         "epochs",          "sev_mean",         "sev_ci",
                                    "loss_mean", "loss_ci",   "rel_error_mean",  "rel_error_ci",     "condition_mean",
                                    "condition_ci"};
  };
  auto summary_row = [](double lead, double S, double epochs, const SweepPoint& p) {
    const MeanCi sev_ci = mean_ci(p.sev), loss_ci = mean_ci(p.loss), rel = mean_ci(p.rel_error),
                 cond = mean_ci(p.condition);
    return std::vector<double>{lead,         S,        epochs,          sev_ci.mean,   sev_ci.half_width, loss_ci.mean,
                               loss_ci.half_width, rel.mean, rel.half_width, cond.mean, cond.half_width};
  };
  ReportTable epochs_table;
  epochs_table.columns = summary_columns("sweep_epochs");
  for (const auto& [e, p] : by_epoch)
    epochs_table.add_row(summary_row(e, cfg.epoch_sweep_size, e, p));
  ReportTable sizes_table;
  sizes_table.columns = summary_columns("sweep_size");
  for (const auto& [S, p] : by_size) sizes_table.add_row(summary_row(S, S, final_epoch, p));
  report.add_table("sev_epochs", std::move(epochs_table));
  report.add_table("sev_sizes", std::move(sizes_table));
  report.add_table("repeats", std::move(repeats));

  const MeanCi eq = mean_ci(equivalence_error);
  report.set_metric("nuqls", "rel_variance_error", eq.mean);
  report.set_metric("nuqls", "rel_variance_error_ci", eq.half_width);
  report.set_metric("nuqls", "equivalence_size", cfg.equivalence_size);
  report.set_metric("nuqls", "max_train_loss", *std::max_element(max_loss.begin(), max_loss.end()));
  report.set_metric("nuqls", "max_epochs_run", final_epoch);
  for (const auto& [S, p] : by_size)
    report.set_metric("nuqls", "rel_variance_error_S" + std::to_string(S), mean_ci(p.rel_error).mean);
  report.set_metric("map", "train_loss", mean_ci(map_loss).mean);
  report.set_metric("ntk_gp", "condition", mean_ci(by_size.begin()->second.condition).mean);
  report.timing["map"] = t_map;
  report.timing["ntk_gp"] = t_gp;
  report.timing["nuqls"] = t_nuqls;
  report.timing["total"] = total.seconds();
  return report;
}

}  // namespace nuqls
