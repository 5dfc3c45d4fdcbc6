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
#include <numeric>
#include <random>

#include "common.hpp"
#include "nuqls/metrics.hpp"

namespace nuqls {
namespace {

// Class probabilities plus per-member probabilities for one method.
struct ClassPredictions {
  Matrix mean;                  // m x c
  std::vector<Matrix> members;  // S blocks of m x c
};

ClassPredictions from_members(std::vector<Matrix> member_probs) {
  ClassPredictions p;
  p.mean = Matrix::Zero(member_probs.front().rows(), member_probs.front().cols());
  for (const Matrix& m : member_probs) p.mean += m;
  p.mean /= static_cast<double>(member_probs.size());
  p.members = std::move(member_probs);
  return p;
}

std::vector<int> predicted_labels(const Matrix& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Index i = 0; i < probs.rows(); ++i) out[i] = static_cast<int>(argmax_lowest(probs.row(i).transpose()));
  return out;
}

double categorical_nll(const Matrix& probs, const std::vector<int>& labels) {
  double total = 0.0;
  for (Index i = 0; i < probs.rows(); ++i) total -= std::log(std::max(probs(i, labels[i]), 1e-300));
  return total / static_cast<double>(probs.rows());
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& labels) {
  Index hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

// Rows [0, n_id) are in-distribution test points, the rest OOD.
struct MethodOutcome {
  std::vector<int> pred;
  Vector vmsp;
};

MethodOutcome record_method(UqReport& report, const std::string& method, const ClassPredictions& p, Index n_id,
                            const std::vector<int>& labels, int ece_bins) {
  MethodOutcome out;
  out.pred = predicted_labels(p.mean);
  out.vmsp = vmsp_batch(p.members, p.mean);
  const Index n_ood = p.mean.rows() - n_id;
  const Matrix id_probs = p.mean.topRows(n_id);
  const std::vector<int> id_pred(out.pred.begin(), out.pred.begin() + n_id);

  VmspSamples& groups = report.vmsp[method];
  for (Index i = 0; i < n_id; ++i) {
    (id_pred[i] == labels[i] ? groups.id_correct : groups.id_incorrect).push_back(out.vmsp[i]);
  }
  for (Index i = n_id; i < n_id + n_ood; ++i) groups.ood.push_back(out.vmsp[i]);

  report.set_metric(method, "accuracy", accuracy(id_pred, labels));
  report.set_metric(method, "ece", ece_classification(id_probs, labels, ece_bins));
  report.set_metric(method, "nll", categorical_nll(id_probs, labels));
  std::vector<bool> is_ood(static_cast<std::size_t>(n_id + n_ood), false);
  std::fill(is_ood.begin() + n_id, is_ood.end(), true);
  if (n_ood > 0) report.set_metric(method, "ood_auc", auc_roc(out.vmsp, is_ood));
  for (VmspGroup g : kVmspGroups) {
    const std::vector<double>& xs = groups.group(g);
    report.set_metric(method, "count_" + to_string(g), static_cast<double>(xs.size()));
    if (xs.empty()) continue;
    const Vector v = detail::to_vector(xs);
    report.set_metric(method, "vmsp_median_" + to_string(g), median(v));
    if (v.size() >= 3) report.set_metric(method, "vmsp_skew_" + to_string(g), sample_skew(v));
  }
  return out;
}

// Standard-normal logits through a softmax, independent of the data.
ClassPredictions random_baseline(Index m, int classes, int samples, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::kBaseline, 1);
  std::vector<Matrix> members;
  for (int s = 0; s < samples; ++s) {
    Matrix logits(m, classes);
    for (Index i = 0; i < m; ++i) logits.row(i) = standard_normal(rng, classes).transpose();
    members.push_back(softmax_rows(logits));
  }
  return from_members(std::move(members));
}

}  // namespace

ClassificationConfig read_classification_config(Settings& s) {
  ClassificationConfig cfg;
  cfg.seed = s.get_u64("seed", 0);
  cfg.blobs.n = s.get_int("data.n", 600);
  cfg.blobs.classes = s.get_int("data.classes", 3);
  cfg.blobs.dim = s.get_int("data.dim", 2);
  cfg.blobs.separation = s.get_double("data.separation", 2.0);
  cfg.blobs.cluster_std = s.get_double("data.cluster_std", 1.0);
  cfg.blobs.n_ood = s.get_int("data.n_ood", 200);
  cfg.blobs.ood_distance = s.get_double("data.ood_distance", 0.0);
  cfg.test_fraction = s.get_double("split.test", 0.5);

  MapSettings map;
  map.net.hidden_widths = {50};
  map.net.activation = Activation::kTanh;
  map.init = InitScheme::kXavierNormal;
  map.opt.kind = OptimizerKind::kAdam;
  map.opt.learning_rate = 1e-2;
  map.opt.epochs = 1000;
  cfg.map = detail::read_map(s, map);

  NuqlsConfig nuqls;
  nuqls.S = 10;
  nuqls.gamma = 1.0;
  nuqls.opt.kind = OptimizerKind::kSgd;
  nuqls.opt.learning_rate = 1e-2;
  nuqls.opt.momentum = 0.9;
  nuqls.opt.batch_size = 50;
  nuqls.opt.epochs = 10;
  cfg.nuqls = read_nuqls(s, "nuqls", nuqls);

  cfg.run_de = s.get_bool("de.enabled", true);
  DeConfig de;
  de.S = 10;
  de.opt.kind = OptimizerKind::kAdam;
  de.opt.learning_rate = 1e-2;
  de.opt.epochs = 1000;
  cfg.de = read_de(s, "de", de);
  cfg.de.loss = LossSpec{LossKind::kCrossEntropy, Reduction::kMean};

  cfg.base_samples = s.get_int("base.samples", 10);
  cfg.ece_bins = s.get_int("ece.bins", 10);
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) throw ConfigError("split.test must lie in (0, 1)");
  if (cfg.base_samples < 2) throw ConfigError("base.samples must be at least 2");
  if (cfg.ece_bins < 1) throw ConfigError("ece.bins must be positive");
  if (cfg.nuqls.S < 2) throw ConfigError("nuqls.S must be at least 2 for VMSP");
  return cfg;
}

UqReport run_classification_blobs(const ClassificationConfig& cfg, const RunOptions& run) {
  detail::Stopwatch total;
  const BlobsTask task = gen_blobs_classification(cfg.blobs, cfg.seed);
  const Dataset& data = task.data;
  const LossSpec loss{LossKind::kCrossEntropy, Reduction::kMean};
  const int c = data.num_classes;

  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  Rng split_rng = make_rng(cfg.seed, Stream::kSplit);
  std::shuffle(order.begin(), order.end(), split_rng);
  const Index n_test = static_cast<Index>(std::floor(cfg.test_fraction * static_cast<double>(data.size())));
  if (n_test < 1 || n_test >= data.size()) throw ConfigError("test split leaves an empty train or test set");
  const std::vector<Index> test_rows(order.begin(), order.begin() + n_test);
  const std::vector<Index> train_rows(order.begin() + n_test, order.end());
  const Dataset train = data.subset(train_rows);
  const Dataset test = data.subset(test_rows);

  Matrix eval(test.size() + task.ood.rows(), data.input_dim());
  eval << test.X, task.ood;

  const detail::MapFit fit = detail::fit_map(cfg.map, data.input_dim(), c, train, loss, cfg.seed);
  MlpSpec spec = cfg.map.net;
  spec.input_dim = data.input_dim();
  spec.output_dim = c;
  const LinearizedModel model(spec, fit.params);

  UqReport report;
  report.experiment = "classification";
  report.dataset = "blobs";
  report.seed = cfg.seed;
  report.metadata["groups"] = "id_correct and id_incorrect use each method's own prediction";
  report.metadata["time_convention"] = "nuqls excludes map training; nuqls_inclusive includes it";

  const Matrix map_probs = softmax_rows(model.net().forward_batch(model.reference(), eval));
  const std::vector<int> map_pred = predicted_labels(map_probs);
  const std::vector<int> map_id_pred(map_pred.begin(), map_pred.begin() + test.size());
  report.set_metric("map", "accuracy", accuracy(map_id_pred, test.labels));
  report.set_metric("map", "ece", ece_classification(map_probs.topRows(test.size()), test.labels, cfg.ece_bins));
  report.set_metric("map", "nll", categorical_nll(map_probs.topRows(test.size()), test.labels));
  report.set_metric("map", "train_loss", fit.train_loss);
  report.timing["map"] = fit.seconds;

  NuqlsConfig ncfg = cfg.nuqls;
  ncfg.seed = derive_seed(cfg.seed, Stream::kMember);
  ncfg.loss = loss;
  ncfg.workers = run.workers;
  ncfg.opt.seed = derive_seed(cfg.seed, Stream::kShuffle, 1);
  detail::Stopwatch nuqls_clock;
  const NuqlsEnsemble ens = nuqls_sample(model, train, ncfg);
  std::vector<Matrix> nuqls_probs;
  for (const Matrix& logits : ensemble_predict(model, ens, eval).members) nuqls_probs.push_back(softmax_rows(logits));
  const ClassPredictions nuqls_pred = from_members(std::move(nuqls_probs));
  report.timing["nuqls"] = nuqls_clock.seconds();
  report.timing["nuqls_inclusive"] = report.timing["nuqls"] + fit.seconds;
  const MethodOutcome nuqls_out = record_method(report, "nuqls", nuqls_pred, test.size(), test.labels, cfg.ece_bins);
  report.set_metric("nuqls", "mean_train_loss", ens.final_train_losses.mean());

  ReportTable points;
  points.columns = {"index", "ood", "label", "map_pred", "nuqls_pred", "nuqls_vmsp"};
  MethodOutcome de_out;
  if (cfg.run_de) {
    DeConfig dcfg = cfg.de;
    dcfg.seed = derive_seed(cfg.seed, Stream::kBaseline);
    dcfg.workers = run.workers;
    dcfg.opt.seed = derive_seed(cfg.seed, Stream::kShuffle, 2);
    detail::Stopwatch de_clock;
    const DeepEnsemble de = de_train(spec, train, dcfg);
    const ClassPredictions de_pred = from_members(de_member_outputs(de, eval).members);
    report.timing["de"] = de_clock.seconds();
    de_out = record_method(report, "de", de_pred, test.size(), test.labels, cfg.ece_bins);
    points.columns.push_back("de_pred");
    points.columns.push_back("de_vmsp");
  }

  const ClassPredictions base_pred = random_baseline(eval.rows(), c, cfg.base_samples, cfg.seed);
  const MethodOutcome base_out = record_method(report, "base", base_pred, test.size(), test.labels, cfg.ece_bins);
  points.columns.push_back("base_pred");
  points.columns.push_back("base_vmsp");

  for (Index i = 0; i < eval.rows(); ++i) {
    const bool ood = i >= test.size();
    std::vector<double> row{static_cast<double>(i), ood ? 1.0 : 0.0, ood ? -1.0 : static_cast<double>(test.labels[i]),
                            static_cast<double>(map_pred[i]), static_cast<double>(nuqls_out.pred[i]),
                            nuqls_out.vmsp[i]};
    if (cfg.run_de) {
      row.push_back(static_cast<double>(de_out.pred[i]));
      row.push_back(de_out.vmsp[i]);
    }
    row.push_back(static_cast<double>(base_out.pred[i]));
    row.push_back(base_out.vmsp[i]);
    points.add_row(std::move(row));
  }
  report.add_table("points", std::move(points));
  report.timing["total"] = total.seconds();
  return report;
}

}  // namespace nuqls
