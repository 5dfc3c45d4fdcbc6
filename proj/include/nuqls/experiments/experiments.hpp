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

#ifndef NUQLS_EXPERIMENTS_EXPERIMENTS_HPP_
#define NUQLS_EXPERIMENTS_EXPERIMENTS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "nuqls/data.hpp"
#include "nuqls/deep_ensemble.hpp"
#include "nuqls/experiments/config.hpp"
#include "nuqls/linearized.hpp"
#include "nuqls/net.hpp"
#include "nuqls/report.hpp"
#include "nuqls/train.hpp"
#include "nuqls/tuning.hpp"

namespace nuqls {

enum class ExperimentKind { kConvergence, kToy, kRegressionCsv, kClassificationBlobs, kIntervals, kTune };

std::string to_string(ExperimentKind k);
// Accepts the CLI subcommand names (convergence, toy, regression,
// classification, intervals, tune).
ExperimentKind parse_experiment_kind(std::string_view name);

// Process-level knobs that never change a report's contents.
struct RunOptions {
  int workers = 1;
};

// Network trained on the data before any uncertainty method runs.
struct MapSettings {
  MlpSpec net;
  InitScheme init = InitScheme::kXavierNormal;
  OptimizerSpec opt;
};

struct ConvergenceConfig {
  std::uint64_t seed = 0;
  int repeats = 10;
  Index n = 100;  // training and test points
  Index d = 5;
  MapSettings map;
  NuqlsConfig nuqls;  // S is ignored; the largest requested size is trained
  std::vector<int> epoch_checkpoints{100, 1000, 10000};
  int epoch_sweep_size = 500;  // ensemble size used for the epoch sweep
  std::vector<int> sample_sizes{10, 100, 500};
  int equivalence_size = 100;
};

struct ToyConfig {
  std::uint64_t seed = 0;
  Index n = 20;
  Index n_val = 20;
  double noise_std = 3.0;
  MapSettings map;
  NuqlsConfig nuqls;
  bool tune = true;
  TernaryConfig ternary;
  bool run_de = true;
  DeConfig de;
  Index grid_points = 200;
  double grid_min = -6.0;
  double grid_max = 6.0;
  double band_sigmas = 3.0;
};

// Synthetic stand-in used when no CSV path is configured.
struct SyntheticRegressionSpec {
  Index n = 2000;
  Index d = 4;
  double noise_std = 0.2;
};

Dataset gen_synthetic_regression(const SyntheticRegressionSpec& spec, std::uint64_t seed);

struct RegressionConfig {
  std::uint64_t seed = 0;
  std::string path;  // empty selects the synthetic data set
  std::vector<int> target_columns{-1};  // negative counts from the end
  bool header = true;
  SyntheticRegressionSpec synthetic;
  int repeats = 1;
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  double test_fraction = 0.15;
  MapSettings map;
  NuqlsConfig nuqls;
  TernaryConfig ternary;
  bool run_de = true;
  DeConfig de;
};

struct ClassificationConfig {
  std::uint64_t seed = 0;
  BlobsSpec blobs;
  double test_fraction = 0.5;
  MapSettings map;
  NuqlsConfig nuqls;
  bool run_de = true;
  DeConfig de;
  int base_samples = 10;  // softmax draws per point for the randomized baseline
  int ece_bins = 10;
};

struct IntervalsConfig {
  std::uint64_t seed = 0;
  Index d = 2;
  Index n = 128;
  double input_max = 0.2;
  double noise_std = 0.001;
  int repeats = 20;
  Index n_val = 128;
  MapSettings map;
  NuqlsConfig nuqls;
  bool tune = true;
  TernaryConfig ternary;
  std::vector<double> levels{0.90, 0.95};
  double variance_multiplier = 1.0;  // widens every interval by its square root
};

// Recovers a planted calibration scale: targets are drawn with standard
// deviation k * sigma_base, so the ECE-optimal gamma is k * gamma_base.
struct TuneConfig {
  std::uint64_t seed = 0;
  Index m = 5000;
  double gamma_base = 0.01;
  double planted_scale = 25.0;
  TernaryConfig ternary;
  int probe_points = 41;  // ECE curve sampled on a log grid for inspection
};

// Each reader consumes its keys from `s`; calling one on empty settings
// records the defaults.
ConvergenceConfig read_convergence_config(Settings& s);
ToyConfig read_toy_config(Settings& s);
RegressionConfig read_regression_config(Settings& s);
ClassificationConfig read_classification_config(Settings& s);
IntervalsConfig read_intervals_config(Settings& s);
TuneConfig read_tune_config(Settings& s);

UqReport run_convergence(const ConvergenceConfig& cfg, const RunOptions& run = {});
UqReport run_toy(const ToyConfig& cfg, const RunOptions& run = {});
UqReport run_regression_csv(const RegressionConfig& cfg, const RunOptions& run = {});
UqReport run_classification_blobs(const ClassificationConfig& cfg, const RunOptions& run = {});
UqReport run_intervals(const IntervalsConfig& cfg, const RunOptions& run = {});
UqReport run_tune(const TuneConfig& cfg, const RunOptions& run = {});

// Reads the experiment's config from `s`, rejects unknown keys, runs it and
// stores the resolved settings in the report.
UqReport run_experiment(ExperimentKind kind, Settings& s, const RunOptions& run = {});

// "key = default" lines for every key the experiment reads.
std::string describe_defaults(ExperimentKind kind);

}  // namespace nuqls

#endif  // NUQLS_EXPERIMENTS_EXPERIMENTS_HPP_
