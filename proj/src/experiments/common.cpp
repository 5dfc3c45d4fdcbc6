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

#include "common.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <sstream>

namespace nuqls {

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kConvergence:
      return "convergence";
    case ExperimentKind::kToy:
      return "toy";
    case ExperimentKind::kRegressionCsv:
      return "regression";
    case ExperimentKind::kClassificationBlobs:
      return "classification";
    case ExperimentKind::kIntervals:
      return "intervals";
    case ExperimentKind::kTune:
      return "tune";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (ExperimentKind k : {ExperimentKind::kConvergence, ExperimentKind::kToy, ExperimentKind::kRegressionCsv,
                           ExperimentKind::kClassificationBlobs, ExperimentKind::kIntervals, ExperimentKind::kTune})
    if (name == to_string(k)) return k;
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

UqReport run_experiment(ExperimentKind kind, Settings& s, const RunOptions& run) {
  UqReport report;
  switch (kind) {
    case ExperimentKind::kConvergence: {
      const ConvergenceConfig cfg = read_convergence_config(s);
      s.check_consumed();
      report = run_convergence(cfg, run);
      break;
    }
    case ExperimentKind::kToy: {
      const ToyConfig cfg = read_toy_config(s);
      s.check_consumed();
      report = run_toy(cfg, run);
      break;
    }
    case ExperimentKind::kRegressionCsv: {
      const RegressionConfig cfg = read_regression_config(s);
      s.check_consumed();
      report = run_regression_csv(cfg, run);
      break;
    }
    case ExperimentKind::kClassificationBlobs: {
      const ClassificationConfig cfg = read_classification_config(s);
      s.check_consumed();
      report = run_classification_blobs(cfg, run);
      break;
    }
    case ExperimentKind::kIntervals: {
      const IntervalsConfig cfg = read_intervals_config(s);
      s.check_consumed();
      report = run_intervals(cfg, run);
      break;
    }
    case ExperimentKind::kTune: {
      const TuneConfig cfg = read_tune_config(s);
      s.check_consumed();
      report = run_tune(cfg, run);
      break;
    }
  }
  report.config = s.resolved_json();
  return report;
}

std::string describe_defaults(ExperimentKind kind) {
  Settings s;
  switch (kind) {
    case ExperimentKind::kConvergence:
      read_convergence_config(s);
      break;
    case ExperimentKind::kToy:
      read_toy_config(s);
      break;
    case ExperimentKind::kRegressionCsv:
      read_regression_config(s);
      break;
    case ExperimentKind::kClassificationBlobs:
      read_classification_config(s);
      break;
    case ExperimentKind::kIntervals:
      read_intervals_config(s);
      break;
    case ExperimentKind::kTune:
      read_tune_config(s);
      break;
  }
  std::ostringstream os;
  os << "# " << to_string(kind) << " defaults\n";
  for (const auto& [key, value] : s.defaults()) os << key << " = " << value << "\n";
  return os.str();
}

namespace detail {

MapSettings read_map(Settings& s, const MapSettings& fallback) {
  MapSettings map;
  map.net = read_mlp(s, "net", fallback.net);
  map.init = read_init(s, "net.init", fallback.init);
  map.opt = read_optimizer(s, "map", fallback.opt);
  return map;
}

MapFit fit_map(const MapSettings& map, Index input_dim, Index output_dim, const Dataset& data, const LossSpec& loss,
               std::uint64_t seed) {
  MlpSpec spec = map.net;
  spec.input_dim = input_dim;
  spec.output_dim = output_dim;
  OptimizerSpec opt = map.opt;
  opt.seed = derive_seed(seed, Stream::kShuffle);
  const Stopwatch clock;
  const ParamVector theta0 = init_params(spec, map.init, derive_seed(seed, Stream::kInit));
  TrainResult fit;
  try {
    fit = train(spec, theta0, data, loss, opt);
  } catch (const TrainingDiverged& e) {
    throw NumericalError(std::string("network training diverged: ") + e.what());
  }
  return {std::move(fit.params), fit.final_loss, clock.seconds()};
}

MeanCi mean_ci(const std::vector<double>& xs, double level) {
  MeanCi out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) out.mean += x;
  out.mean /= n;
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  out.half_width = boost::math::quantile(dist, 0.5 + level / 2.0) * out.sd / std::sqrt(n);
  return out;
}

Vector to_vector(const std::vector<double>& xs) { return Eigen::Map<const Vector>(xs.data(), static_cast<Index>(xs.size())); }

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

PosteriorSummary rescaled(const PosteriorSummary& p, double gamma_base, double gamma) {
  PosteriorSummary out = p;
  const double f = (gamma / gamma_base) * (gamma / gamma_base);
  out.variance *= f;
  for (Matrix& block : out.covariance) block *= f;
  out.gamma = gamma;
  return out;
}

}  // namespace detail
}  // namespace nuqls
