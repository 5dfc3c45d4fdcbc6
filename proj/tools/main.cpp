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


#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nuqls/experiments/experiments.hpp"
#include "nuqls/log.hpp"
#include "nuqls/report.hpp"
#include "nuqls/runtime.hpp"
#include "nuqls/types.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct ExperimentArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out;
  std::vector<std::string> overrides;
  bool print_defaults = false;
};

void print_summary(const nuqls::UqReport& r, std::ostream& os) {
  os << "experiment " << r.experiment << "  dataset " << r.dataset << "  seed " << r.seed << "\n";
  for (const auto& [method, metrics] : r.metrics) {
    for (const auto& [name, value] : metrics) {
      os << "  " << std::left << std::setw(8) << method << std::setw(32) << name << std::setprecision(6) << value
         << "\n";
    }
  }
  for (const auto& [method, groups] : r.vmsp) {
    os << "  vmsp " << method;
    for (nuqls::VmspGroup g : nuqls::kVmspGroups) os << "  " << to_string(g) << "=" << groups.group(g).size();
    os << "\n";
  }
  for (const auto& [name, table] : r.tables) os << "  table " << name << " (" << table.rows.size() << " rows)\n";
  for (const auto& [phase, seconds] : r.timing) os << "  time " << phase << " " << seconds << " s\n";
}

int run_experiment_command(nuqls::ExperimentKind kind, const ExperimentArgs& args) {
  if (args.print_defaults) {
    std::cout << nuqls::describe_defaults(kind);
    return 0;
  }
  if (args.workers < 1) throw nuqls::ConfigError("--workers must be at least 1");
  nuqls::Settings settings = args.config.empty() ? nuqls::Settings{} : nuqls::Settings::load(args.config);
  for (const std::string& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw nuqls::ConfigError("--set expects key=value, got '" + kv + "'");
    settings.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed) settings.set("seed", std::to_string(*args.seed));
  const std::filesystem::path out = args.out.empty() ? std::filesystem::path("out") / to_string(kind) : std::filesystem::path(args.out);

  nuqls::RunOptions run;
  run.workers = args.workers;
  const nuqls::UqReport report = nuqls::run_experiment(kind, settings, run);
  nuqls::write_report(report, out);
  print_summary(report, std::cout);
  std::cout << "wrote " << (out / "report.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  nuqls::configure_allocator();
  CLI::App app{"Uncertainty quantification with ensembles of linearized networks"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> experiments = {
      {"convergence", "Ensemble variance against the closed-form NTK-GP as epochs and ensemble size grow"},
      {"toy", "One-dimensional cubic regression with uncertainty bands"},
      {"regression", "Train/val/test regression on a CSV file or a synthetic data set"},
      {"classification", "Gaussian blobs with an out-of-distribution cluster, VMSP per group"},
      {"intervals", "Coverage and width of confidence intervals over repeated draws"},
      {"tune", "Gamma tuning on a planted calibration problem"},
  };
  ExperimentArgs args;
  std::string selected;
  for (const auto& [name, help] : experiments) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", args.config, "Key/value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "Master seed (overrides the config)");
    sub->add_option("--workers", args.workers, "Worker threads for ensemble training")->capture_default_str();
    sub->add_option("--out", args.out, "Output directory (default out/<experiment>)");
    sub->add_option("--set", args.overrides, "Override a config key, key=value (repeatable)");
    sub->add_flag("--print-defaults", args.print_defaults, "Print every config key with its default and exit");
    sub->callback([&selected, n = name] { selected = n; });
  }

  std::string report_path;
  CLI::App* report_cmd = app.add_subcommand("report", "Summarize an existing report.json");
  report_cmd->add_option("path", report_path, "report.json or its directory")->required();
  report_cmd->callback([&selected] { selected = "report"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (selected == "report") {
      print_summary(nuqls::read_report(report_path), std::cout);
      return 0;
    }
    return run_experiment_command(nuqls::parse_experiment_kind(selected), args);
  } catch (const nuqls::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nuqls::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const nuqls::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  }
}
