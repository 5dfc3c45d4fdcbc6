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

#include "nuqls/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace nuqls {
namespace {

void require_finite(double v, const std::string& where) {
  if (!std::isfinite(v)) throw NumericalError("report value " + where + " is not finite");
}

void check_name(const std::string& name) {
  if (name.empty()) throw std::invalid_argument("report table name is empty");
  for (char ch : name) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '_' ||
                    ch == '-';
    if (!ok) throw std::invalid_argument("report table name '" + name + "' must be [A-Za-z0-9_-]");
  }
  if (name == "metrics" || name == "vmsp") throw std::invalid_argument("report table name '" + name + "' is reserved");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

std::string to_string(VmspGroup g) {
  switch (g) {
    case VmspGroup::kIdCorrect: return "id_correct";
    case VmspGroup::kIdIncorrect: return "id_incorrect";
    case VmspGroup::kOod: return "ood";
  }
  return "?";
}

VmspGroup parse_vmsp_group(std::string_view name) {
  for (VmspGroup g : kVmspGroups) {
    if (to_string(g) == name) return g;
  }
  throw ConfigError("unknown VMSP group '" + std::string(name) + "'");
}

std::vector<double>& VmspSamples::group(VmspGroup g) {
  return const_cast<std::vector<double>&>(static_cast<const VmspSamples&>(*this).group(g));
}

const std::vector<double>& VmspSamples::group(VmspGroup g) const {
  switch (g) {
    case VmspGroup::kIdCorrect: return id_correct;
    case VmspGroup::kIdIncorrect: return id_incorrect;
    case VmspGroup::kOod: return ood;
  }
  throw std::invalid_argument("bad VMSP group");
}

void ReportTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size()) throw std::invalid_argument("report table row has the wrong number of columns");
  rows.push_back(std::move(row));
}

void UqReport::set_metric(const std::string& method, const std::string& name, double value) {
  require_finite(value, method + "/" + name);
  metrics[method][name] = value;
}

void UqReport::add_table(const std::string& name, ReportTable table) {
  check_name(name);
  tables[name] = std::move(table);
}

void UqReport::validate() const {
  for (const auto& [method, values] : metrics) {
    for (const auto& [name, v] : values) require_finite(v, method + "/" + name);
  }
  for (const auto& [method, groups] : vmsp) {
    for (VmspGroup g : kVmspGroups) {
      for (double v : groups.group(g)) require_finite(v, method + "/vmsp/" + to_string(g));
    }
  }
  for (const auto& [name, table] : tables) {
    check_name(name);
    for (const auto& row : table.rows) {
      if (row.size() != table.columns.size()) throw std::invalid_argument("ragged report table " + name);
      for (double v : row) require_finite(v, "table " + name);
    }
  }
  for (const auto& [name, v] : timing) require_finite(v, "timing/" + name);
}

Json report_to_json(const UqReport& report, bool include_timing) {
  report.validate();
  Json j;
  j["schema_version"] = kReportSchemaVersion;
  j["experiment"] = report.experiment;
  j["dataset"] = report.dataset;
  j["seed"] = report.seed;
  j["metadata"] = report.metadata;
  j["metrics"] = report.metrics;
  Json vmsp = Json::object();
  for (const auto& [method, groups] : report.vmsp) {
    Json g = Json::object();
    for (VmspGroup group : kVmspGroups) g[to_string(group)] = groups.group(group);
    vmsp[method] = g;
  }
  j["vmsp"] = vmsp;
  Json tables = Json::object();
  for (const auto& [name, table] : report.tables) {
    tables[name] = {{"columns", table.columns}, {"rows", table.rows}};
  }
  j["tables"] = tables;
  j["config"] = report.config.is_null() ? Json::object() : report.config;
  if (include_timing) j["timing"] = report.timing;
  return j;
}

UqReport report_from_json(const Json& j) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kReportSchemaVersion) {
      throw IoError("unsupported report schema_version " + std::to_string(version));
    }
    UqReport r;
    r.experiment = j.at("experiment").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    r.metrics = j.at("metrics").get<std::map<std::string, std::map<std::string, double>>>();
    for (const auto& [method, groups] : j.at("vmsp").items()) {
      VmspSamples s;
      for (VmspGroup g : kVmspGroups) s.group(g) = groups.at(to_string(g)).get<std::vector<double>>();
      r.vmsp[method] = std::move(s);
    }
    for (const auto& [name, table] : j.at("tables").items()) {
      ReportTable t;
      t.columns = table.at("columns").get<std::vector<std::string>>();
      t.rows = table.at("rows").get<std::vector<std::vector<double>>>();
      r.tables[name] = std::move(t);
    }
    r.config = j.at("config");
    if (r.config.empty()) r.config = Json::object();
    if (j.contains("timing")) r.timing = j.at("timing").get<std::map<std::string, double>>();
    r.validate();
    return r;
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed report: ") + e.what());
  }
}

void write_table_csv(const std::filesystem::path& path, const ReportTable& table) {
  std::ofstream out = open_out(path);
  for (std::size_t k = 0; k < table.columns.size(); ++k) out << (k ? "," : "") << table.columns[k];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << row[k];
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_report(const UqReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_json_file((dir / "report.json").string(), report_to_json(report));

  std::ofstream metrics = open_out(dir / "metrics.csv");
  metrics << "method,metric,value\n";
  for (const auto& [method, values] : report.metrics) {
    for (const auto& [name, v] : values) metrics << method << "," << name << "," << v << "\n";
  }
  if (!metrics) throw IoError("failed writing metrics.csv");

  std::ofstream vmsp = open_out(dir / "vmsp.csv");
  vmsp << "method,group,value\n";
  for (const auto& [method, groups] : report.vmsp) {
    for (VmspGroup g : kVmspGroups) {
      for (double v : groups.group(g)) vmsp << method << "," << to_string(g) << "," << v << "\n";
    }
  }
  if (!vmsp) throw IoError("failed writing vmsp.csv");

  for (const auto& [name, table] : report.tables) write_table_csv(dir / (name + ".csv"), table);
}

UqReport read_report(const std::filesystem::path& path) {
  const std::filesystem::path file = std::filesystem::is_directory(path) ? path / "report.json" : path;
  return report_from_json(read_json_file(file.string()));
}

}  // namespace nuqls
