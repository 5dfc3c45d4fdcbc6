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

#ifndef NUQLS_REPORT_HPP_
#define NUQLS_REPORT_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nuqls/serialize.hpp"

namespace nuqls {

inline constexpr int kReportSchemaVersion = 1;

enum class VmspGroup { kIdCorrect, kIdIncorrect, kOod };
inline constexpr std::array<VmspGroup, 3> kVmspGroups = {VmspGroup::kIdCorrect, VmspGroup::kIdIncorrect,
                                                         VmspGroup::kOod};
std::string to_string(VmspGroup g);
VmspGroup parse_vmsp_group(std::string_view name);

struct VmspSamples {
  std::vector<double> id_correct;
  std::vector<double> id_incorrect;
  std::vector<double> ood;

  std::vector<double>& group(VmspGroup g);
  const std::vector<double>& group(VmspGroup g) const;
  bool operator==(const VmspSamples&) const = default;
};

// A rectangular numeric table, exported as <name>.csv next to report.json.
struct ReportTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add_row(std::vector<double> row);
  bool operator==(const ReportTable&) const = default;
};

struct UqReport {
  std::string experiment;
  std::string dataset;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> metadata;
  std::map<std::string, std::map<std::string, double>> metrics;  // method -> metric -> value
  std::map<std::string, VmspSamples> vmsp;                       // method -> groups
  std::map<std::string, ReportTable> tables;
  std::map<std::string, double> timing;  // seconds, monotonic clock
  Json config = Json::object();

  // Throw NumericalError on non-finite values.
  void set_metric(const std::string& method, const std::string& name, double value);
  void add_table(const std::string& name, ReportTable table);
  void validate() const;

  bool operator==(const UqReport&) const = default;
};

// Timing lives under its own top-level key so it can be dropped when
// comparing runs.
Json report_to_json(const UqReport& report, bool include_timing = true);
UqReport report_from_json(const Json& j);

// Writes report.json, metrics.csv (method,metric,value), vmsp.csv
// (method,group,value) and one CSV per table into dir, creating it if needed.
void write_report(const UqReport& report, const std::filesystem::path& dir);
// Accepts either the report.json path or its directory.
UqReport read_report(const std::filesystem::path& path);

void write_table_csv(const std::filesystem::path& path, const ReportTable& table);

}  // namespace nuqls

#endif  // NUQLS_REPORT_HPP_
