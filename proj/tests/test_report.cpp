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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace nuqls {
namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "nuqls_test_report" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

UqReport sample_report() {
  UqReport r;
  r.experiment = "regression";
  r.dataset = "synthetic";
  r.seed = 17;
  r.metadata["units"] = "normalized";
  r.set_metric("nuqls", "rmse", 0.125);
  r.set_metric("nuqls", "nll", -0.3);
  r.set_metric("de", "rmse", 0.2);
  r.vmsp["nuqls"].id_correct = {0.01, 0.02};
  r.vmsp["nuqls"].ood = {0.1};
  ReportTable t;
  t.columns = {"x", "mean", "std"};
  t.add_row({0.0, 1.0, 0.5});
  t.add_row({1.0, 2.0, 1.0 / 3.0});
  r.add_table("grid", t);
  r.timing["nuqls"] = 1.25;
  r.config = {{"nuqls.S", "10"}};
  return r;
}

TEST(ReportTest, JsonRoundTrip) {
  const UqReport r = sample_report();
  const UqReport back = report_from_json(report_to_json(r));
  EXPECT_EQ(back, r);
}

TEST(ReportTest, FilesRoundTripAndSchemaVersion) {
  const UqReport r = sample_report();
  const auto dir = fresh_dir("files");
  write_report(r, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "metrics.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "vmsp.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "grid.csv"));
  const Json j = read_json_file((dir / "report.json").string());
  EXPECT_EQ(j.at("schema_version").get<int>(), kReportSchemaVersion);
  EXPECT_EQ(read_report(dir), r);
  EXPECT_EQ(read_report(dir / "report.json"), r);
  EXPECT_EQ(slurp(dir / "grid.csv"), "x,mean,std\n0,1,0.5\n1,2,0.33333333333333331\n");
  EXPECT_NE(slurp(dir / "metrics.csv").find("nuqls,rmse,0.125"), std::string::npos);
  EXPECT_NE(slurp(dir / "vmsp.csv").find("nuqls,ood,0.10000000000000001"), std::string::npos);
}

TEST(ReportTest, EmptyGroupsSerializeAsEmptyArrays) {
  const Json j = report_to_json(sample_report());
  EXPECT_TRUE(j.at("vmsp").at("nuqls").at("id_incorrect").is_array());
  EXPECT_TRUE(j.at("vmsp").at("nuqls").at("id_incorrect").empty());
}

TEST(ReportTest, TimingSeparable) {
  UqReport a = sample_report();
  UqReport b = sample_report();
  b.timing["nuqls"] = 99.0;
  EXPECT_NE(report_to_json(a).dump(), report_to_json(b).dump());
  EXPECT_EQ(report_to_json(a, false).dump(), report_to_json(b, false).dump());
  EXPECT_FALSE(report_to_json(a, false).contains("timing"));
}

TEST(ReportTest, RejectsNonFiniteAndBadNames) {
  UqReport r;
  EXPECT_THROW(r.set_metric("m", "x", std::nan("")), NumericalError);
  EXPECT_THROW(r.add_table("bad name", {}), std::invalid_argument);
  EXPECT_THROW(r.add_table("metrics", {}), std::invalid_argument);
  r.vmsp["m"].ood = {std::numeric_limits<double>::infinity()};
  EXPECT_THROW(report_to_json(r), NumericalError);
  ReportTable t;
  t.columns = {"a"};
  EXPECT_THROW(t.add_row({1.0, 2.0}), std::invalid_argument);
}

TEST(ReportTest, GroupEnum) {
  for (VmspGroup g : kVmspGroups) EXPECT_EQ(parse_vmsp_group(to_string(g)), g);
  EXPECT_THROW(parse_vmsp_group("other"), ConfigError);
}

TEST(ReportTest, MalformedInput) {
  EXPECT_THROW(report_from_json(Json{{"schema_version", 99}}), IoError);
  EXPECT_THROW(report_from_json(Json{{"schema_version", 1}}), IoError);
  EXPECT_THROW(read_report("/nonexistent/report.json"), IoError);
}

}  // namespace
}  // namespace nuqls
