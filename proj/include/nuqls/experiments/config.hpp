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

#ifndef NUQLS_EXPERIMENTS_CONFIG_HPP_
#define NUQLS_EXPERIMENTS_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nuqls/deep_ensemble.hpp"
#include "nuqls/linearized.hpp"
#include "nuqls/net.hpp"
#include "nuqls/serialize.hpp"
#include "nuqls/train.hpp"
#include "nuqls/tuning.hpp"

namespace nuqls {

// Flat `dotted.key = value` settings. Lines starting with '#' are comments;
// lists are comma separated. Every lookup records the key and its default so
// that unread keys can be rejected and the defaults listed.
class Settings {
 public:
  Settings() = default;
  static Settings parse(std::string_view text, const std::string& origin = "<string>");
  static Settings load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  int get_int(const std::string& key, int fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback);
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback);

  // Throws ConfigError naming every key that was set but never read.
  void check_consumed() const;

  // Keys read so far with the value in effect, in lookup order.
  const std::vector<std::pair<std::string, std::string>>& resolved() const { return resolved_; }
  // Keys read so far with their built-in defaults, in lookup order.
  const std::vector<std::pair<std::string, std::string>>& defaults() const { return defaults_; }
  Json resolved_json() const;

 private:
  const std::string* lookup(const std::string& key, const std::string& fallback);

  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> origin_;  // key -> "file:line"
  std::set<std::string> consumed_;
  std::vector<std::pair<std::string, std::string>> resolved_;
  std::vector<std::pair<std::string, std::string>> defaults_;
};

std::string format_double(double v);

// Readers for the shared building blocks. `prefix` ends without a dot, e.g.
// "net" reads net.hidden, net.activation, ...
MlpSpec read_mlp(Settings& s, const std::string& prefix, const MlpSpec& fallback);
InitScheme read_init(Settings& s, const std::string& key, InitScheme fallback);
OptimizerSpec read_optimizer(Settings& s, const std::string& prefix, const OptimizerSpec& fallback);
NuqlsConfig read_nuqls(Settings& s, const std::string& prefix, const NuqlsConfig& fallback);
TernaryConfig read_ternary(Settings& s, const std::string& prefix, const TernaryConfig& fallback);
DeConfig read_de(Settings& s, const std::string& prefix, const DeConfig& fallback);

}  // namespace nuqls

#endif  // NUQLS_EXPERIMENTS_CONFIG_HPP_
