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

#include "nuqls/experiments/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nuqls {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "' as a number");
  return value;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

Settings Settings::parse(std::string_view text, const std::string& origin) {
  Settings s;
  std::stringstream ss{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const std::string where = origin + ":" + std::to_string(number);
    const std::string content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (s.values_.count(key)) throw ConfigError(where + ": duplicate key '" + key + "' (first set at " + s.origin_[key] + ")");
    s.values_[key] = value;
    s.origin_[key] = where;
  }
  return s;
}

Settings Settings::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path);
}

void Settings::set(const std::string& key, const std::string& value) {
  values_[key] = value;
  origin_[key] = "<override>";
}

const std::string* Settings::lookup(const std::string& key, const std::string& fallback) {
  auto it = values_.find(key);
  if (!consumed_.count(key)) {
    consumed_.insert(key);
    defaults_.emplace_back(key, fallback);
    resolved_.emplace_back(key, it == values_.end() ? fallback : it->second);
  }
  return it == values_.end() ? nullptr : &it->second;
}

std::string Settings::get_string(const std::string& key, const std::string& fallback) {
  const std::string* v = lookup(key, fallback);
  return v ? *v : fallback;
}

double Settings::get_double(const std::string& key, double fallback) {
  const std::string* v = lookup(key, format_double(fallback));
  return v ? parse_number<double>(key, *v) : fallback;
}

int Settings::get_int(const std::string& key, int fallback) {
  const std::string* v = lookup(key, std::to_string(fallback));
  return v ? parse_number<int>(key, *v) : fallback;
}

std::uint64_t Settings::get_u64(const std::string& key, std::uint64_t fallback) {
  const std::string* v = lookup(key, std::to_string(fallback));
  return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

bool Settings::get_bool(const std::string& key, bool fallback) {
  const std::string* v = lookup(key, fallback ? "true" : "false");
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + *v + "'");
}

std::vector<int> Settings::get_int_list(const std::string& key, const std::vector<int>& fallback) {
  const std::string* v = lookup(key, join(fallback));
  if (!v) return fallback;
  std::vector<int> out;
  for (const std::string& item : split_list(*v)) out.push_back(parse_number<int>(key, item));
  return out;
}

std::vector<double> Settings::get_double_list(const std::string& key, const std::vector<double>& fallback) {
  const std::string* v = lookup(key, join(fallback));
  if (!v) return fallback;
  std::vector<double> out;
  for (const std::string& item : split_list(*v)) out.push_back(parse_number<double>(key, item));
  return out;
}

void Settings::check_consumed() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (consumed_.count(key)) continue;
    unknown += (unknown.empty() ? "" : ", ") + key + " (" + origin_.at(key) + ")";
  }
  if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

Json Settings::resolved_json() const {
  Json j = Json::object();
  for (const auto& [key, value] : resolved_) j[key] = value;
  return j;
}

MlpSpec read_mlp(Settings& s, const std::string& prefix, const MlpSpec& fallback) {
  MlpSpec spec = fallback;
  std::vector<int> widths;
  for (Index w : fallback.hidden_widths) widths.push_back(static_cast<int>(w));
  spec.hidden_widths.clear();
  for (int w : s.get_int_list(prefix + ".hidden", widths)) spec.hidden_widths.push_back(w);
  spec.activation = parse_activation(s.get_string(prefix + ".activation", to_string(fallback.activation)));
  spec.scaling = parse_scaling(s.get_string(prefix + ".scaling", to_string(fallback.scaling)));
  spec.bias = s.get_bool(prefix + ".bias", fallback.bias);
  return spec;
}

InitScheme read_init(Settings& s, const std::string& key, InitScheme fallback) {
  return parse_init_scheme(s.get_string(key, to_string(fallback)));
}

OptimizerSpec read_optimizer(Settings& s, const std::string& prefix, const OptimizerSpec& fallback) {
  OptimizerSpec opt = fallback;
  opt.kind = parse_optimizer_kind(s.get_string(prefix + ".optimizer", to_string(fallback.kind)));
  opt.learning_rate = s.get_double(prefix + ".lr", fallback.learning_rate);
  opt.epochs = s.get_int(prefix + ".epochs", fallback.epochs);
  opt.momentum = s.get_double(prefix + ".momentum", fallback.momentum);
  opt.nesterov = s.get_bool(prefix + ".nesterov", fallback.nesterov);
  opt.weight_decay = s.get_double(prefix + ".weight_decay", fallback.weight_decay);
  opt.batch_size = s.get_int(prefix + ".batch_size", static_cast<int>(fallback.batch_size));
  opt.scheduler.kind = parse_scheduler_kind(s.get_string(prefix + ".scheduler", to_string(fallback.scheduler.kind)));
  opt.scheduler.power = s.get_double(prefix + ".scheduler_power", fallback.scheduler.power);
  opt.scheduler.total_iters = s.get_int(prefix + ".scheduler_iters", fallback.scheduler.total_iters);
  opt.target_loss = s.get_double(prefix + ".target_loss", fallback.target_loss);
  opt.early_stopping = s.get_bool(prefix + ".early_stopping", fallback.early_stopping);
  return opt;
}

NuqlsConfig read_nuqls(Settings& s, const std::string& prefix, const NuqlsConfig& fallback) {
  NuqlsConfig cfg = fallback;
  cfg.S = s.get_int(prefix + ".S", fallback.S);
  cfg.gamma = s.get_double(prefix + ".gamma", fallback.gamma);
  cfg.space = parse_training_space(s.get_string(prefix + ".space", to_string(fallback.space)));
  cfg.member_block = s.get_int(prefix + ".member_block", static_cast<int>(fallback.member_block));
  cfg.opt = read_optimizer(s, prefix, fallback.opt);
  return cfg;
}

TernaryConfig read_ternary(Settings& s, const std::string& prefix, const TernaryConfig& fallback) {
  TernaryConfig cfg;
  cfg.left = s.get_double(prefix + ".left", fallback.left);
  cfg.right = s.get_double(prefix + ".right", fallback.right);
  cfg.tolerance = s.get_double(prefix + ".tolerance", fallback.tolerance);
  cfg.max_iters = s.get_int(prefix + ".max_iters", fallback.max_iters);
  cfg.validate();
  return cfg;
}

DeConfig read_de(Settings& s, const std::string& prefix, const DeConfig& fallback) {
  DeConfig cfg = fallback;
  cfg.S = s.get_int(prefix + ".S", fallback.S);
  cfg.init = read_init(s, prefix + ".init", fallback.init);
  cfg.opt = read_optimizer(s, prefix, fallback.opt);
  return cfg;
}

}  // namespace nuqls
