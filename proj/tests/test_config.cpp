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

#include <gtest/gtest.h>

#include "nuqls/experiments/experiments.hpp"

namespace nuqls {
namespace {

TEST(Settings, ParsesValuesCommentsAndLists) {
  Settings s = Settings::parse(
      "# comment\n"
      "  seed = 7 \n"
      "\n"
      "nuqls.lr = 0.25\n"
      "sweep.sizes = 10, 100 ,500\n"
      "map.nesterov = true\n"
      "net.activation = tanh\n");
  EXPECT_EQ(s.get_u64("seed", 0), 7u);
  EXPECT_DOUBLE_EQ(s.get_double("nuqls.lr", 1.0), 0.25);
  EXPECT_EQ(s.get_int_list("sweep.sizes", {}), (std::vector<int>{10, 100, 500}));
  EXPECT_TRUE(s.get_bool("map.nesterov", false));
  EXPECT_EQ(s.get_string("net.activation", "relu"), "tanh");
  EXPECT_EQ(s.get_int("missing", 3), 3);
  EXPECT_NO_THROW(s.check_consumed());
}

TEST(Settings, RejectsMalformedInput) {
  EXPECT_THROW(Settings::parse("no equals sign\n"), ConfigError);
  EXPECT_THROW(Settings::parse(" = 3\n"), ConfigError);
  EXPECT_THROW(Settings::parse("a = 1\na = 2\n"), ConfigError);
  Settings s = Settings::parse("n = 12x\nflag = maybe\nlist = 1,,2\nbig = 1e4\n");
  EXPECT_THROW(s.get_int("n", 0), ConfigError);
  EXPECT_THROW(s.get_bool("flag", false), ConfigError);
  EXPECT_THROW(s.get_int_list("list", {}), ConfigError);
  EXPECT_THROW(s.get_int("big", 0), ConfigError);
}

TEST(Settings, ErrorNamesOrigin) {
  try {
    Settings::parse("a = 1\nbroken\n", "run.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos);
  }
}

TEST(Settings, UnreadKeysAreRejected) {
  Settings s = Settings::parse("seed = 1\nnuqls.gama = 0.1\n", "x.cfg");
  s.get_u64("seed", 0);
  try {
    s.check_consumed();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("nuqls.gama"), std::string::npos);
    EXPECT_NE(what.find("x.cfg:2"), std::string::npos);
  }
}

TEST(Settings, OverridesReplaceFileValues) {
  Settings s = Settings::parse("nuqls.S = 10\n");
  s.set("nuqls.S", "40");
  EXPECT_EQ(s.get_int("nuqls.S", 1), 40);
}

TEST(Settings, RecordsDefaultsAndResolvedValues) {
  Settings s = Settings::parse("b = 2\n");
  s.get_int("a", 1);
  s.get_int("b", 5);
  s.get_int("a", 9);  // repeated lookups are recorded once
  ASSERT_EQ(s.defaults().size(), 2u);
  EXPECT_EQ(s.defaults()[0], (std::pair<std::string, std::string>{"a", "1"}));
  EXPECT_EQ(s.defaults()[1], (std::pair<std::string, std::string>{"b", "5"}));
  EXPECT_EQ(s.resolved()[1], (std::pair<std::string, std::string>{"b", "2"}));
  EXPECT_EQ(s.resolved_json().at("b"), "2");
}

TEST(Settings, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1e-10, 3.0, -2.5e7, 1.0 / 3.0}) {
    Settings s = Settings::parse("x = " + format_double(v) + "\n");
    EXPECT_EQ(s.get_double("x", 0.0), v);
  }
}

TEST(ExperimentConfig, OptimizerKeysReachTheConfig) {
  Settings s = Settings::parse(
      "nuqls.optimizer = sgd\nnuqls.lr = 0.3\nnuqls.momentum = 0.5\nnuqls.batch_size = 8\n"
      "nuqls.target_loss = 1e-6\nnuqls.epochs = 77\n");
  const OptimizerSpec fallback;
  const NuqlsConfig cfg = read_nuqls(s, "nuqls", NuqlsConfig{});
  EXPECT_EQ(cfg.opt.kind, OptimizerKind::kSgd);
  EXPECT_DOUBLE_EQ(cfg.opt.learning_rate, 0.3);
  EXPECT_DOUBLE_EQ(cfg.opt.momentum, 0.5);
  EXPECT_EQ(cfg.opt.batch_size, 8);
  EXPECT_DOUBLE_EQ(cfg.opt.target_loss, 1e-6);
  EXPECT_EQ(cfg.opt.epochs, 77);
  EXPECT_EQ(cfg.opt.nesterov, fallback.nesterov);
  EXPECT_NO_THROW(s.check_consumed());
}

TEST(ExperimentConfig, ConvergenceValidatesSweeps) {
  Settings ok = Settings::parse("nuqls.epochs = 50\nsweep.epochs = 10,50\n");
  const ConvergenceConfig cfg = read_convergence_config(ok);
  EXPECT_EQ(cfg.epoch_checkpoints, (std::vector<int>{10, 50}));

  Settings late = Settings::parse("nuqls.epochs = 50\nsweep.epochs = 10,100\n");
  EXPECT_THROW(read_convergence_config(late), ConfigError);
  Settings tiny = Settings::parse("sweep.sizes = 1,10\n");
  EXPECT_THROW(read_convergence_config(tiny), ConfigError);
  Settings empty = Settings::parse("sweep.sizes =\n");
  EXPECT_THROW(read_convergence_config(empty), ConfigError);
}

TEST(ExperimentConfig, EveryKindListsItsDefaults) {
  for (const char* name : {"convergence", "toy", "regression", "classification", "intervals", "tune"}) {
    const ExperimentKind kind = parse_experiment_kind(name);
    EXPECT_EQ(to_string(kind), name);
    EXPECT_FALSE(describe_defaults(kind).empty()) << name;
  }
  EXPECT_THROW(parse_experiment_kind("nope"), ConfigError);
}

}  // namespace
}  // namespace nuqls
