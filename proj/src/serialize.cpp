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

#include "nuqls/serialize.hpp"

#include <fstream>

namespace nuqls {

Json to_json(const MlpSpec& spec) {
  return {{"input_dim", spec.input_dim},
          {"output_dim", spec.output_dim},
          {"hidden_widths", spec.hidden_widths},
          {"activation", to_string(spec.activation)},
          {"scaling", to_string(spec.scaling)},
          {"bias", spec.bias}};
}

MlpSpec mlp_spec_from_json(const Json& j) {
  MlpSpec spec;
  spec.input_dim = j.at("input_dim").get<Index>();
  spec.output_dim = j.at("output_dim").get<Index>();
  spec.hidden_widths = j.at("hidden_widths").get<std::vector<Index>>();
  spec.activation = parse_activation(j.at("activation").get<std::string>());
  spec.scaling = parse_scaling(j.at("scaling").get<std::string>());
  spec.bias = j.at("bias").get<bool>();
  spec.validate();
  return spec;
}

Json to_json(const LossSpec& loss) {
  return {{"kind", to_string(loss.kind)}, {"reduction", loss.reduction == Reduction::kSum ? "sum" : "mean"}};
}

LossSpec loss_spec_from_json(const Json& j) {
  LossSpec loss;
  loss.kind = parse_loss_kind(j.at("kind").get<std::string>());
  loss.reduction = j.at("reduction").get<std::string>() == "sum" ? Reduction::kSum : Reduction::kMean;
  return loss;
}

Json to_json(const OptimizerSpec& opt) {
  return {{"kind", to_string(opt.kind)},
          {"learning_rate", opt.learning_rate},
          {"momentum", opt.momentum},
          {"nesterov", opt.nesterov},
          {"weight_decay", opt.weight_decay},
          {"batch_size", opt.batch_size},
          {"epochs", opt.epochs},
          {"scheduler",
           {{"kind", to_string(opt.scheduler.kind)},
            {"power", opt.scheduler.power},
            {"total_iters", opt.scheduler.total_iters}}},
          {"seed", opt.seed},
          {"beta1", opt.beta1},
          {"beta2", opt.beta2},
          {"adam_epsilon", opt.adam_epsilon},
          {"early_stopping", opt.early_stopping},
          {"plateau_window", opt.plateau_window},
          {"plateau_tolerance", opt.plateau_tolerance},
          {"target_loss", opt.target_loss}};
}

OptimizerSpec optimizer_spec_from_json(const Json& j) {
  OptimizerSpec opt;
  opt.kind = parse_optimizer_kind(j.at("kind").get<std::string>());
  opt.learning_rate = j.at("learning_rate").get<double>();
  opt.momentum = j.at("momentum").get<double>();
  opt.nesterov = j.at("nesterov").get<bool>();
  opt.weight_decay = j.at("weight_decay").get<double>();
  opt.batch_size = j.at("batch_size").get<Index>();
  opt.epochs = j.at("epochs").get<int>();
  const Json& sched = j.at("scheduler");
  opt.scheduler.kind = parse_scheduler_kind(sched.at("kind").get<std::string>());
  opt.scheduler.power = sched.at("power").get<double>();
  opt.scheduler.total_iters = sched.at("total_iters").get<int>();
  opt.seed = j.at("seed").get<std::uint64_t>();
  opt.beta1 = j.at("beta1").get<double>();
  opt.beta2 = j.at("beta2").get<double>();
  opt.adam_epsilon = j.at("adam_epsilon").get<double>();
  opt.early_stopping = j.at("early_stopping").get<bool>();
  opt.plateau_window = j.at("plateau_window").get<int>();
  opt.plateau_tolerance = j.at("plateau_tolerance").get<double>();
  opt.target_loss = j.at("target_loss").get<double>();
  return opt;
}

Json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const Json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw IoError("malformed JSON in '" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace nuqls
