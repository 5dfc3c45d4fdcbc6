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

#ifndef NUQLS_SERIALIZE_HPP_
#define NUQLS_SERIALIZE_HPP_

#include <json.hpp>

#include <string>
#include <vector>

#include "nuqls/net.hpp"
#include "nuqls/train.hpp"
#include "nuqls/types.hpp"

namespace nuqls {

using Json = nlohmann::json;

Json to_json(const MlpSpec& spec);
MlpSpec mlp_spec_from_json(const Json& j);
Json to_json(const LossSpec& loss);
LossSpec loss_spec_from_json(const Json& j);
Json to_json(const OptimizerSpec& opt);
OptimizerSpec optimizer_spec_from_json(const Json& j);

Json to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace nuqls

#endif  // NUQLS_SERIALIZE_HPP_
