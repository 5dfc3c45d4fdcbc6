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

#ifndef NUQLS_NET_HPP_
#define NUQLS_NET_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nuqls/types.hpp"

namespace nuqls {

enum class Activation { kTanh, kSilu, kRelu, kIdentity };
enum class Scaling { kStandard, kNtk };
enum class InitScheme { kXavierNormal, kStandardNormal };

std::string to_string(Activation a);
std::string to_string(Scaling s);
std::string to_string(InitScheme s);
Activation parse_activation(std::string_view name);
Scaling parse_scaling(std::string_view name);
InitScheme parse_init_scheme(std::string_view name);

// Fully connected network R^d -> R^c. With Scaling::kNtk every layer's
// pre-activation (including its bias) is multiplied by 1/sqrt(fan_in).
struct MlpSpec {
  Index input_dim = 1;
  Index output_dim = 1;
  std::vector<Index> hidden_widths;
  Activation activation = Activation::kTanh;
  Scaling scaling = Scaling::kStandard;
  bool bias = true;

  void validate() const;
  Index param_count() const;

  bool operator==(const MlpSpec&) const = default;
};

struct LayerLayout {
  Index fan_in = 0;
  Index fan_out = 0;
  Index weight_offset = 0;
  Index bias_offset = -1;  // -1 when the layer has no bias
  double scale = 1.0;
};

// Draws weights layer by layer in flattening order. kXavierNormal samples
// weights from N(0, 2/(fan_in+fan_out)) and biases from N(0,1);
// kStandardNormal samples everything from N(0,1).
ParamVector init_params(const MlpSpec& spec, InitScheme scheme, std::uint64_t seed);

// Stateless evaluator for an MlpSpec. All methods are pure functions of
// (theta, inputs) and may be called concurrently.
//
// Batched methods take inputs as rows of X (m x d). Outputs and cotangents
// for a batch are stacked point-major: row i*c + k holds output k of point i.
class Mlp {
 public:
  explicit Mlp(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  Index num_params() const { return num_params_; }
  Index input_dim() const { return spec_.input_dim; }
  Index output_dim() const { return spec_.output_dim; }
  const std::vector<LayerLayout>& layers() const { return layers_; }

  Vector forward(const ParamVector& theta, const Vector& x) const;
  // m x c.
  Matrix forward_batch(const ParamVector& theta, const Matrix& X) const;

  // c x p; row k is the gradient of output k.
  Matrix jacobian(const ParamVector& theta, const Vector& x) const;
  // (m*c) x p.
  Matrix jacobian_batch(const ParamVector& theta, const Matrix& X) const;

  Vector jvp(const ParamVector& theta, const Vector& x, const Vector& v) const;
  Vector vjp(const ParamVector& theta, const Vector& x, const Vector& u) const;

  // V is p x B (one tangent per column); returns (m*c) x B.
  Matrix jvp_batch(const ParamVector& theta, const Matrix& X, const Matrix& V) const;
  // U is (m*c) x B; returns p x B holding sum_i J(x_i)^T u_i per column.
  Matrix vjp_batch(const ParamVector& theta, const Matrix& X, const Matrix& U) const;

  // One forward and one reverse pass: evaluates the outputs (m x c), asks
  // `cotangent` for d loss / d outputs (m x c) and returns the parameter
  // gradient. Used by training loops to avoid a second forward pass.
  template <typename CotangentFn>
  ParamVector value_and_vjp(const ParamVector& theta, const Matrix& X, CotangentFn&& cotangent) const {
    Tape tape = run_forward(theta, X);
    const Matrix adj = cotangent(static_cast<const Matrix&>(tape.pre.back()));
    ParamVector grad(num_params_);
    backprop(theta, tape, adj, grad.data());
    return grad;
  }

 private:
  // Pre-activations pre[l] (m x fan_out) and layer inputs inputs[l] (m x fan_in).
  struct Tape {
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre;
  };

  void check_theta(const ParamVector& theta) const;
  void check_inputs(const Matrix& X) const;
  Tape run_forward(const ParamVector& theta, const Matrix& X) const;
  // adj is d/d(outputs), m x c; writes p entries to grad.
  void backprop(const ParamVector& theta, const Tape& tape, const Matrix& adj, double* grad) const;

  MlpSpec spec_;
  std::vector<LayerLayout> layers_;
  Index num_params_ = 0;
};

}  // namespace nuqls

#endif  // NUQLS_NET_HPP_
