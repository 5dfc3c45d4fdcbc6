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

#include "nuqls/net.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "nuqls/random.hpp"

namespace nuqls {
namespace {

using ConstWeights = Eigen::Map<const RowMajorMatrix>;
using Weights = Eigen::Map<RowMajorMatrix>;

// Vectorized tanh: exp form away from zero, odd Taylor series near it where
// the exp form loses relative accuracy. Matches std::tanh to ~1e-14 relative.
Eigen::ArrayXXd fast_tanh(const Matrix& z) {
  Eigen::ArrayXXd t = (2.0 * z.array().max(-20.0).min(20.0)).exp();
  const double* zp = z.data();
  double* tp = t.data();
  for (Index i = 0; i < t.size(); ++i) {
    const double x = zp[i];
    const double x2 = x * x;
    const double series = x * (1.0 + x2 * (-1.0 / 3.0 + x2 * (2.0 / 15.0 - x2 * (17.0 / 315.0))));
    const double exp_form = (tp[i] - 1.0) / (tp[i] + 1.0);
    tp[i] = std::abs(x) < 1e-2 ? series : exp_form;
  }
  return t;
}

Eigen::ArrayXXd sigmoid(const Matrix& z) { return 1.0 / (1.0 + (-z.array()).exp()); }

Matrix apply(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::kTanh:
      return fast_tanh(z).matrix();
    case Activation::kSilu:
      return (z.array() * sigmoid(z)).matrix();
    case Activation::kRelu:
      return z.cwiseMax(0.0);
    case Activation::kIdentity:
      return z;
  }
  return z;
}

Matrix apply_derivative(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::kTanh:
      return (1.0 - fast_tanh(z).square()).matrix();
    case Activation::kSilu: {
      const Eigen::ArrayXXd s = sigmoid(z);
      return (s * (1.0 + z.array() * (1.0 - s))).matrix();
    }
    case Activation::kRelu:
      return (z.array() > 0.0).cast<double>().matrix();
    case Activation::kIdentity:
      return Matrix::Ones(z.rows(), z.cols());
  }
  return Matrix::Ones(z.rows(), z.cols());
}

std::string dims(Index r, Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kSilu:
      return "silu";
    case Activation::kRelu:
      return "relu";
    case Activation::kIdentity:
      return "identity";
  }
  return "unknown";
}

std::string to_string(Scaling s) { return s == Scaling::kNtk ? "ntk" : "standard"; }

std::string to_string(InitScheme s) {
  return s == InitScheme::kXavierNormal ? "xavier_normal" : "standard_normal";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "silu") return Activation::kSilu;
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

Scaling parse_scaling(std::string_view name) {
  if (name == "standard") return Scaling::kStandard;
  if (name == "ntk") return Scaling::kNtk;
  throw std::invalid_argument("unknown scaling '" + std::string(name) + "'");
}

InitScheme parse_init_scheme(std::string_view name) {
  if (name == "xavier_normal") return InitScheme::kXavierNormal;
  if (name == "standard_normal") return InitScheme::kStandardNormal;
  throw std::invalid_argument("unknown init scheme '" + std::string(name) + "'");
}

void MlpSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("MlpSpec: input_dim must be positive");
  if (output_dim < 1) throw std::invalid_argument("MlpSpec: output_dim must be positive");
  for (Index w : hidden_widths)
    if (w < 1) throw std::invalid_argument("MlpSpec: hidden widths must be positive");
}

Index MlpSpec::param_count() const {
  Index count = 0;
  Index fan_in = input_dim;
  for (std::size_t l = 0; l <= hidden_widths.size(); ++l) {
    const Index fan_out = l < hidden_widths.size() ? hidden_widths[l] : output_dim;
    count += fan_in * fan_out + (bias ? fan_out : 0);
    fan_in = fan_out;
  }
  return count;
}

ParamVector init_params(const MlpSpec& spec, InitScheme scheme, std::uint64_t seed) {
  Mlp net(spec);
  Rng rng = make_rng(seed, Stream::kInit);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector theta(net.num_params());
  for (const LayerLayout& layer : net.layers()) {
    const double w_std = scheme == InitScheme::kXavierNormal
                             ? std::sqrt(2.0 / static_cast<double>(layer.fan_in + layer.fan_out))
                             : 1.0;
    for (Index k = 0; k < layer.fan_in * layer.fan_out; ++k)
      theta[layer.weight_offset + k] = w_std * normal(rng);
    if (layer.bias_offset >= 0)
      for (Index k = 0; k < layer.fan_out; ++k) theta[layer.bias_offset + k] = normal(rng);
  }
  return theta;
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  Index fan_in = spec_.input_dim;
  Index offset = 0;
  const std::size_t hidden = spec_.hidden_widths.size();
  for (std::size_t l = 0; l <= hidden; ++l) {
    LayerLayout layer;
    layer.fan_in = fan_in;
    layer.fan_out = l < hidden ? spec_.hidden_widths[l] : spec_.output_dim;
    layer.weight_offset = offset;
    offset += layer.fan_in * layer.fan_out;
    if (spec_.bias) {
      layer.bias_offset = offset;
      offset += layer.fan_out;
    }
    layer.scale = spec_.scaling == Scaling::kNtk ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 1.0;
    layers_.push_back(layer);
    fan_in = layer.fan_out;
  }
  num_params_ = offset;
}

void Mlp::check_theta(const ParamVector& theta) const {
  if (theta.size() != num_params_)
    throw std::invalid_argument("parameter vector has length " + std::to_string(theta.size()) +
                                ", network expects " + std::to_string(num_params_));
}

void Mlp::check_inputs(const Matrix& X) const {
  if (X.cols() != spec_.input_dim)
    throw std::invalid_argument("input batch is " + dims(X.rows(), X.cols()) + ", network expects " +
                                std::to_string(spec_.input_dim) + " columns");
}

Mlp::Tape Mlp::run_forward(const ParamVector& theta, const Matrix& X) const {
  check_theta(theta);
  check_inputs(X);
  Tape tape;
  tape.inputs.reserve(layers_.size());
  tape.pre.reserve(layers_.size());
  Matrix h = X;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerLayout& layer = layers_[l];
    ConstWeights w(theta.data() + layer.weight_offset, layer.fan_out, layer.fan_in);
    Matrix z = h * w.transpose();
    if (layer.bias_offset >= 0)
      z.rowwise() += theta.segment(layer.bias_offset, layer.fan_out).transpose();
    if (layer.scale != 1.0) z *= layer.scale;
    tape.inputs.push_back(std::move(h));
    h = l + 1 < layers_.size() ? apply(spec_.activation, z) : z;
    tape.pre.push_back(std::move(z));
  }
  return tape;
}

Matrix Mlp::forward_batch(const ParamVector& theta, const Matrix& X) const {
  Tape tape = run_forward(theta, X);
  return std::move(tape.pre.back());
}

Vector Mlp::forward(const ParamVector& theta, const Vector& x) const {
  if (x.size() != spec_.input_dim)
    throw std::invalid_argument("input has dimension " + std::to_string(x.size()) + ", network expects " +
                                std::to_string(spec_.input_dim));
  return forward_batch(theta, x.transpose()).row(0).transpose();
}

Matrix Mlp::jacobian_batch(const ParamVector& theta, const Matrix& X) const {
  const Tape tape = run_forward(theta, X);
  const Index m = X.rows();
  const Index c = spec_.output_dim;
  RowMajorMatrix jac = RowMajorMatrix::Zero(m * c, num_params_);
  std::vector<Matrix> derivs(layers_.size());
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) derivs[l] = apply_derivative(spec_.activation, tape.pre[l]);

  for (Index i = 0; i < m; ++i) {
    // delta holds d output_k / d z_l for every output k (c x fan_out).
    Matrix delta = Matrix::Identity(c, c);
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const LayerLayout& layer = layers_[l];
      const auto h_in = tape.inputs[l].row(i);
      for (Index k = 0; k < c; ++k) {
        double* row = jac.row(i * c + k).data();
        Weights dw(row + layer.weight_offset, layer.fan_out, layer.fan_in);
        dw.noalias() = layer.scale * delta.row(k).transpose() * h_in;
        if (layer.bias_offset >= 0)
          Eigen::Map<Eigen::RowVectorXd>(row + layer.bias_offset, layer.fan_out) = layer.scale * delta.row(k);
      }
      if (l == 0) break;
      ConstWeights w(theta.data() + layer.weight_offset, layer.fan_out, layer.fan_in);
      Matrix prev = layer.scale * delta * w;
      prev.array().rowwise() *= derivs[l - 1].row(i).array();
      delta = std::move(prev);
    }
  }
  return Matrix(jac);
}

Matrix Mlp::jacobian(const ParamVector& theta, const Vector& x) const {
  if (x.size() != spec_.input_dim)
    throw std::invalid_argument("input has dimension " + std::to_string(x.size()) + ", network expects " +
                                std::to_string(spec_.input_dim));
  return jacobian_batch(theta, x.transpose());
}

Matrix Mlp::jvp_batch(const ParamVector& theta, const Matrix& X, const Matrix& V) const {
  if (V.rows() != num_params_)
    throw std::invalid_argument("tangent block is " + dims(V.rows(), V.cols()) + ", expected " +
                                std::to_string(num_params_) + " rows");
  const Tape tape = run_forward(theta, X);
  const Index m = X.rows();
  const Index c = spec_.output_dim;
  std::vector<Matrix> derivs(layers_.size());
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) derivs[l] = apply_derivative(spec_.activation, tape.pre[l]);

  Matrix out(m * c, V.cols());
  for (Index b = 0; b < V.cols(); ++b) {
    const double* v = V.col(b).data();
    Matrix h_dot;  // tangent of the layer input; zero for the first layer
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const LayerLayout& layer = layers_[l];
      ConstWeights w_dot(v + layer.weight_offset, layer.fan_out, layer.fan_in);
      Matrix z_dot = tape.inputs[l] * w_dot.transpose();
      if (l > 0) {
        ConstWeights w(theta.data() + layer.weight_offset, layer.fan_out, layer.fan_in);
        z_dot.noalias() += h_dot * w.transpose();
      }
      if (layer.bias_offset >= 0)
        z_dot.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(v + layer.bias_offset, layer.fan_out);
      if (layer.scale != 1.0) z_dot *= layer.scale;
      if (l + 1 < layers_.size()) {
        h_dot = derivs[l].cwiseProduct(z_dot);
      } else {
        Eigen::Map<RowMajorMatrix>(out.col(b).data(), m, c) = z_dot;
      }
    }
  }
  return out;
}

Matrix Mlp::vjp_batch(const ParamVector& theta, const Matrix& X, const Matrix& U) const {
  const Index m = X.rows();
  const Index c = spec_.output_dim;
  if (U.rows() != m * c)
    throw std::invalid_argument("cotangent block is " + dims(U.rows(), U.cols()) + ", expected " +
                                std::to_string(m * c) + " rows");
  const Tape tape = run_forward(theta, X);
  Matrix out(num_params_, U.cols());
  for (Index b = 0; b < U.cols(); ++b) {
    const Matrix adj = Eigen::Map<const RowMajorMatrix>(U.col(b).data(), m, c);
    backprop(theta, tape, adj, out.col(b).data());
  }
  return out;
}

void Mlp::backprop(const ParamVector& theta, const Tape& tape, const Matrix& output_adj, double* g) const {
  Matrix adj = output_adj;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const LayerLayout& layer = layers_[l];
    Weights dw(g + layer.weight_offset, layer.fan_out, layer.fan_in);
    dw.noalias() = layer.scale * adj.transpose() * tape.inputs[l];
    if (layer.bias_offset >= 0)
      Eigen::Map<Eigen::RowVectorXd>(g + layer.bias_offset, layer.fan_out) = layer.scale * adj.colwise().sum();
    if (l == 0) break;
    ConstWeights w(theta.data() + layer.weight_offset, layer.fan_out, layer.fan_in);
    Matrix prev = layer.scale * adj * w;
    adj = prev.cwiseProduct(apply_derivative(spec_.activation, tape.pre[l - 1]));
  }
}

Vector Mlp::jvp(const ParamVector& theta, const Vector& x, const Vector& v) const {
  if (x.size() != spec_.input_dim)
    throw std::invalid_argument("input has dimension " + std::to_string(x.size()) + ", network expects " +
                                std::to_string(spec_.input_dim));
  return jvp_batch(theta, x.transpose(), v).col(0);
}

Vector Mlp::vjp(const ParamVector& theta, const Vector& x, const Vector& u) const {
  if (x.size() != spec_.input_dim)
    throw std::invalid_argument("input has dimension " + std::to_string(x.size()) + ", network expects " +
                                std::to_string(spec_.input_dim));
  return vjp_batch(theta, x.transpose(), u).col(0);
}

}  // namespace nuqls
