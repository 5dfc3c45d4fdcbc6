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

#ifndef NUQLS_TESTS_TEST_UTIL_HPP_
#define NUQLS_TESTS_TEST_UTIL_HPP_

#include <cstdint>
#include <random>

#include "nuqls/net.hpp"
#include "nuqls/types.hpp"

namespace nuqls::testing {

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Matrix M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = scale * n01(rng);
  return M;
}

inline Vector random_vector(Index n, std::uint64_t seed, double scale = 1.0) {
  return random_matrix(n, 1, seed, scale).col(0);
}

inline MlpSpec make_spec(Index d, Index c, std::vector<Index> hidden, Activation act = Activation::kTanh,
                         Scaling scaling = Scaling::kStandard, bool bias = true) {
  MlpSpec s;
  s.input_dim = d;
  s.output_dim = c;
  s.hidden_widths = std::move(hidden);
  s.activation = act;
  s.scaling = scaling;
  s.bias = bias;
  return s;
}

// Central finite-difference Jacobian of the network output, c x p.
inline Matrix fd_jacobian(const Mlp& net, const ParamVector& theta, const Vector& x, double h = 1e-5) {
  Matrix J(net.output_dim(), net.num_params());
  ParamVector t = theta;
  for (Index k = 0; k < theta.size(); ++k) {
    t(k) = theta(k) + h;
    const Vector up = net.forward(t, x);
    t(k) = theta(k) - h;
    const Vector down = net.forward(t, x);
    t(k) = theta(k);
    J.col(k) = (up - down) / (2.0 * h);
  }
  return J;
}

}  // namespace nuqls::testing

#endif  // NUQLS_TESTS_TEST_UTIL_HPP_
