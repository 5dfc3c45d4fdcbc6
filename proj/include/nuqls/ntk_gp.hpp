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

#ifndef NUQLS_NTK_GP_HPP_
#define NUQLS_NTK_GP_HPP_

#include "nuqls/data.hpp"
#include "nuqls/net.hpp"
#include "nuqls/posterior.hpp"
#include "nuqls/types.hpp"

namespace nuqls {

inline constexpr Index kDefaultGramBudget = 25'000'000;  // (n*c)^2 entries

// Stacked Jacobian J_X, (n*c) x p. Throws std::length_error above the budget.
Matrix stacked_jacobian(const Mlp& net, const ParamVector& theta, const Matrix& X, Index budget);

// Numerical rank of J_X from a column-pivoted QR.
Index stacked_jacobian_rank(const Mlp& net, const ParamVector& theta, const Matrix& X, Index budget);

// Empirical NTK block J(theta, x) J(theta, y)^T (c x c).
Matrix ntk_block(const Mlp& net, const ParamVector& theta, const Vector& x, const Vector& y);

// Stacked cross kernel J(theta, XA) J(theta, XB)^T, (mA*c) x (mB*c). Uses
// explicit Jacobians when both fit the budget and vjp/jvp products otherwise.
Matrix cross_kernel(const Mlp& net, const ParamVector& theta, const Matrix& XA, const Matrix& XB,
                    Index jacobian_budget);

struct FactorizationOptions {
  double relative_jitter = 1e-10;  // first retry uses this times trace(K)/nc
  double growth = 10.0;
  int max_retries = 6;
};

// Cholesky-factorized Gram matrix. The first attempt uses no jitter; a
// failed (or numerically singular) factorization is retried with growing
// diagonal jitter. The condition estimate is lambda_max / lambda_min of the
// jittered matrix from power and inverse-power iterations.
class NtkGram {
 public:
  static NtkGram factorize(Matrix K, const FactorizationOptions& options = {});

  const Matrix& K() const { return K_; }
  Index size() const { return K_.rows(); }
  double jitter() const { return jitter_; }
  double condition_estimate() const { return condition_; }

  // (K + jitter I)^{-1} B
  Matrix solve(const Matrix& B) const;
  // L^{-1} B with L L^T = K + jitter I
  Matrix half_solve(const Matrix& B) const;

 private:
  NtkGram() = default;
  Matrix K_;
  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
  double condition_ = 0.0;
};

NtkGram gram(const Mlp& net, const ParamVector& theta, const Matrix& X, Index jacobian_budget = 25'000'000,
             Index gram_budget = kDefaultGramBudget, const FactorizationOptions& options = {});

// mu(x) = f(x) + k_{x,X} K^{-1} (y - f(X)), sigma^2(x) = (kappa(x,x) - k_{x,X} K^{-1} k_{X,x}) gamma^2.
// Works for any c; variance holds the diagonal of each c x c block.
// Pass `precomputed` to reuse a Gram matrix of `train.X`.
PosteriorSummary gp_posterior_regression(const Mlp& net, const ParamVector& theta_hat, const Dataset& train,
                                         const Matrix& X_test, double gamma, const NtkGram* precomputed = nullptr,
                                         Index jacobian_budget = 25'000'000);

// mu(x) = f(x) and full c x c blocks (K_xx - K_xX K^{-1} K_Xx) gamma^2,
// clamped to the PSD cone.
PosteriorSummary gp_posterior_general(const Mlp& net, const ParamVector& theta_hat, const Matrix& X_train,
                                      const Matrix& X_test, double gamma, const NtkGram* precomputed = nullptr,
                                      Index jacobian_budget = 25'000'000);

// ||a - b||_2.
double sev(const Vector& a, const Vector& b);

// Norm of the component of (theta_star - theta_init) in null(J_X), computed by
// projecting onto range(J_X^T) with a QR factorization.
double nullspace_residual(const Mlp& net, const ParamVector& theta_hat, const Matrix& X, const ParamVector& theta_star,
                          const ParamVector& theta_init, Index jacobian_budget = 25'000'000);

}  // namespace nuqls

#endif  // NUQLS_NTK_GP_HPP_
