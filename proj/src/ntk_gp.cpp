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

#include "nuqls/ntk_gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "nuqls/log.hpp"

namespace nuqls {
namespace {

Vector stack_rows(const Matrix& M) {
  const RowMajorMatrix R = M;
  return Eigen::Map<const Vector>(R.data(), R.size());
}

Matrix unstack_rows(const Vector& v, Index m, Index c) {
  RowMajorMatrix R = Eigen::Map<const RowMajorMatrix>(v.data(), m, c);
  return Matrix(R);
}

void check_budget(Index entries, Index budget, const char* what) {
  if (budget > 0 && entries > budget) {
    std::ostringstream os;
    os << what << " needs " << entries << " entries, above the budget of " << budget;
    throw std::length_error(os.str());
  }
}

double power_lambda_max(const Matrix& A) {
  const Index n = A.rows();
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = 1.0 + 0.1 * std::sin(static_cast<double>(i + 1));
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    Vector w = A.selfadjointView<Eigen::Lower>() * v;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= 1e-12 * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

double inverse_lambda_min(const Eigen::LLT<Matrix>& llt, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = 1.0 + 0.1 * std::cos(static_cast<double>(i + 1));
  v.normalize();
  double mu = 0.0;
  for (int it = 0; it < 500; ++it) {
    Vector w = llt.solve(v);
    const double next = v.dot(w);
    const double norm = w.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) break;
    v = w / norm;
    if (it > 0 && std::abs(next - mu) <= 1e-10 * std::abs(next)) {
      mu = next;
      break;
    }
    mu = next;
  }
  return mu > 0.0 ? 1.0 / mu : 0.0;
}

// Schur complement blocks (kappa_ii - A_i^T A_i) * gamma^2 with A = L^{-1} K_{X,x}.
std::vector<Matrix> schur_blocks(const Mlp& net, const ParamVector& theta, const Matrix& X_test, const NtkGram& G,
                                 const Matrix& K_train_test, double gamma) {
  const Index m = X_test.rows();
  const Index c = net.output_dim();
  const Matrix A = G.half_solve(K_train_test);
  std::vector<Matrix> blocks(static_cast<std::size_t>(m));
  Index clamped = 0;
  double worst = 0.0;
  for (Index i = 0; i < m; ++i) {
    const Matrix Ji = net.jacobian(theta, X_test.row(i).transpose());
    const Matrix kappa = Ji * Ji.transpose();
    const auto Ai = A.middleCols(i * c, c);
    Matrix block = kappa - Ai.transpose() * Ai;
    block = 0.5 * (block + block.transpose()).eval();
    const double scale = std::max(kappa.diagonal().maxCoeff(), std::numeric_limits<double>::min());
    if (c == 1) {
      if (block(0, 0) < -1e-8 * scale) {
        ++clamped;
        worst = std::min(worst, block(0, 0) / scale);
      }
      block(0, 0) = std::max(block(0, 0), 0.0);
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(block);
      Vector ev = eig.eigenvalues();
      if (ev.minCoeff() < -1e-8 * scale) {
        ++clamped;
        worst = std::min(worst, ev.minCoeff() / scale);
      }
      ev = ev.cwiseMax(0.0);
      block = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
    }
    blocks[static_cast<std::size_t>(i)] = block * (gamma * gamma);
  }
  if (clamped > 0) {
    std::ostringstream os;
    os << "clamped " << clamped << " negative posterior variance(s); worst relative value " << worst;
    log_warning(os.str());
  }
  return blocks;
}

const NtkGram& resolve_gram(const Mlp& net, const ParamVector& theta, const Matrix& X, const NtkGram* precomputed,
                            Index jacobian_budget, std::optional<NtkGram>& storage) {
  if (precomputed != nullptr) {
    if (precomputed->size() != X.rows() * net.output_dim()) {
      throw std::invalid_argument("precomputed Gram matrix does not match the training inputs");
    }
    return *precomputed;
  }
  return storage.emplace(gram(net, theta, X, jacobian_budget));
}

}  // namespace

Matrix stacked_jacobian(const Mlp& net, const ParamVector& theta, const Matrix& X, Index budget) {
  check_budget(X.rows() * net.output_dim() * net.num_params(), budget, "stacked Jacobian");
  return net.jacobian_batch(theta, X);
}

Index stacked_jacobian_rank(const Mlp& net, const ParamVector& theta, const Matrix& X, Index budget) {
  const Matrix J = stacked_jacobian(net, theta, X, budget);
  if (J.rows() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(J);
  return qr.rank();
}

Matrix ntk_block(const Mlp& net, const ParamVector& theta, const Vector& x, const Vector& y) {
  const Matrix Jx = net.jacobian(theta, x);
  const Matrix Jy = net.jacobian(theta, y);
  return Jx * Jy.transpose();
}

Matrix cross_kernel(const Mlp& net, const ParamVector& theta, const Matrix& XA, const Matrix& XB,
                    Index jacobian_budget) {
  const Index c = net.output_dim();
  const Index p = net.num_params();
  const Index ra = XA.rows() * c;
  const Index rb = XB.rows() * c;
  const bool explicit_ok = jacobian_budget <= 0 || std::max(ra, rb) * p <= jacobian_budget;
  if (explicit_ok) {
    const Matrix JA = net.jacobian_batch(theta, XA);
    if (&XA == &XB) return JA * JA.transpose();
    const Matrix JB = net.jacobian_batch(theta, XB);
    return JA * JB.transpose();
  }
  // Columns of J_B^T in chunks, pushed through jvp against XA.
  const Index points_per_chunk = std::max<Index>(1, jacobian_budget / std::max<Index>(1, p * c));
  Matrix out(ra, rb);
  for (Index start = 0; start < XB.rows(); start += points_per_chunk) {
    const Index count = std::min(points_per_chunk, XB.rows() - start);
    Matrix G(p, count * c);
    for (Index j = 0; j < count; ++j) {
      G.middleCols(j * c, c) = net.jacobian(theta, XB.row(start + j).transpose()).transpose();
    }
    out.middleCols(start * c, count * c) = net.jvp_batch(theta, XA, G);
  }
  return out;
}

NtkGram NtkGram::factorize(Matrix K, const FactorizationOptions& options) {
  if (K.rows() != K.cols() || K.rows() == 0) throw std::invalid_argument("Gram matrix must be square and non-empty");
  if (!K.allFinite()) throw NumericalError("Gram matrix contains non-finite entries");
  const Index n = K.rows();
  NtkGram g;
  g.K_ = 0.5 * (K + K.transpose());
  const double mean_diag = g.K_.trace() / static_cast<double>(n);
  const double max_diag = g.K_.diagonal().maxCoeff();
  const double base = options.relative_jitter * (mean_diag > 0.0 ? mean_diag : 1.0);
  const double pivot_floor =
      static_cast<double>(n) * std::numeric_limits<double>::epsilon() * std::max(max_diag, 0.0);
  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    const double jitter = attempt == 0 ? 0.0 : base * std::pow(options.growth, attempt - 1);
    Matrix Kj = g.K_;
    Kj.diagonal().array() += jitter;
    g.llt_.compute(Kj);
    if (g.llt_.info() != Eigen::Success) continue;
    const Vector diag = g.llt_.matrixLLT().diagonal();
    if (!diag.allFinite()) continue;
    const double min_pivot = diag.minCoeff();
    if (!(min_pivot * min_pivot > pivot_floor)) continue;
    g.jitter_ = jitter;
    const double lmax = power_lambda_max(Kj);
    const double lmin = inverse_lambda_min(g.llt_, n);
    g.condition_ = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
    if (jitter > 0.0) {
      std::ostringstream os;
      os << "Gram factorization needed jitter " << jitter << " (relative " << jitter / (mean_diag > 0 ? mean_diag : 1)
         << ")";
      log_warning(os.str());
    }
    return g;
  }
  throw NumericalError("Gram matrix could not be factorized after " + std::to_string(options.max_retries) +
                       " jitter retries");
}

Matrix NtkGram::solve(const Matrix& B) const { return llt_.solve(B); }

Matrix NtkGram::half_solve(const Matrix& B) const { return llt_.matrixL().solve(B); }

NtkGram gram(const Mlp& net, const ParamVector& theta, const Matrix& X, Index jacobian_budget, Index gram_budget,
             const FactorizationOptions& options) {
  const Index nc = X.rows() * net.output_dim();
  check_budget(nc * nc, gram_budget, "Gram matrix");
  return NtkGram::factorize(cross_kernel(net, theta, X, X, jacobian_budget), options);
}

PosteriorSummary gp_posterior_regression(const Mlp& net, const ParamVector& theta_hat, const Dataset& train,
                                         const Matrix& X_test, double gamma, const NtkGram* precomputed,
                                         Index jacobian_budget) {
  const Index c = net.output_dim();
  if (train.Y.cols() != c || train.Y.rows() != train.X.rows()) {
    throw std::invalid_argument("regression targets must be n x output_dim");
  }
  std::optional<NtkGram> storage;
  const NtkGram& G = resolve_gram(net, theta_hat, train.X, precomputed, jacobian_budget, storage);
  const Vector residual = stack_rows(train.Y) - stack_rows(net.forward_batch(theta_hat, train.X));
  const Vector alpha = G.solve(residual);
  const Matrix Kxt = cross_kernel(net, theta_hat, train.X, X_test, jacobian_budget);
  const Index m = X_test.rows();
  const Vector mean = stack_rows(net.forward_batch(theta_hat, X_test)) + Kxt.transpose() * alpha;

  PosteriorSummary out;
  out.gamma = gamma;
  out.mean = unstack_rows(mean, m, c);
  out.variance.resize(m, c);
  const std::vector<Matrix> blocks = schur_blocks(net, theta_hat, X_test, G, Kxt, gamma);
  for (Index i = 0; i < m; ++i) out.variance.row(i) = blocks[static_cast<std::size_t>(i)].diagonal().transpose();
  if (c > 1) out.covariance = blocks;
  return out;
}

PosteriorSummary gp_posterior_general(const Mlp& net, const ParamVector& theta_hat, const Matrix& X_train,
                                      const Matrix& X_test, double gamma, const NtkGram* precomputed,
                                      Index jacobian_budget) {
  const Index c = net.output_dim();
  std::optional<NtkGram> storage;
  const NtkGram& G = resolve_gram(net, theta_hat, X_train, precomputed, jacobian_budget, storage);
  const Matrix Kxt = cross_kernel(net, theta_hat, X_train, X_test, jacobian_budget);
  const Index m = X_test.rows();

  PosteriorSummary out;
  out.gamma = gamma;
  out.mean = net.forward_batch(theta_hat, X_test);
  out.covariance = schur_blocks(net, theta_hat, X_test, G, Kxt, gamma);
  out.variance.resize(m, c);
  for (Index i = 0; i < m; ++i) {
    out.variance.row(i) = out.covariance[static_cast<std::size_t>(i)].diagonal().transpose();
  }
  return out;
}

double sev(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("sev: variance vectors differ in length");
  return (a - b).norm();
}

double nullspace_residual(const Mlp& net, const ParamVector& theta_hat, const Matrix& X, const ParamVector& theta_star,
                          const ParamVector& theta_init, Index jacobian_budget) {
  if (theta_star.size() != net.num_params() || theta_init.size() != net.num_params()) {
    throw std::invalid_argument("nullspace_residual: parameter length mismatch");
  }
  const Matrix Jt = stacked_jacobian(net, theta_hat, X, jacobian_budget).transpose();
  Eigen::ColPivHouseholderQR<Matrix> qr(Jt);
  const Index r = qr.rank();
  const Vector coeffs = qr.householderQ().transpose() * (theta_star - theta_init);
  return coeffs.tail(coeffs.size() - r).norm();
}

}  // namespace nuqls
