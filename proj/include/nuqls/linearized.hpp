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

#ifndef NUQLS_LINEARIZED_HPP_
#define NUQLS_LINEARIZED_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "nuqls/data.hpp"
#include "nuqls/net.hpp"
#include "nuqls/posterior.hpp"
#include "nuqls/train.hpp"
#include "nuqls/types.hpp"

namespace nuqls {

// Default cap on cached Jacobian entries (n * c * p doubles, ~200 MB).
inline constexpr Index kDefaultJacobianBudget = 25'000'000;

// Reference evaluations of the network at a fixed input batch. The stacked
// Jacobian is only present when it fits the budget it was built with.
struct LinearizedCache {
  Matrix X;
  Vector reference_out;  // f(theta_hat, X) stacked point-major, length m*c
  Matrix jacobian;       // (m*c) x p, or empty

  Index size() const { return X.rows(); }
  bool has_jacobian() const { return jacobian.size() > 0; }
};

// f~(theta, x) = f(theta_hat, x) + J(theta_hat, x) (theta - theta_hat).
class LinearizedModel {
 public:
  LinearizedModel(MlpSpec spec, ParamVector reference);

  const Mlp& net() const { return net_; }
  const MlpSpec& spec() const { return net_.spec(); }
  const ParamVector& reference() const { return reference_; }
  Index num_params() const { return net_.num_params(); }
  Index output_dim() const { return net_.output_dim(); }

  // One forward pass plus one jvp.
  Vector forward(const ParamVector& theta, const Vector& x) const;

  LinearizedCache cache(const Matrix& X, Index jacobian_budget = kDefaultJacobianBudget) const;
  // Stacked outputs (m*c) x B for B parameter columns.
  Matrix forward_block(const LinearizedCache& cache, const Matrix& params) const;

 private:
  Mlp net_;
  ParamVector reference_;
};

// Training objective of the linearized network on a dataset.
class LinearizedObjective final : public Objective {
 public:
  LinearizedObjective(const LinearizedModel& model, const Dataset& data, LossSpec loss,
                      Index jacobian_budget = kDefaultJacobianBudget);
  Index num_params() const override { return model_.num_params(); }
  Index num_rows() const override { return data_.size(); }
  Reduction reduction() const override { return loss_.reduction; }
  Vector evaluate(std::span<const Index> rows, const Matrix& params, Matrix* grad) const override;
  const LinearizedCache& cache() const { return cache_; }

 private:
  const LinearizedModel& model_;
  const Dataset& data_;
  LossSpec loss_;
  LinearizedCache cache_;
};

// kParameter runs the trainer on parameter vectors. kRange keeps
// theta = theta_0 + J^T a and updates the (n*c)-dimensional coefficients a:
// every (S)GD step of a linearized network moves along J^T u, so both give
// the same iterates up to rounding. kRange supports gd and sgd (with or
// without momentum) without weight decay and needs the training Jacobian.
enum class TrainingSpace { kParameter, kRange };

std::string to_string(TrainingSpace s);
TrainingSpace parse_training_space(std::string_view name);

struct NuqlsConfig {
  int S = 10;
  double gamma = 1.0;  // std of the initial perturbation z_0 ~ N(0, gamma^2 I)
  OptimizerSpec opt;
  LossSpec loss;
  std::uint64_t seed = 0;
  Index jacobian_budget = kDefaultJacobianBudget;
  // Members are trained in fixed blocks of this many columns. Results depend
  // on the block size but never on the worker count.
  Index member_block = 32;
  int workers = 1;
  TrainingSpace space = TrainingSpace::kParameter;
  // Epochs at which the member checkpoint fires; empty means every epoch.
  std::vector<int> checkpoint_epochs;

  void validate() const;
};

struct NuqlsEnsemble {
  std::vector<ParamVector> members;
  Vector final_train_losses;
  std::vector<int> epochs_run;
  std::vector<std::uint64_t> member_seeds;
  NuqlsConfig config;

  int size() const { return static_cast<int>(members.size()); }
};

// theta_hat + z_0 for member s, reproducible from the config seed.
ParamVector member_initialization(const LinearizedModel& model, const NuqlsConfig& cfg, int member);

// Receives (completed epochs, index of the block's first member, p x B
// parameters, per-member epoch loss). With workers > 1 it is invoked
// concurrently from different blocks.
using MemberCheckpoint = std::function<void(int, Index, const Matrix&, const Vector&)>;

// Trains S linearized networks from Gaussian perturbations of theta_hat.
// A diverging member raises NumericalError naming the member.
NuqlsEnsemble nuqls_sample(const LinearizedModel& model, const Dataset& data, const NuqlsConfig& cfg,
                           const MemberCheckpoint& on_epoch = {});

// members[s] is the m x c block f~(theta*_s, X*).
struct EnsemblePredictions {
  std::vector<Matrix> members;

  int size() const { return static_cast<int>(members.size()); }
  Index points() const { return members.empty() ? 0 : members.front().rows(); }
};

EnsemblePredictions ensemble_predict(const LinearizedModel& model, const NuqlsEnsemble& ens, const Matrix& X,
                                     Index jacobian_budget = kDefaultJacobianBudget);
EnsemblePredictions ensemble_predict(const LinearizedModel& model, const std::vector<ParamVector>& members,
                                     const Matrix& X, Index jacobian_budget = kDefaultJacobianBudget);

enum class StatsMode { kRegression, kSoftmax };

// Sample mean and unbiased (S-1) variance across members. In regression mode
// the variance is rescaled by (gamma_scale / gamma_base)^2 and, for c > 1,
// per-point covariance blocks are filled. In softmax mode members are mapped
// through a softmax first and no rescaling happens. Requires S >= 2.
PosteriorSummary ensemble_stats(const EnsemblePredictions& preds, double gamma_scale, StatsMode mode,
                                double gamma_base = 1.0);

// Versioned JSON container with the network, theta_hat, members and config.
void save_ensemble(const std::string& path, const LinearizedModel& model, const NuqlsEnsemble& ens);

struct LoadedEnsemble {
  LinearizedModel model;
  NuqlsEnsemble ensemble;
};
LoadedEnsemble load_ensemble(const std::string& path);

}  // namespace nuqls

#endif  // NUQLS_LINEARIZED_HPP_
