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

#ifndef NUQLS_DEEP_ENSEMBLE_HPP_
#define NUQLS_DEEP_ENSEMBLE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "nuqls/data.hpp"
#include "nuqls/linearized.hpp"
#include "nuqls/net.hpp"
#include "nuqls/posterior.hpp"
#include "nuqls/train.hpp"

namespace nuqls {

struct DeConfig {
  int S = 5;
  OptimizerSpec opt;
  LossSpec loss{LossKind::kGaussianNllHetero, Reduction::kMean};
  std::uint64_t seed = 0;
  InitScheme init = InitScheme::kXavierNormal;
  int workers = 1;

  void validate() const;
};

// Regression members output (mean, raw variance) column pairs; the variance
// is softplus(raw) + 1e-6. Classification members output logits.
struct DeepEnsemble {
  MlpSpec spec;
  std::vector<ParamVector> members;
  Vector final_train_losses;
  std::vector<std::uint64_t> member_seeds;
  DeConfig config;

  int size() const { return static_cast<int>(members.size()); }
  bool is_classification() const { return config.loss.kind == LossKind::kCrossEntropy; }
};

// Independent trainings from distinct initializations. A diverging member
// raises NumericalError naming it.
DeepEnsemble de_train(const MlpSpec& spec, const Dataset& data, const DeConfig& cfg);

// Regression: mixture moments. mean = avg mu_s, variance = avg(s2_s + mu_s^2) - mean^2.
// Classification: averaged softmax, with the unbiased across-member variance
// of the softmax (zero when S = 1).
PosteriorSummary de_predict(const DeepEnsemble& ens, const Matrix& X);

// Member softmax outputs (classification) or member means (regression).
EnsemblePredictions de_member_outputs(const DeepEnsemble& ens, const Matrix& X);

void save_deep_ensemble(const std::string& path, const DeepEnsemble& ens);
DeepEnsemble load_deep_ensemble(const std::string& path);

}  // namespace nuqls

#endif  // NUQLS_DEEP_ENSEMBLE_HPP_
