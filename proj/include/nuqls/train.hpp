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

#ifndef NUQLS_TRAIN_HPP_
#define NUQLS_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nuqls/data.hpp"
#include "nuqls/net.hpp"
#include "nuqls/types.hpp"

namespace nuqls {

enum class LossKind { kMse, kGaussianNllHetero, kCrossEntropy };
enum class Reduction { kSum, kMean };

std::string to_string(LossKind k);
LossKind parse_loss_kind(std::string_view name);

// mse:                 sum (f - y)^2
// gaussian_nll_hetero: network emits [mean_1..mean_t, raw_1..raw_t] with
//                      sigma^2 = softplus(raw) + 1e-6, loss
//                      1/2 sum [(f - y)^2 / sigma^2 + log sigma^2 + log 2 pi]
// cross_entropy:       -sum log softmax(f)_y
// Mean reduction divides by the number of scalar targets (mse, nll) or by the
// number of examples (cross entropy).
struct LossSpec {
  LossKind kind = LossKind::kMse;
  Reduction reduction = Reduction::kMean;
};

inline constexpr double kHeteroVarianceFloor = 1e-6;

// sigma^2 = softplus(raw) + 1e-6, elementwise.
Matrix hetero_variance(const Matrix& raw);

// Row-wise, numerically stable softmax of an m x c logit block.
Matrix softmax_rows(const Matrix& logits);

// prediction is m x out and target m x t (for the heteroskedastic head
// out = 2t). Fills *dpred with d loss / d prediction when non-null.
double loss_value(const LossSpec& loss, const Matrix& prediction, const Matrix& target, Matrix* dpred = nullptr);
double loss_value(const LossSpec& loss, const Matrix& logits, std::span<const int> labels, Matrix* dpred = nullptr);

// Loss of `prediction` against rows `rows` of `data` (prediction row i
// corresponds to data row rows[i]).
double loss_value(const LossSpec& loss, const Matrix& prediction, const Dataset& data, std::span<const Index> rows,
                  Matrix* dpred = nullptr);

// Explicit-variance Gaussian NLL, summed. Throws if any variance <= 0.
double gaussian_nll(const Matrix& mean, const Matrix& variance, const Matrix& target);

// Validates that a network output layout suits the loss and data.
void check_loss_shapes(const LossSpec& loss, const MlpSpec& spec, const Dataset& data);

enum class OptimizerKind { kGd, kSgd, kAdam };
enum class SchedulerKind { kNone, kCosine, kPolynomial };

std::string to_string(OptimizerKind k);
std::string to_string(SchedulerKind k);
OptimizerKind parse_optimizer_kind(std::string_view name);
SchedulerKind parse_scheduler_kind(std::string_view name);

struct SchedulerSpec {
  SchedulerKind kind = SchedulerKind::kNone;
  double power = 1.0;
  int total_iters = 0;  // polynomial horizon; 0 means the number of epochs
};

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double momentum = 0.0;
  bool nesterov = false;
  double weight_decay = 0.0;
  Index batch_size = 0;  // 0 or >= n means full batch; gd requires full batch
  int epochs = 100;
  SchedulerSpec scheduler;
  std::uint64_t seed = 0;  // data-order stream only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  // Stops a run (or a column of a block run) once the epoch loss improves by
  // less than plateau_tolerance relative over plateau_window epochs.
  bool early_stopping = false;
  int plateau_window = 50;
  double plateau_tolerance = 1e-10;
  // Stops once the epoch loss drops below this value (0 disables).
  double target_loss = 0.0;

  void validate() const;
};

// Learning rate used during epoch t (0-based). Cosine annealing decays to 0 at
// t = epochs; the polynomial schedule is lr * (1 - min(t, T) / T)^power.
double scheduled_learning_rate(const OptimizerSpec& opt, int epoch);

// A differentiable objective over the rows of a dataset, evaluated for a
// block of B parameter vectors held as the columns of a p x B matrix.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual Index num_params() const = 0;
  virtual Index num_rows() const = 0;
  virtual Reduction reduction() const = 0;
  // Per-column loss over `rows`, reduced as the objective's loss spec says.
  // When grad is non-null it receives d loss / d params (p x B).
  virtual Vector evaluate(std::span<const Index> rows, const Matrix& params, Matrix* grad) const = 0;
};

// Standard training objective of a network on a dataset.
class NetworkObjective final : public Objective {
 public:
  NetworkObjective(Mlp net, const Dataset& data, LossSpec loss);
  Index num_params() const override { return net_.num_params(); }
  Index num_rows() const override { return data_.size(); }
  Reduction reduction() const override { return loss_.reduction; }
  Vector evaluate(std::span<const Index> rows, const Matrix& params, Matrix* grad) const override;

 private:
  Mlp net_;
  const Dataset& data_;
  LossSpec loss_;
};

// Raised when a column's loss or gradient stops being finite.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(Index column, int epoch, const std::string& what)
      : NumericalError(what), column_(column), epoch_(epoch) {}
  Index column() const { return column_; }
  int epoch() const { return epoch_; }

 private:
  Index column_;
  int epoch_;
};

// Called after every completed epoch with the number of completed epochs,
// the current parameters and the loss each column recorded in that epoch.
using EpochCallback = std::function<void(int, const Matrix&, const Vector&)>;

struct BlockTrainResult {
  Matrix params;
  std::vector<std::vector<double>> loss_history;  // per column, one entry per epoch run
  Vector final_loss;                               // full-data loss after training
  std::vector<int> epochs_run;
};

// Trains every column independently; columns share the epoch data order.
// Throws NumericalError naming the column and epoch on a non-finite loss.
BlockTrainResult train_block(const Objective& objective, Matrix params, const OptimizerSpec& opt,
                             const EpochCallback& on_epoch = {});

struct TrainResult {
  ParamVector params;
  std::vector<double> loss_history;
  double final_loss = 0.0;
  int epochs_run = 0;
};

TrainResult train(const MlpSpec& spec, const ParamVector& theta0, const Dataset& data, const LossSpec& loss,
                  const OptimizerSpec& opt);

}  // namespace nuqls

#endif  // NUQLS_TRAIN_HPP_
