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

#include "nuqls/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "nuqls/random.hpp"

namespace nuqls {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool is_identity(std::span<const Index> rows, Index n) {
  if (static_cast<Index>(rows.size()) != n) return false;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i] != static_cast<Index>(i)) return false;
  return true;
}

Matrix gather_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::kMse:
      return "mse";
    case LossKind::kGaussianNllHetero:
      return "gaussian_nll_hetero";
    case LossKind::kCrossEntropy:
      return "cross_entropy";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "mse") return LossKind::kMse;
  if (name == "gaussian_nll_hetero") return LossKind::kGaussianNllHetero;
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kGd:
      return "gd";
    case OptimizerKind::kSgd:
      return "sgd";
    case OptimizerKind::kAdam:
      return "adam";
  }
  return "unknown";
}

std::string to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::kNone:
      return "none";
    case SchedulerKind::kCosine:
      return "cosine";
    case SchedulerKind::kPolynomial:
      return "polynomial";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "gd") return OptimizerKind::kGd;
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

SchedulerKind parse_scheduler_kind(std::string_view name) {
  if (name == "none") return SchedulerKind::kNone;
  if (name == "cosine") return SchedulerKind::kCosine;
  if (name == "polynomial") return SchedulerKind::kPolynomial;
  throw std::invalid_argument("unknown scheduler '" + std::string(name) + "'");
}

Matrix hetero_variance(const Matrix& raw) {
  return raw.unaryExpr([](double r) { return softplus(r) + kHeteroVarianceFloor; });
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

double loss_value(const LossSpec& loss, const Matrix& prediction, const Matrix& target, Matrix* dpred) {
  const Index m = prediction.rows();
  if (target.rows() != m) throw std::invalid_argument("prediction and target row counts differ");
  const Index t = target.cols();
  double value = 0.0;
  switch (loss.kind) {
    case LossKind::kMse: {
      if (prediction.cols() != t) throw std::invalid_argument("mse: prediction and target widths differ");
      const Matrix r = prediction - target;
      value = r.squaredNorm();
      if (dpred) *dpred = 2.0 * r;
      break;
    }
    case LossKind::kGaussianNllHetero: {
      if (prediction.cols() != 2 * t)
        throw std::invalid_argument("gaussian_nll_hetero: network must output 2x the target width");
      const auto mean = prediction.leftCols(t);
      const auto raw = prediction.rightCols(t);
      const Matrix var = hetero_variance(raw);
      const Matrix r = mean - target;
      value = 0.5 * ((r.array().square() / var.array()) + var.array().log() + kLog2Pi).sum();
      if (dpred) {
        dpred->resize(m, 2 * t);
        dpred->leftCols(t) = (r.array() / var.array()).matrix();
        const Matrix dvar = 0.5 * (var.array().inverse() - r.array().square() / var.array().square()).matrix();
        dpred->rightCols(t) = dvar.cwiseProduct(raw.unaryExpr([](double x) { return sigmoid(x); }));
      }
      break;
    }
    case LossKind::kCrossEntropy:
      throw std::invalid_argument("cross_entropy needs integer class labels");
  }
  if (loss.reduction == Reduction::kMean && m > 0) {
    const double scale = 1.0 / static_cast<double>(m * t);
    value *= scale;
    if (dpred) *dpred *= scale;
  }
  return value;
}

double loss_value(const LossSpec& loss, const Matrix& logits, std::span<const int> labels, Matrix* dpred) {
  if (loss.kind != LossKind::kCrossEntropy) throw std::invalid_argument("integer labels need the cross_entropy loss");
  const Index m = logits.rows();
  const Index c = logits.cols();
  if (static_cast<Index>(labels.size()) != m) throw std::invalid_argument("logit and label counts differ");
  double value = 0.0;
  if (dpred) dpred->resize(m, c);
  for (Index i = 0; i < m; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) throw std::invalid_argument("class label " + std::to_string(y) + " outside [0, c)");
    const double mx = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
    const double z = e.sum();
    value += std::log(z) + mx - logits(i, y);
    if (dpred) {
      dpred->row(i) = e / z;
      (*dpred)(i, y) -= 1.0;
    }
  }
  if (loss.reduction == Reduction::kMean && m > 0) {
    value /= static_cast<double>(m);
    if (dpred) *dpred /= static_cast<double>(m);
  }
  return value;
}

double loss_value(const LossSpec& loss, const Matrix& prediction, const Dataset& data, std::span<const Index> rows,
                  Matrix* dpred) {
  if (data.is_classification()) {
    std::vector<int> labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = data.labels[static_cast<std::size_t>(rows[i])];
    return loss_value(loss, prediction, labels, dpred);
  }
  if (is_identity(rows, data.size())) return loss_value(loss, prediction, data.Y, dpred);
  return loss_value(loss, prediction, gather_rows(data.Y, rows), dpred);
}

double gaussian_nll(const Matrix& mean, const Matrix& variance, const Matrix& target) {
  if (mean.rows() != target.rows() || mean.cols() != target.cols() || variance.rows() != mean.rows() ||
      variance.cols() != mean.cols())
    throw std::invalid_argument("gaussian_nll: shape mismatch");
  if ((variance.array() <= 0.0).any()) throw std::invalid_argument("gaussian_nll: variance must be positive");
  return 0.5 * (((mean - target).array().square() / variance.array()) + variance.array().log() + kLog2Pi).sum();
}

void check_loss_shapes(const LossSpec& loss, const MlpSpec& spec, const Dataset& data) {
  data.validate();
  if (spec.input_dim != data.input_dim())
    throw std::invalid_argument("network input_dim " + std::to_string(spec.input_dim) + " does not match data (" +
                                std::to_string(data.input_dim()) + ")");
  switch (loss.kind) {
    case LossKind::kMse:
      if (data.is_classification()) throw std::invalid_argument("mse needs regression targets");
      if (spec.output_dim != data.Y.cols()) throw std::invalid_argument("mse: output_dim must equal target width");
      break;
    case LossKind::kGaussianNllHetero:
      if (data.is_classification()) throw std::invalid_argument("gaussian_nll_hetero needs regression targets");
      if (spec.output_dim != 2 * data.Y.cols())
        throw std::invalid_argument("gaussian_nll_hetero: output_dim must be twice the target width");
      break;
    case LossKind::kCrossEntropy:
      if (!data.is_classification()) throw std::invalid_argument("cross_entropy needs class labels");
      if (spec.output_dim != data.num_classes)
        throw std::invalid_argument("cross_entropy: output_dim must equal the number of classes");
      break;
  }
}

void OptimizerSpec::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("learning rate must be positive and finite");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be nonnegative");
  if (epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (batch_size < 0) throw std::invalid_argument("batch size must be positive (or 0 for full batch)");
  if (kind == OptimizerKind::kGd && batch_size != 0) throw std::invalid_argument("gd is always full-batch");
  if (nesterov && momentum == 0.0) throw std::invalid_argument("nesterov needs a nonzero momentum");
  if (scheduler.kind == SchedulerKind::kPolynomial && scheduler.total_iters < 0)
    throw std::invalid_argument("polynomial scheduler total_iters must be >= 0");
  if (early_stopping && plateau_window < 1) throw std::invalid_argument("plateau window must be positive");
}

double scheduled_learning_rate(const OptimizerSpec& opt, int epoch) {
  switch (opt.scheduler.kind) {
    case SchedulerKind::kNone:
      return opt.learning_rate;
    case SchedulerKind::kCosine: {
      const double t = std::min(epoch, opt.epochs);
      return opt.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * t / opt.epochs));
    }
    case SchedulerKind::kPolynomial: {
      const int horizon = opt.scheduler.total_iters > 0 ? opt.scheduler.total_iters : opt.epochs;
      const double t = std::min(epoch, horizon);
      return opt.learning_rate * std::pow(1.0 - t / horizon, opt.scheduler.power);
    }
  }
  return opt.learning_rate;
}

NetworkObjective::NetworkObjective(Mlp net, const Dataset& data, LossSpec loss)
    : net_(std::move(net)), data_(data), loss_(loss) {
  check_loss_shapes(loss_, net_.spec(), data_);
}

Vector NetworkObjective::evaluate(std::span<const Index> rows, const Matrix& params, Matrix* grad) const {
  const bool full = is_identity(rows, data_.size());
  const Matrix batch_x = full ? Matrix() : gather_rows(data_.X, rows);
  const Matrix& x = full ? data_.X : batch_x;
  Vector losses(params.cols());
  if (grad) grad->resize(params.rows(), params.cols());
  for (Index b = 0; b < params.cols(); ++b) {
    const ParamVector theta = params.col(b);
    if (grad) {
      double value = 0.0;
      grad->col(b) = net_.value_and_vjp(theta, x, [&](const Matrix& out) {
        Matrix d;
        value = loss_value(loss_, out, data_, rows, &d);
        return d;
      });
      losses[b] = value;
    } else {
      losses[b] = loss_value(loss_, net_.forward_batch(theta, x), data_, rows);
    }
  }
  return losses;
}

BlockTrainResult train_block(const Objective& objective, Matrix params, const OptimizerSpec& opt,
                             const EpochCallback& on_epoch) {
  opt.validate();
  const Index n = objective.num_rows();
  const Index p = objective.num_params();
  const Index B = params.cols();
  if (n < 1) throw std::invalid_argument("training needs a nonempty dataset");
  if (params.rows() != p)
    throw std::invalid_argument("parameter block has " + std::to_string(params.rows()) + " rows, objective expects " +
                                std::to_string(p));
  const bool full_batch = opt.batch_size == 0 || opt.batch_size >= n;
  const Index batch = full_batch ? n : opt.batch_size;

  BlockTrainResult result;
  result.loss_history.assign(static_cast<std::size_t>(B), {});
  result.epochs_run.assign(static_cast<std::size_t>(B), 0);
  std::vector<bool> active(static_cast<std::size_t>(B), true);
  Index num_active = B;

  Matrix m1 = Matrix::Zero(p, B);  // momentum buffer / Adam first moment
  Matrix m2;                       // Adam second moment
  if (opt.kind == OptimizerKind::kAdam) m2 = Matrix::Zero(p, B);
  long step = 0;

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Matrix grad;
  Vector epoch_loss(B);

  auto update = [&](Index b, double lr) {
    auto g = grad.col(b);
    if (opt.weight_decay > 0.0) g += opt.weight_decay * params.col(b);
    if (opt.kind == OptimizerKind::kAdam) {
      m1.col(b) = opt.beta1 * m1.col(b) + (1.0 - opt.beta1) * g;
      m2.col(b) = opt.beta2 * m2.col(b) + (1.0 - opt.beta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
      params.col(b).array() -=
          lr * (m1.col(b).array() / c1) / ((m2.col(b).array() / c2).sqrt() + opt.adam_epsilon);
    } else if (opt.momentum > 0.0) {
      m1.col(b) = opt.momentum * m1.col(b) + g;
      if (opt.nesterov) {
        params.col(b) -= lr * (g + opt.momentum * m1.col(b));
      } else {
        params.col(b) -= lr * m1.col(b);
      }
    } else {
      params.col(b) -= lr * g;
    }
  };

  for (int epoch = 0; epoch < opt.epochs && num_active > 0; ++epoch) {
    const double lr = scheduled_learning_rate(opt, epoch);
    if (!full_batch) {
      Rng rng = make_rng(opt.seed, Stream::kShuffle, static_cast<std::uint64_t>(epoch));
      std::iota(order.begin(), order.end(), Index{0});
      std::shuffle(order.begin(), order.end(), rng);
    }
    epoch_loss.setZero();
    for (Index start = 0; start < n; start += batch) {
      const Index len = std::min(batch, n - start);
      const std::span<const Index> rows(order.data() + start, static_cast<std::size_t>(len));
      const Vector batch_loss = objective.evaluate(rows, params, &grad);
      ++step;
      for (Index b = 0; b < B; ++b) {
        if (!active[static_cast<std::size_t>(b)]) continue;
        if (!std::isfinite(batch_loss[b]) || !grad.col(b).allFinite()) {
          std::ostringstream os;
          os << "non-finite loss or gradient in column " << b << " at epoch " << epoch;
          throw TrainingDiverged(b, epoch, os.str());
        }
        update(b, lr);
      }
      // Epoch loss: sum of batch sums, or the size-weighted mean of batch means.
      if (full_batch || objective.reduction() == Reduction::kSum) {
        epoch_loss += batch_loss;
      } else {
        epoch_loss += batch_loss * (static_cast<double>(len) / static_cast<double>(n));
      }
    }
    for (Index b = 0; b < B; ++b) {
      const auto bi = static_cast<std::size_t>(b);
      if (!active[bi]) continue;
      auto& history = result.loss_history[bi];
      history.push_back(epoch_loss[b]);
      result.epochs_run[bi] = epoch + 1;
      bool stop = opt.target_loss > 0.0 && epoch_loss[b] < opt.target_loss;
      if (opt.early_stopping && static_cast<int>(history.size()) > opt.plateau_window) {
        const double before = history[history.size() - 1 - static_cast<std::size_t>(opt.plateau_window)];
        const double now = history.back();
        const double rel = (before - now) / std::max(std::abs(before), 1e-300);
        if (rel < opt.plateau_tolerance) stop = true;
      }
      if (stop) {
        active[bi] = false;
        --num_active;
      }
    }
    if (on_epoch) on_epoch(epoch + 1, params, epoch_loss);
  }

  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  result.final_loss = objective.evaluate(all, params, nullptr);
  for (Index b = 0; b < B; ++b)
    if (!std::isfinite(result.final_loss[b]))
      throw TrainingDiverged(b, opt.epochs, "non-finite final loss in column " + std::to_string(b));
  result.params = std::move(params);
  return result;
}

TrainResult train(const MlpSpec& spec, const ParamVector& theta0, const Dataset& data, const LossSpec& loss,
                  const OptimizerSpec& opt) {
  Mlp net(spec);
  if (theta0.size() != net.num_params()) throw std::invalid_argument("initial parameters have the wrong length");
  NetworkObjective objective(net, data, loss);
  BlockTrainResult block = train_block(objective, theta0, opt);
  TrainResult out;
  out.params = block.params.col(0);
  out.loss_history = std::move(block.loss_history[0]);
  out.final_loss = block.final_loss[0];
  out.epochs_run = block.epochs_run[0];
  return out;
}

}  // namespace nuqls
