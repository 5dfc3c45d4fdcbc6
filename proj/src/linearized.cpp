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

#include "nuqls/linearized.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "nuqls/random.hpp"
#include "nuqls/serialize.hpp"

namespace nuqls {
namespace {

constexpr int kEnsembleFormatVersion = 1;

Vector stack_rows(const Matrix& m) {
  Vector out(m.size());
  Eigen::Map<RowMajorMatrix>(out.data(), m.rows(), m.cols()) = m;
  return out;
}

bool is_identity(std::span<const Index> rows, Index n) {
  if (static_cast<Index>(rows.size()) != n) return false;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i] != static_cast<Index>(i)) return false;
  return true;
}

// Mirrors train_block for gd/sgd on params = init + J^T A, with A and the
// momentum buffer held as (n c) x B coefficient blocks.
BlockTrainResult train_range_block(const LinearizedModel& model, const LinearizedCache& cache, const Matrix& gram,
                                   const Dataset& data, const LossSpec& loss, Matrix init, const OptimizerSpec& opt,
                                   const EpochCallback& on_epoch, const std::vector<int>& checkpoints) {
  const Index n = data.size();
  const Index c = model.output_dim();
  const Index nc = n * c;
  const Index B = init.cols();
  const bool full_batch = opt.batch_size == 0 || opt.batch_size >= n;
  const Index batch = full_batch ? n : opt.batch_size;

  // Linearized training outputs at the initial parameters.
  Matrix offset = cache.jacobian * (init.colwise() - model.reference());
  offset.colwise() += cache.reference_out;

  BlockTrainResult result;
  result.loss_history.assign(static_cast<std::size_t>(B), {});
  result.epochs_run.assign(static_cast<std::size_t>(B), 0);
  std::vector<bool> active(static_cast<std::size_t>(B), true);
  Index num_active = B;

  Matrix coeff = Matrix::Zero(nc, B);
  Matrix velocity = Matrix::Zero(nc, B);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Vector epoch_loss(B);
  auto materialize = [&] { return Matrix(init + cache.jacobian.transpose() * coeff); };

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
      std::vector<Index> stacked;
      stacked.reserve(static_cast<std::size_t>(len * c));
      for (Index r : rows)
        for (Index k = 0; k < c; ++k) stacked.push_back(r * c + k);
      Matrix out = offset(stacked, Eigen::all);
      out.noalias() += gram(stacked, Eigen::all) * coeff;

      Matrix cotangent = Matrix::Zero(nc, B);
      Vector batch_loss(B);
      for (Index b = 0; b < B; ++b) {
        const Matrix pred = Eigen::Map<const RowMajorMatrix>(out.col(b).data(), len, c);
        Matrix d;
        batch_loss[b] = loss_value(loss, pred, data, rows, &d);
        const Vector flat = Eigen::Map<const Vector>(RowMajorMatrix(d).data(), len * c);
        cotangent(stacked, b) = flat;
      }
      for (Index b = 0; b < B; ++b) {
        if (!active[static_cast<std::size_t>(b)]) continue;
        if (!std::isfinite(batch_loss[b]) || !cotangent.col(b).allFinite()) {
          std::ostringstream os;
          os << "non-finite loss or gradient in column " << b << " at epoch " << epoch;
          throw TrainingDiverged(b, epoch, os.str());
        }
        if (opt.momentum > 0.0) {
          velocity.col(b) = opt.momentum * velocity.col(b) + cotangent.col(b);
          if (opt.nesterov) {
            coeff.col(b) -= lr * (cotangent.col(b) + opt.momentum * velocity.col(b));
          } else {
            coeff.col(b) -= lr * velocity.col(b);
          }
        } else {
          coeff.col(b) -= lr * cotangent.col(b);
        }
      }
      if (full_batch || loss.reduction == Reduction::kSum) {
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
        const double rel = (before - history.back()) / std::max(std::abs(before), 1e-300);
        if (rel < opt.plateau_tolerance) stop = true;
      }
      if (stop) {
        active[bi] = false;
        --num_active;
      }
    }
    if (on_epoch &&
        (checkpoints.empty() || std::find(checkpoints.begin(), checkpoints.end(), epoch + 1) != checkpoints.end()))
      on_epoch(epoch + 1, materialize(), epoch_loss);
  }

  const Matrix final_out = offset + gram * coeff;
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  result.final_loss.resize(B);
  for (Index b = 0; b < B; ++b) {
    const Matrix pred = Eigen::Map<const RowMajorMatrix>(final_out.col(b).data(), n, c);
    result.final_loss[b] = loss_value(loss, pred, data, all);
    if (!std::isfinite(result.final_loss[b]))
      throw TrainingDiverged(b, opt.epochs, "non-finite final loss in column " + std::to_string(b));
  }
  result.params = materialize();
  return result;
}

}  // namespace

LinearizedModel::LinearizedModel(MlpSpec spec, ParamVector reference)
    : net_(std::move(spec)), reference_(std::move(reference)) {
  if (reference_.size() != net_.num_params())
    throw std::invalid_argument("reference parameters have length " + std::to_string(reference_.size()) +
                                ", network expects " + std::to_string(net_.num_params()));
  if (!reference_.allFinite()) throw std::invalid_argument("reference parameters must be finite");
}

Vector LinearizedModel::forward(const ParamVector& theta, const Vector& x) const {
  if (theta.size() != num_params()) throw std::invalid_argument("parameter vector has the wrong length");
  return net_.forward(reference_, x) + net_.jvp(reference_, x, theta - reference_);
}

LinearizedCache LinearizedModel::cache(const Matrix& X, Index jacobian_budget) const {
  LinearizedCache out;
  out.X = X;
  if (X.rows() == 0) {
    out.reference_out.resize(0);
    return out;
  }
  out.reference_out = stack_rows(net_.forward_batch(reference_, X));
  if (X.rows() * output_dim() * num_params() <= jacobian_budget) out.jacobian = net_.jacobian_batch(reference_, X);
  return out;
}

Matrix LinearizedModel::forward_block(const LinearizedCache& cache, const Matrix& params) const {
  if (params.rows() != num_params()) throw std::invalid_argument("parameter block has the wrong number of rows");
  if (cache.size() == 0) return Matrix(0, params.cols());
  const Matrix delta = params.colwise() - reference_;
  Matrix out = cache.has_jacobian() ? Matrix(cache.jacobian * delta) : net_.jvp_batch(reference_, cache.X, delta);
  out.colwise() += cache.reference_out;
  return out;
}

LinearizedObjective::LinearizedObjective(const LinearizedModel& model, const Dataset& data, LossSpec loss,
                                         Index jacobian_budget)
    : model_(model), data_(data), loss_(loss), cache_(model.cache(data.X, jacobian_budget)) {
  check_loss_shapes(loss_, model_.spec(), data_);
}

Vector LinearizedObjective::evaluate(std::span<const Index> rows, const Matrix& params, Matrix* grad) const {
  const Index c = model_.output_dim();
  const Index m = static_cast<Index>(rows.size());
  const bool full = is_identity(rows, data_.size());
  const Matrix delta = params.colwise() - model_.reference();

  // Stacked row indices (point-major) of this batch.
  std::vector<Index> stacked;
  Matrix batch_x;
  if (!full) {
    stacked.reserve(static_cast<std::size_t>(m * c));
    for (Index r : rows)
      for (Index k = 0; k < c; ++k) stacked.push_back(r * c + k);
    if (!cache_.has_jacobian()) {
      batch_x.resize(m, data_.input_dim());
      for (Index i = 0; i < m; ++i) batch_x.row(i) = data_.X.row(rows[static_cast<std::size_t>(i)]);
    }
  }
  Matrix batch_jac;
  if (!full && cache_.has_jacobian()) batch_jac = cache_.jacobian(stacked, Eigen::all);
  const Matrix& jac = full ? cache_.jacobian : batch_jac;

  Matrix out;
  if (cache_.has_jacobian()) {
    out.noalias() = jac * delta;
  } else {
    out = model_.net().jvp_batch(model_.reference(), full ? data_.X : batch_x, delta);
  }
  if (full) {
    out.colwise() += cache_.reference_out;
  } else {
    out.colwise() += cache_.reference_out(stacked);
  }

  Vector losses(params.cols());
  Matrix cotangent(m * c, params.cols());
  for (Index b = 0; b < params.cols(); ++b) {
    const Matrix pred = Eigen::Map<const RowMajorMatrix>(out.col(b).data(), m, c);
    Matrix d;
    losses[b] = loss_value(loss_, pred, data_, rows, grad ? &d : nullptr);
    if (grad) Eigen::Map<RowMajorMatrix>(cotangent.col(b).data(), m, c) = d;
  }
  if (grad) {
    if (cache_.has_jacobian()) {
      grad->noalias() = jac.transpose() * cotangent;
    } else {
      *grad = model_.net().vjp_batch(model_.reference(), full ? data_.X : batch_x, cotangent);
    }
  }
  return losses;
}

void NuqlsConfig::validate() const {
  if (S < 1) throw std::invalid_argument("NUQLS needs at least one realization");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be positive and finite");
  if (member_block < 1) throw std::invalid_argument("member block size must be positive");
  if (workers < 1) throw std::invalid_argument("worker count must be positive");
  for (int e : checkpoint_epochs)
    if (e < 1) throw std::invalid_argument("checkpoint epochs must be positive");
  opt.validate();
  if (space == TrainingSpace::kRange) {
    if (opt.kind == OptimizerKind::kAdam) throw ConfigError("range-space training supports gd and sgd only");
    if (opt.weight_decay != 0.0) throw ConfigError("range-space training does not support weight decay");
  }
}

std::string to_string(TrainingSpace s) { return s == TrainingSpace::kRange ? "range" : "parameter"; }

TrainingSpace parse_training_space(std::string_view name) {
  if (name == "parameter") return TrainingSpace::kParameter;
  if (name == "range") return TrainingSpace::kRange;
  throw ConfigError("unknown training space '" + std::string(name) + "' (expected parameter or range)");
}

ParamVector member_initialization(const LinearizedModel& model, const NuqlsConfig& cfg, int member) {
  Rng rng = make_rng(cfg.seed, Stream::kPerturbation, static_cast<std::uint64_t>(member));
  return model.reference() + cfg.gamma * standard_normal(rng, model.num_params());
}

NuqlsEnsemble nuqls_sample(const LinearizedModel& model, const Dataset& data, const NuqlsConfig& cfg,
                           const MemberCheckpoint& on_epoch) {
  cfg.validate();
  data.validate();
  const LinearizedObjective objective(model, data, cfg.loss, cfg.jacobian_budget);
  const bool range = cfg.space == TrainingSpace::kRange;
  Matrix gram;
  if (range) {
    const Index nc = data.size() * model.output_dim();
    if (!objective.cache().has_jacobian() || nc * nc > cfg.jacobian_budget)
      throw ConfigError("range-space training needs the training Jacobian and Gram matrix within the budget");
    gram.noalias() = objective.cache().jacobian * objective.cache().jacobian.transpose();
  }
  const Index p = model.num_params();
  const int S = cfg.S;
  const Index num_blocks = (S + cfg.member_block - 1) / cfg.member_block;

  NuqlsEnsemble ens;
  ens.config = cfg;
  ens.members.resize(static_cast<std::size_t>(S));
  ens.final_train_losses.resize(S);
  ens.epochs_run.resize(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s)
    ens.member_seeds.push_back(derive_seed(cfg.seed, Stream::kPerturbation, static_cast<std::uint64_t>(s)));

  auto run_block = [&](Index block) {
    const Index first = block * cfg.member_block;
    const Index count = std::min<Index>(cfg.member_block, S - first);
    Matrix init(p, count);
    for (Index j = 0; j < count; ++j) init.col(j) = member_initialization(model, cfg, static_cast<int>(first + j));
    EpochCallback cb;
    if (on_epoch)
      cb = [&, first](int epoch, const Matrix& params, const Vector& loss) { on_epoch(epoch, first, params, loss); };
    BlockTrainResult result;
    try {
      if (range) {
        result = train_range_block(model, objective.cache(), gram, data, cfg.loss, std::move(init), cfg.opt, cb,
                                   cfg.checkpoint_epochs);
      } else {
        EpochCallback filtered;
        if (cb)
          filtered = [&](int epoch, const Matrix& params, const Vector& loss) {
            const auto& marks = cfg.checkpoint_epochs;
            if (marks.empty() || std::find(marks.begin(), marks.end(), epoch) != marks.end()) cb(epoch, params, loss);
          };
        result = train_block(objective, std::move(init), cfg.opt, filtered);
      }
    } catch (const TrainingDiverged& e) {
      throw NumericalError("NUQLS member " + std::to_string(first + e.column()) + " diverged: " + e.what());
    }
    for (Index j = 0; j < count; ++j) {
      const auto s = static_cast<std::size_t>(first + j);
      ens.members[s] = result.params.col(j);
      ens.final_train_losses[first + j] = result.final_loss[j];
      ens.epochs_run[s] = result.epochs_run[static_cast<std::size_t>(j)];
    }
  };

  const int workers = std::min<int>(cfg.workers, static_cast<int>(num_blocks));
  if (workers <= 1) {
    for (Index b = 0; b < num_blocks; ++b) run_block(b);
    return ens;
  }
  std::mutex mu;
  std::exception_ptr failure;
  Index next = 0;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        Index block;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (failure || next >= num_blocks) return;
          block = next++;
        }
        try {
          run_block(block);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return ens;
}

EnsemblePredictions ensemble_predict(const LinearizedModel& model, const std::vector<ParamVector>& members,
                                     const Matrix& X, Index jacobian_budget) {
  if (X.rows() > 0 && X.cols() != model.spec().input_dim)
    throw std::invalid_argument("test inputs have " + std::to_string(X.cols()) + " columns, network expects " +
                                std::to_string(model.spec().input_dim));
  const Index m = X.rows();
  const Index c = model.output_dim();
  EnsemblePredictions out;
  if (members.empty()) return out;
  if (m == 0) {
    out.members.assign(members.size(), Matrix(0, c));
    return out;
  }
  const LinearizedCache cache = model.cache(X, jacobian_budget);
  Matrix params(model.num_params(), static_cast<Index>(members.size()));
  for (std::size_t s = 0; s < members.size(); ++s) {
    if (members[s].size() != model.num_params()) throw std::invalid_argument("ensemble member has the wrong length");
    params.col(static_cast<Index>(s)) = members[s];
  }
  const Matrix stacked = model.forward_block(cache, params);
  for (Index s = 0; s < stacked.cols(); ++s)
    out.members.emplace_back(Eigen::Map<const RowMajorMatrix>(stacked.col(s).data(), m, c));
  return out;
}

EnsemblePredictions ensemble_predict(const LinearizedModel& model, const NuqlsEnsemble& ens, const Matrix& X,
                                     Index jacobian_budget) {
  return ensemble_predict(model, ens.members, X, jacobian_budget);
}

PosteriorSummary ensemble_stats(const EnsemblePredictions& preds, double gamma_scale, StatsMode mode,
                                double gamma_base) {
  const int S = preds.size();
  if (S < 2) throw std::invalid_argument("ensemble statistics need at least 2 members");
  if (!(gamma_scale > 0.0) || !(gamma_base > 0.0)) throw std::invalid_argument("gamma values must be positive");
  const Index m = preds.points();
  const Index c = preds.members.front().cols();
  std::vector<Matrix> values;
  values.reserve(static_cast<std::size_t>(S));
  for (const Matrix& member : preds.members) {
    if (member.rows() != m || member.cols() != c) throw std::invalid_argument("ensemble members differ in shape");
    values.push_back(mode == StatsMode::kSoftmax ? softmax_rows(member) : member);
  }

  PosteriorSummary out;
  out.gamma = gamma_scale;
  out.mean = Matrix::Zero(m, c);
  for (const Matrix& v : values) out.mean += v;
  out.mean /= S;
  // Shifted sums about the first member; identical members give exactly zero.
  Matrix sq = Matrix::Zero(m, c);
  Matrix lin = Matrix::Zero(m, c);
  for (const Matrix& v : values) {
    const Matrix d = v - values.front();
    sq += d.cwiseAbs2();
    lin += d;
  }
  const double ratio = gamma_scale / gamma_base;
  const double scale = mode == StatsMode::kRegression ? ratio * ratio : 1.0;
  out.variance = scale * ((sq - lin.cwiseAbs2() / S) / (S - 1)).cwiseMax(0.0);

  if (mode == StatsMode::kRegression && c > 1) {
    out.covariance.assign(static_cast<std::size_t>(m), Matrix::Zero(c, c));
    for (const Matrix& v : values) {
      const Matrix dev = v - out.mean;
      for (Index i = 0; i < m; ++i) out.covariance[static_cast<std::size_t>(i)] += dev.row(i).transpose() * dev.row(i);
    }
    for (Matrix& block : out.covariance) block = scale * (block / (S - 1));
  }
  return out;
}

namespace {

Json config_to_json(const NuqlsConfig& cfg) {
  return {{"S", cfg.S},
          {"gamma", cfg.gamma},
          {"opt", to_json(cfg.opt)},
          {"loss", to_json(cfg.loss)},
          {"seed", cfg.seed},
          {"jacobian_budget", cfg.jacobian_budget},
          {"member_block", cfg.member_block},
          {"space", to_string(cfg.space)}};
}

NuqlsConfig config_from_json(const Json& j) {
  NuqlsConfig cfg;
  cfg.S = j.at("S").get<int>();
  cfg.gamma = j.at("gamma").get<double>();
  cfg.opt = optimizer_spec_from_json(j.at("opt"));
  cfg.loss = loss_spec_from_json(j.at("loss"));
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.jacobian_budget = j.at("jacobian_budget").get<Index>();
  cfg.member_block = j.at("member_block").get<Index>();
  cfg.space = parse_training_space(j.value("space", "parameter"));
  return cfg;
}

}  // namespace

void save_ensemble(const std::string& path, const LinearizedModel& model, const NuqlsEnsemble& ens) {
  Json members = Json::array();
  for (const ParamVector& m : ens.members) members.push_back(to_json(m));
  const Json j = {{"format", "nuqls-ensemble"},
                  {"kind", "nuqls"},
                  {"version", kEnsembleFormatVersion},
                  {"network", to_json(model.spec())},
                  {"reference", to_json(model.reference())},
                  {"config", config_to_json(ens.config)},
                  {"member_seeds", ens.member_seeds},
                  {"epochs_run", ens.epochs_run},
                  {"final_train_losses", to_json(ens.final_train_losses)},
                  {"members", members}};
  write_json_file(path, j);
}

LoadedEnsemble load_ensemble(const std::string& path) {
  const Json j = read_json_file(path);
  try {
    if (j.at("format").get<std::string>() != "nuqls-ensemble" || j.value("kind", "nuqls") != "nuqls")
      throw IoError("'" + path + "' is not a NUQLS ensemble");
    const int version = j.at("version").get<int>();
    if (version != kEnsembleFormatVersion)
      throw IoError("unsupported ensemble format version " + std::to_string(version) + " in '" + path + "'");
    LinearizedModel model(mlp_spec_from_json(j.at("network")), vector_from_json(j.at("reference")));
    NuqlsEnsemble ens;
    ens.config = config_from_json(j.at("config"));
    ens.member_seeds = j.at("member_seeds").get<std::vector<std::uint64_t>>();
    ens.epochs_run = j.at("epochs_run").get<std::vector<int>>();
    ens.final_train_losses = vector_from_json(j.at("final_train_losses"));
    for (const Json& m : j.at("members")) ens.members.push_back(vector_from_json(m));
    return {std::move(model), std::move(ens)};
  } catch (const Json::exception& e) {
    throw IoError("malformed ensemble file '" + path + "': " + e.what());
  }
}

}  // namespace nuqls
