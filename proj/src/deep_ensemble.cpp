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

#include "nuqls/deep_ensemble.hpp"

#include <exception>
#include <mutex>
#include <thread>

#include "nuqls/random.hpp"
#include "nuqls/serialize.hpp"

namespace nuqls {
namespace {

constexpr int kDeFormatVersion = 1;

void check_head(const MlpSpec& spec, const Dataset& data, const LossSpec& loss) {
  if (data.is_classification()) {
    if (loss.kind != LossKind::kCrossEntropy) throw ConfigError("deep ensemble classification needs cross_entropy");
  } else if (loss.kind != LossKind::kGaussianNllHetero) {
    throw ConfigError("deep ensemble regression needs gaussian_nll_hetero");
  }
  check_loss_shapes(loss, spec, data);
}

}  // namespace

void DeConfig::validate() const {
  if (S < 1) throw ConfigError("deep ensemble needs S >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (loss.kind == LossKind::kMse) throw ConfigError("deep ensemble members need a likelihood loss");
  opt.validate();
}

DeepEnsemble de_train(const MlpSpec& spec, const Dataset& data, const DeConfig& cfg) {
  cfg.validate();
  spec.validate();
  data.validate();
  check_head(spec, data, cfg.loss);

  DeepEnsemble ens;
  ens.spec = spec;
  ens.config = cfg;
  ens.members.resize(static_cast<std::size_t>(cfg.S));
  ens.final_train_losses.resize(cfg.S);
  for (int s = 0; s < cfg.S; ++s)
    ens.member_seeds.push_back(derive_seed(cfg.seed, Stream::kBaseline, static_cast<std::uint64_t>(s)));

  auto run_member = [&](int s) {
    const auto k = static_cast<std::size_t>(s);
    OptimizerSpec opt = cfg.opt;
    opt.seed = derive_seed(cfg.seed, Stream::kMember, k);
    const ParamVector theta0 = init_params(spec, cfg.init, ens.member_seeds[k]);
    try {
      TrainResult r = train(spec, theta0, data, cfg.loss, opt);
      ens.members[k] = std::move(r.params);
      ens.final_train_losses[s] = r.final_loss;
    } catch (const TrainingDiverged& e) {
      throw NumericalError("deep ensemble member " + std::to_string(s) + " diverged: " + e.what());
    }
  };

  const int workers = std::min(cfg.workers, cfg.S);
  if (workers <= 1) {
    for (int s = 0; s < cfg.S; ++s) run_member(s);
    return ens;
  }
  std::mutex mu;
  std::exception_ptr failure;
  int next = 0;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        int s;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (failure || next >= cfg.S) return;
          s = next++;
        }
        try {
          run_member(s);
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

EnsemblePredictions de_member_outputs(const DeepEnsemble& ens, const Matrix& X) {
  const Mlp net(ens.spec);
  EnsemblePredictions out;
  for (const ParamVector& theta : ens.members) {
    const Matrix f = net.forward_batch(theta, X);
    if (ens.is_classification()) {
      out.members.push_back(softmax_rows(f));
    } else {
      out.members.push_back(f.leftCols(f.cols() / 2));
    }
  }
  return out;
}

PosteriorSummary de_predict(const DeepEnsemble& ens, const Matrix& X) {
  if (ens.members.empty()) throw std::invalid_argument("de_predict: empty ensemble");
  const Mlp net(ens.spec);
  const auto S = static_cast<double>(ens.size());
  PosteriorSummary out;
  if (ens.is_classification()) {
    const EnsemblePredictions probs = de_member_outputs(ens, X);
    out.mean = Matrix::Zero(X.rows(), ens.spec.output_dim);
    for (const Matrix& p : probs.members) out.mean += p;
    out.mean /= S;
    out.variance = Matrix::Zero(out.mean.rows(), out.mean.cols());
    if (ens.size() > 1) {
      for (const Matrix& p : probs.members) out.variance += (p - out.mean).cwiseAbs2();
      out.variance /= (S - 1.0);
    }
    return out;
  }
  const Index t = ens.spec.output_dim / 2;
  out.mean = Matrix::Zero(X.rows(), t);
  Matrix second = Matrix::Zero(X.rows(), t);
  for (const ParamVector& theta : ens.members) {
    const Matrix f = net.forward_batch(theta, X);
    const Matrix mu = f.leftCols(t);
    out.mean += mu;
    second += hetero_variance(f.rightCols(t)) + mu.cwiseAbs2();
  }
  out.mean /= S;
  out.variance = (second / S - out.mean.cwiseAbs2()).cwiseMax(0.0);
  return out;
}

void save_deep_ensemble(const std::string& path, const DeepEnsemble& ens) {
  Json members = Json::array();
  for (const ParamVector& m : ens.members) members.push_back(to_json(m));
  const Json cfg = {{"S", ens.config.S},
                    {"opt", to_json(ens.config.opt)},
                    {"loss", to_json(ens.config.loss)},
                    {"seed", ens.config.seed},
                    {"init", to_string(ens.config.init)}};
  const Json j = {{"format", "nuqls-ensemble"},
                  {"kind", "deep_ensemble"},
                  {"version", kDeFormatVersion},
                  {"network", to_json(ens.spec)},
                  {"config", cfg},
                  {"member_seeds", ens.member_seeds},
                  {"final_train_losses", to_json(ens.final_train_losses)},
                  {"members", members}};
  write_json_file(path, j);
}

DeepEnsemble load_deep_ensemble(const std::string& path) {
  const Json j = read_json_file(path);
  try {
    if (j.at("format").get<std::string>() != "nuqls-ensemble" || j.value("kind", "") != "deep_ensemble")
      throw IoError("'" + path + "' is not a deep ensemble file");
    if (j.at("version").get<int>() != kDeFormatVersion) throw IoError("unsupported deep ensemble version in " + path);
    DeepEnsemble ens;
    ens.spec = mlp_spec_from_json(j.at("network"));
    const Json& cfg = j.at("config");
    ens.config.S = cfg.at("S").get<int>();
    ens.config.opt = optimizer_spec_from_json(cfg.at("opt"));
    ens.config.loss = loss_spec_from_json(cfg.at("loss"));
    ens.config.seed = cfg.at("seed").get<std::uint64_t>();
    ens.config.init = parse_init_scheme(cfg.at("init").get<std::string>());
    ens.member_seeds = j.at("member_seeds").get<std::vector<std::uint64_t>>();
    ens.final_train_losses = vector_from_json(j.at("final_train_losses"));
    for (const Json& m : j.at("members")) ens.members.push_back(vector_from_json(m));
    return ens;
  } catch (const Json::exception& e) {
    throw IoError("malformed deep ensemble file '" + path + "': " + e.what());
  }
}

}  // namespace nuqls
