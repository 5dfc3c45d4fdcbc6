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

#ifndef NUQLS_SRC_EXPERIMENTS_COMMON_HPP_
#define NUQLS_SRC_EXPERIMENTS_COMMON_HPP_

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "nuqls/experiments/experiments.hpp"
#include "nuqls/posterior.hpp"
#include "nuqls/random.hpp"

namespace nuqls::detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Reads net.*, map.* and map.init. Input and output sizes come from the data.
MapSettings read_map(Settings& s, const MapSettings& fallback);

struct MapFit {
  ParamVector params;
  double train_loss = 0.0;
  double seconds = 0.0;
};

MapFit fit_map(const MapSettings& map, Index input_dim, Index output_dim, const Dataset& data, const LossSpec& loss,
               std::uint64_t seed);

inline std::uint64_t repeat_seed(std::uint64_t master, int repeat) {
  return derive_seed(master, Stream::kExperiment, static_cast<std::uint64_t>(repeat));
}

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;  // Student-t 95% half width; 0 for one sample
  double sd = 0.0;
};

MeanCi mean_ci(const std::vector<double>& xs, double level = 0.95);

Vector to_vector(const std::vector<double>& xs);
std::vector<double> to_std(const Vector& v);

// Variance rescale for PosteriorSummary from gamma_base to gamma.
PosteriorSummary rescaled(const PosteriorSummary& p, double gamma_base, double gamma);

}  // namespace nuqls::detail

#endif  // NUQLS_SRC_EXPERIMENTS_COMMON_HPP_
