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

#ifndef NUQLS_RANDOM_HPP_
#define NUQLS_RANDOM_HPP_

#include <cstdint>
#include <random>

#include "nuqls/types.hpp"

namespace nuqls {

using Rng = std::mt19937_64;

// Independent named random streams. Every consumer of randomness derives its
// own seed from (master seed, stream, index) so that e.g. the data order of a
// training run does not depend on how its initialization was drawn.
enum class Stream : std::uint64_t {
  kInit = 1,
  kShuffle = 2,
  kPerturbation = 3,
  kData = 4,
  kSplit = 5,
  kMember = 6,
  kBaseline = 7,
  kExperiment = 8,
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(master, stream, index));
}

Vector standard_normal(Rng& rng, Index n);
Matrix standard_normal(Rng& rng, Index rows, Index cols);

}  // namespace nuqls

#endif  // NUQLS_RANDOM_HPP_
