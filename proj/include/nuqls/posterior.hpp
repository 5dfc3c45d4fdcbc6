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

#ifndef NUQLS_POSTERIOR_HPP_
#define NUQLS_POSTERIOR_HPP_

#include <vector>

#include "nuqls/types.hpp"

namespace nuqls {

// Predictive summary for m test points with c outputs. `covariance` is either
// empty or holds one c x c block per test point.
struct PosteriorSummary {
  Matrix mean;
  Matrix variance;
  std::vector<Matrix> covariance;
  double gamma = 1.0;

  Index size() const { return mean.rows(); }
};

}  // namespace nuqls

#endif  // NUQLS_POSTERIOR_HPP_
