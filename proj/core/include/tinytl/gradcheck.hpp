// Copyright 2026 The tinytl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TINYTL_GRADCHECK_HPP_
#define TINYTL_GRADCHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tinytl/tape.hpp"

namespace tinytl {

// Analytic gradients flattened to double, keyed by parameter name.
using GradientMap = std::map<std::string, std::vector<double>>;

template <typename T>
GradientMap to_gradient_map(const GradientSet<T>& grads);

enum class Stencil {
  kCentral2,  // (f(x+h) - f(x-h)) / 2h
  kCentral4,  // (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h
};

enum class ErrorNorm {
  kPerScalar,  // |a_i - n_i| / max(|a_i|, |n_i|, floor)
  kPerTensor,  // max_i |a_i - n_i| / max(max_j |a_j| over the whole tensor, max_i |n_i|, floor)
};

struct FiniteDiffOptions {
  double eps = 1e-3;
  Stencil stencil = Stencil::kCentral4;
  ErrorNorm norm = ErrorNorm::kPerScalar;
  double floor = 1e-8;
  // Check at most this many scalars per parameter tensor (0 = all). The
  // subset is drawn deterministically from `seed`.
  std::size_t max_scalars_per_param = 0;
  std::uint64_t seed = 0;
};

struct FiniteDiffResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central differences (f(p+eps) - f(p-eps)) / 2eps for every checked scalar
// of every trainable parameter in `params`, compared against `analytic`.
// Relative error uses the denominator max(|analytic|, 1e-8). Frozen
// parameters are skipped. `loss` must be deterministic; every perturbed
// value is restored before returning.
template <typename T>
FiniteDiffResult finite_diff_check(const std::function<double()>& loss,
                                   std::span<const ParamPtr<T>> params,
                                   const GradientMap& analytic, const FiniteDiffOptions& options);

}  // namespace tinytl

#endif  // TINYTL_GRADCHECK_HPP_
