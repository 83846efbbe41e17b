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

#include "tinytl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tinytl/errors.hpp"

namespace tinytl {

template <typename T>
GradientMap to_gradient_map(const GradientSet<T>& grads) {
  GradientMap out;
  for (const auto& [name, g] : grads) out[name] = std::vector<double>(g.data().begin(), g.data().end());
  return out;
}

template <typename T>
FiniteDiffResult finite_diff_check(const std::function<double()>& loss,
                                   std::span<const ParamPtr<T>> params,
                                   const GradientMap& analytic, const FiniteDiffOptions& options) {
  if (!(options.eps > 0.0)) throw SpecError("finite_diff_check: eps must be positive");
  if (!(options.floor > 0.0)) throw SpecError("finite_diff_check: floor must be positive");
  std::mt19937_64 rng(options.seed);
  FiniteDiffResult result;
  for (const ParamPtr<T>& p : params) {
    if (!p->trainable) continue;
    auto it = analytic.find(p->name);
    if (it == analytic.end()) {
      throw ContractError("finite_diff_check: no analytic gradient for '" + p->name + "'");
    }
    const std::vector<double>& g = it->second;
    if (g.size() != p->value.numel()) {
      throw DimensionError("finite_diff_check: gradient size mismatch for '" + p->name + "'");
    }
    std::vector<std::size_t> idx(g.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.max_scalars_per_param != 0 && idx.size() > options.max_scalars_per_param) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(options.max_scalars_per_param);
      std::sort(idx.begin(), idx.end());
    }
    std::vector<double> numeric(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const std::size_t i = idx[k];
      T& slot = p->value[i];
      const T orig = slot;
      auto at = [&](double offset) {
        slot = static_cast<T>(orig + offset);
        const double v = loss();
        slot = orig;
        if (!std::isfinite(v)) {
          throw NumericError("finite_diff_check: non-finite loss perturbing '" + p->name + "'[" +
                             std::to_string(i) + "]");
        }
        return v;
      };
      const double h = options.eps;
      if (options.stencil == Stencil::kCentral2) {
        numeric[k] = (at(h) - at(-h)) / (2.0 * h);
      } else {
        numeric[k] = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
      }
    }

    // The analytic side is known for the whole tensor, sampled or not.
    double scale = options.floor;
    if (options.norm == ErrorNorm::kPerTensor) {
      for (double a : g) scale = std::max(scale, std::abs(a));
      for (double n : numeric) scale = std::max(scale, std::abs(n));
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double a = g[idx[k]];
      const double n = numeric[k];
      const double denom = options.norm == ErrorNorm::kPerTensor
                               ? scale
                               : std::max({std::abs(a), std::abs(n), options.floor});
      const double err = std::abs(a - n) / denom;
      ++result.checked;
      if (err > result.max_rel_error || result.checked == 1) {
        result.max_rel_error = std::max(err, result.max_rel_error);
        result.worst_param = p->name;
        result.worst_index = idx[k];
        result.worst_analytic = a;
        result.worst_numeric = n;
      }
    }
  }
  return result;
}

template GradientMap to_gradient_map(const GradientSet<float>&);
template GradientMap to_gradient_map(const GradientSet<double>&);
template FiniteDiffResult finite_diff_check(const std::function<double()>&,
                                            std::span<const ParamPtr<float>>, const GradientMap&,
                                            const FiniteDiffOptions&);
template FiniteDiffResult finite_diff_check(const std::function<double()>&,
                                            std::span<const ParamPtr<double>>, const GradientMap&,
                                            const FiniteDiffOptions&);

}  // namespace tinytl
