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

#include "tinytl/optim.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "tinytl/errors.hpp"

namespace tinytl {

template <typename T>
void adam_step(std::span<const ParamPtr<T>> params, const GradientSet<T>& grads,
               AdamState<T>& state, double lr, const AdamConfig& config) {
  std::set<std::string> trainable;
  for (const auto& p : params) {
    if (!p->trainable) continue;
    trainable.insert(p->name);
    if (!grads.contains(p->name)) {
      throw ContractError("adam_step: missing gradient for trainable '" + p->name + "'");
    }
    if (!(grads.at(p->name).shape() == p->value.shape())) {
      throw ContractError("adam_step: gradient shape mismatch for '" + p->name + "'");
    }
  }
  for (const auto& [name, g] : grads) {
    if (trainable.count(name) == 0) {
      throw ContractError("adam_step: gradient for non-trainable or unknown '" + name + "'");
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (const auto& p : params) {
    if (!p->trainable) continue;
    const BasicTensor<T>& g = grads.at(p->name);
    auto [mit, mnew] = state.m.try_emplace(p->name, p->value.shape());
    auto [vit, vnew] = state.v.try_emplace(p->name, p->value.shape());
    BasicTensor<T>& m = mit->second;
    BasicTensor<T>& v = vit->second;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double gi = g[i];
      const double mi = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      const double vi = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + config.eps);
      p->value[i] = static_cast<T>(p->value[i] - update);
    }
  }
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr0) {
  if (total_steps < 0 || step < 0 || step > total_steps) {
    throw SpecError("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                    std::to_string(total_steps) + "]");
  }
  if (total_steps == 0) return lr0;
  if (step == total_steps) return 0.0;
  return 0.5 * lr0 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                         static_cast<double>(total_steps)));
}

template void adam_step(std::span<const ParamPtr<float>>, const GradientSet<float>&,
                        AdamState<float>&, double, const AdamConfig&);
template void adam_step(std::span<const ParamPtr<double>>, const GradientSet<double>&,
                        AdamState<double>&, double, const AdamConfig&);

}  // namespace tinytl
