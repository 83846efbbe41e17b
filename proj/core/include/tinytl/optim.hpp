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

#ifndef TINYTL_OPTIM_HPP_
#define TINYTL_OPTIM_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "tinytl/tape.hpp"

namespace tinytl {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::map<std::string, BasicTensor<T>> m;
  std::map<std::string, BasicTensor<T>> v;
  std::int64_t step = 0;
};

// One bias-corrected Adam update of the trainable tensors in `params`.
// `grads` must hold exactly those tensors; anything else is a ContractError.
// Frozen tensors are never written.
template <typename T>
void adam_step(std::span<const ParamPtr<T>> params, const GradientSet<T>& grads,
               AdamState<T>& state, double lr, const AdamConfig& config = {});

// 0.5 * lr0 * (1 + cos(pi * step / total_steps)), 0 <= step <= total_steps.
double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr0);

}  // namespace tinytl

#endif  // TINYTL_OPTIM_HPP_
