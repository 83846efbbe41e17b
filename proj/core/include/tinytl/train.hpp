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

#ifndef TINYTL_TRAIN_HPP_
#define TINYTL_TRAIN_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tinytl/dataset.hpp"
#include "tinytl/model.hpp"
#include "tinytl/optim.hpp"
#include "tinytl/policy.hpp"

namespace tinytl {

struct TrainConfig {
  int epochs = 50;
  int batch = 8;
  double lr0 = 1e-3;
  std::uint64_t seed = 0;
  AdamConfig adam;
  // Compare the runtime saved bytes against the analytic footprint on
  // every step and throw InvariantError on any difference.
  bool check_memory = true;
  // Replace frozen conv weights by their 8-bit reconstruction before
  // training starts.
  bool quantize_frozen = false;
  // Forward options used for training and evaluation.
  ForwardOptions forward;
};

struct TrainReport {
  std::string policy;
  int epochs = 0;
  int batch = 0;
  double lr0 = 0.0;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  std::vector<double> loss_curve;  // mean training loss per epoch
  double final_loss = 0.0;         // last epoch's mean loss
  double train_acc = 0.0;          // after training, inference mode
  double final_acc = 0.0;          // on the eval set when given, else train_acc
  std::uint64_t peak_saved_bytes = 0;
  std::uint64_t analytic_activation_bytes = 0;  // at the configured batch
  std::int64_t trainable_params = 0;
  std::int64_t frozen_params = 0;
};

// Mean softmax cross-entropy over the batch.
template <typename T>
double softmax_cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels,
                             BasicTensor<T>* grad);

// Fine-tunes `model` in place. Errors: dataset/head mismatch → SpecError,
// non-finite loss → NumericError, memory mismatch → InvariantError.
TrainReport train(Model& model, const Dataset& data, const FineTunePolicy& policy,
                  const TrainConfig& config, const Dataset* eval = nullptr);

// Top-1 accuracy in inference mode (no tape, nothing saved).
double evaluate(const Model& model, const Dataset& data, int batch = 32,
                ForwardOptions opt = {});

// Arg-max class for every sample, inference mode.
std::vector<int> predict(const Model& model, const Dataset& data, int batch = 32,
                         ForwardOptions opt = {});

}  // namespace tinytl

#endif  // TINYTL_TRAIN_HPP_
