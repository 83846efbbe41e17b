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

#include "tinytl/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "tinytl/errors.hpp"
#include "tinytl/memory_model.hpp"
#include "tinytl/quantize.hpp"

namespace tinytl {

template <typename T>
double softmax_cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels,
                             BasicTensor<T>* grad) {
  if (logits.rank() != 2 || static_cast<std::size_t>(logits.dim(0)) != labels.size()) {
    throw DimensionError("cross entropy: logits " + logits.shape().str() + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::int64_t n = logits.dim(0);
  const std::int64_t k = logits.dim(1);
  if (grad != nullptr) *grad = BasicTensor<T>(logits.shape());
  double total = 0.0;
  std::vector<double> p(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < n; ++i) {
    const T* row = logits.ptr() + i * k;
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw SpecError("cross entropy: label out of range");
    double mx = row[0];
    for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double z = 0.0;
    for (std::int64_t j = 0; j < k; ++j) {
      p[j] = std::exp(static_cast<double>(row[j]) - mx);
      z += p[j];
    }
    total += -(static_cast<double>(row[y]) - mx - std::log(z));
    if (grad != nullptr) {
      for (std::int64_t j = 0; j < k; ++j) {
        const double g = (p[j] / z - (j == y ? 1.0 : 0.0)) / static_cast<double>(n);
        (*grad)[static_cast<std::size_t>(i * k + j)] = static_cast<T>(g);
      }
    }
  }
  return total / static_cast<double>(n);
}

template double softmax_cross_entropy(const Tensor&, std::span<const int>, Tensor*);
template double softmax_cross_entropy(const Tensor64&, std::span<const int>, Tensor64*);

namespace {

void check_compat(const Model& model, const Dataset& data) {
  data.validate();
  if (data.n_classes != model.arch().n_classes) {
    throw SpecError("dataset has " + std::to_string(data.n_classes) + " classes, head has " +
                    std::to_string(model.arch().n_classes));
  }
  if (data.channels != model.arch().stem.in_ch) {
    throw SpecError("dataset has " + std::to_string(data.channels) + " channels, stem expects " +
                    std::to_string(model.arch().stem.in_ch));
  }
  if (data.height != data.width) throw SpecError("dataset images must be square");
}

}  // namespace

std::vector<int> predict(const Model& model, const Dataset& data, int batch, ForwardOptions opt) {
  check_compat(model, data);
  std::vector<int> out;
  out.reserve(data.size());
  const std::size_t bs = static_cast<std::size_t>(std::max(batch, 1));
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += bs) {
    idx.clear();
    for (std::size_t i = start; i < std::min(start + bs, data.size()); ++i) idx.push_back(i);
    const Var<float> logits = model.forward(data.batch_images<float>(idx), nullptr, opt);
    const std::int64_t k = logits.shape()[1];
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const float* row = logits.value.ptr() + static_cast<std::int64_t>(b) * k;
      out.push_back(static_cast<int>(std::max_element(row, row + k) - row));
    }
  }
  return out;
}

double evaluate(const Model& model, const Dataset& data, int batch, ForwardOptions opt) {
  if (data.size() == 0) return 0.0;
  const std::vector<int> pred = predict(model, data, batch, opt);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainReport train(Model& model, const Dataset& data, const FineTunePolicy& policy,
                  const TrainConfig& config, const Dataset* eval) {
  if (config.epochs < 1) throw SpecError("train: epochs must be >= 1");
  if (config.batch < 1) throw SpecError("train: batch must be >= 1");
  check_compat(model, data);
  if (data.size() == 0) throw SpecError("train: empty dataset");

  const TrainablePlan plan = apply_policy(model, policy);
  const std::vector<ParamPtr<float>> params = model.parameters();
  std::int64_t lite_scalars = 0;
  if (!config.forward.lite) {
    // Lite branches are absent from the graph and stay frozen.
    for (const ParamPtr<float>& p : params) {
      if (p->group == ParamGroup::kLite && p->trainable) {
        p->trainable = false;
        lite_scalars += p->value.numel();
      }
    }
  }
  if (config.quantize_frozen) quantize_frozen_weights(model);

  TrainReport report;
  report.policy = policy.name();
  report.epochs = config.epochs;
  report.batch = config.batch;
  report.lr0 = config.lr0;
  report.seed = config.seed;
  report.trainable_params = plan.trainable_scalars - lite_scalars;
  report.frozen_params = plan.frozen_scalars + lite_scalars;
  const int res = data.height;

  std::map<int, std::uint64_t> analytic;
  auto analytic_bytes = [&](int b) {
    auto it = analytic.find(b);
    if (it == analytic.end()) {
      it = analytic
               .emplace(b, model_footprint(model.arch(), policy, b, res, config.forward.lite)
                               .activation_bytes)
               .first;
    }
    return it->second;
  };
  report.analytic_activation_bytes = analytic_bytes(config.batch);

  const std::size_t n = data.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch);
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>((n + bs - 1) / bs);
  const std::int64_t total_steps = steps_per_epoch * config.epochs;

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdamState<float> adam;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(start + bs, n);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const std::vector<int> labels = data.batch_labels(idx);

      Tape<float> tape(SaveMode::kSelective);
      const Var<float> logits = model.forward(data.batch_images<float>(idx), &tape, config.forward);
      Tensor grad;
      const double loss = softmax_cross_entropy(logits.value, labels, &grad);
      if (!std::isfinite(loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(step) + " (policy " + policy.name() +
                           ", lr " + std::to_string(cosine_lr(step, total_steps, config.lr0)) +
                           ")");
      }
      const std::uint64_t peak = tape.peak_saved_bytes();
      report.peak_saved_bytes = std::max(report.peak_saved_bytes, peak);
      if (config.check_memory) {
        const std::uint64_t expected = analytic_bytes(static_cast<int>(idx.size()));
        if (peak != expected) {
          throw InvariantError("train: runtime saved bytes " + std::to_string(peak) +
                               " != analytic " + std::to_string(expected) + " at step " +
                               std::to_string(step));
        }
      }
      const GradientSet<float> grads = backward_pass(tape, logits, grad);
      adam_step<float>(params, grads, adam, cosine_lr(step, total_steps, config.lr0),
                       config.adam);
      loss_sum += loss * static_cast<double>(idx.size());
      ++step;
    }
    report.loss_curve.push_back(loss_sum / static_cast<double>(n));
  }
  report.steps = step;
  report.final_loss = report.loss_curve.back();
  report.train_acc = evaluate(model, data, 32, config.forward);
  report.final_acc = eval != nullptr ? evaluate(model, *eval, 32, config.forward) : report.train_acc;
  return report;
}

}  // namespace tinytl
