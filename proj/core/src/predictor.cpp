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

#include "tinytl/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tinytl/errors.hpp"
#include "tinytl/layers.hpp"
#include "tinytl/optim.hpp"

namespace tinytl {
namespace {

ParamPtr<float> he_param(const std::string& name, std::int64_t in, std::int64_t out,
                         std::mt19937_64& rng) {
  Tensor w(Shape{in, out});
  std::normal_distribution<double> d(0.0, std::sqrt(2.0 / static_cast<double>(in)));
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = static_cast<float>(d(rng));
  return make_parameter<float>(name, ParamGroup::kHead, std::move(w), true);
}

ParamPtr<float> zero_param(const std::string& name, std::int64_t n) {
  return make_parameter<float>(name, ParamGroup::kHead, Tensor(Shape{n}), true);
}

Tensor stack(const std::vector<std::vector<float>>& rows, std::span<const std::size_t> idx,
             std::size_t width) {
  Tensor t(Shape{static_cast<std::int64_t>(idx.size()), static_cast<std::int64_t>(width)});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& row = rows[idx[r]];
    if (row.size() != width) throw DimensionError("predictor: encoding width mismatch");
    std::copy(row.begin(), row.end(), t.ptr() + r * width);
  }
  return t;
}

}  // namespace

AccuracyPredictor::AccuracyPredictor(std::size_t input_width, int hidden, std::uint64_t seed)
    : width_(input_width), hidden_(hidden) {
  if (input_width == 0 || hidden < 1) throw SpecError("predictor: empty layer");
  std::mt19937_64 rng(seed);
  const auto d = static_cast<std::int64_t>(input_width);
  params_ = {he_param("pred.l1.weight", d, hidden, rng),      zero_param("pred.l1.bias", hidden),
             he_param("pred.l2.weight", hidden, hidden, rng), zero_param("pred.l2.bias", hidden),
             he_param("pred.l3.weight", hidden, 1, rng),      zero_param("pred.l3.bias", 1)};
}

Var<float> AccuracyPredictor::forward(const Tensor& x, Tape<float>* tape) const {
  const TrainMask all{true, true};
  Var<float> h = linear_forward(Var<float>::constant(x), ParamRef<float>(params_[0]),
                                ParamRef<float>(params_[1]), all, tape, "pred.l1");
  h = activation(h, ActKind::kReLU, tape);
  h = linear_forward(h, ParamRef<float>(params_[2]), ParamRef<float>(params_[3]), all, tape,
                     "pred.l2");
  h = activation(h, ActKind::kReLU, tape);
  return linear_forward(h, ParamRef<float>(params_[4]), ParamRef<float>(params_[5]), all, tape,
                        "pred.l3");
}

std::vector<double> AccuracyPredictor::fit(const std::vector<std::vector<float>>& x,
                                           const std::vector<double>& y,
                                           const PredictorConfig& config) {
  if (x.size() != y.size() || x.size() < 2) {
    throw SpecError("predictor: need at least 2 matching samples");
  }
  const double n = static_cast<double>(y.size());
  mean_ = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double var = 0.0;
  for (double v : y) var += (v - mean_) * (v - mean_);
  const double sd = std::sqrt(var / n);
  // Identical targets fit the constant exactly.
  scale_ = sd > 1e-12 ? sd : 0.0;

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = static_cast<std::size_t>(std::max(config.batch, 1));
  AdamState<float> adam;
  std::vector<double> curve;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sse = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min(bs, order.size() - start));
      Tape<float> tape;
      const Var<float> out = forward(stack(x, idx, width_), &tape);
      Tensor grad(out.shape());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const double target = scale_ > 0.0 ? (y[idx[r]] - mean_) / scale_ : 0.0;
        const double diff = static_cast<double>(out.value[r]) - target;
        sse += diff * diff;
        grad[r] = static_cast<float>(2.0 * diff / static_cast<double>(idx.size()));
      }
      const GradientSet<float> g = backward_pass(tape, out, grad);
      adam_step<float>(params_, g, adam, config.lr);
    }
    curve.push_back(sse / n);
  }
  return curve;
}

std::vector<double> AccuracyPredictor::predict(
    const std::vector<std::vector<float>>& encodings) const {
  std::vector<double> out;
  out.reserve(encodings.size());
  const std::size_t chunk = 256;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < encodings.size(); start += chunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(start + chunk, encodings.size()); ++i) idx.push_back(i);
    const Var<float> o = forward(stack(encodings, idx, width_), nullptr);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.push_back(mean_ + scale_ * static_cast<double>(o.value[r]));
    }
  }
  return out;
}

double AccuracyPredictor::predict(std::span<const float> encoding) const {
  return predict(std::vector<std::vector<float>>{
      std::vector<float>(encoding.begin(), encoding.end())})[0];
}

std::int64_t AccuracyPredictor::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += static_cast<std::int64_t>(p->value.numel());
  return n;
}

std::int64_t AccuracyPredictor::inference_mac() const {
  const auto d = static_cast<std::int64_t>(width_);
  return d * hidden_ + static_cast<std::int64_t>(hidden_) * hidden_ + hidden_;
}

AccuracyPredictor predictor_train(const std::vector<AccuracyPair>& pairs,
                                  const ElasticSpace& space, const PredictorConfig& config) {
  if (pairs.size() < 2) throw SpecError("predictor_train: need at least 2 pairs");
  std::vector<std::vector<float>> x;
  std::vector<double> y;
  for (const auto& p : pairs) {
    x.push_back(encode_arch(p.config, space));
    y.push_back(p.accuracy);
  }
  AccuracyPredictor pred(encoding_width(space), config.hidden, config.seed);
  pred.fit(x, y, config);
  return pred;
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("kendall_tau: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  std::int64_t s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double prod = (a[i] - a[j]) * (b[i] - b[j]);
      if (prod > 0) ++s;
      if (prod < 0) --s;
    }
  }
  return static_cast<double>(s) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

}  // namespace tinytl
