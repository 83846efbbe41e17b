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

#ifndef TINYTL_PREDICTOR_HPP_
#define TINYTL_PREDICTOR_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "tinytl/elastic.hpp"
#include "tinytl/tape.hpp"

namespace tinytl {

struct AccuracyPair {
  SubNetConfig config;
  double accuracy = 0.0;  // top-1 in [0, 1]
};

struct PredictorConfig {
  int hidden = 400;
  int epochs = 200;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

// Three-layer MLP (D -> H -> H -> 1, ReLU) from architecture encodings to
// accuracy. Targets are standardized internally.
class AccuracyPredictor {
 public:
  AccuracyPredictor(std::size_t input_width, int hidden, std::uint64_t seed);

  // Mean squared error per epoch.
  std::vector<double> fit(const std::vector<std::vector<float>>& x, const std::vector<double>& y,
                          const PredictorConfig& config);

  double predict(std::span<const float> encoding) const;
  std::vector<double> predict(const std::vector<std::vector<float>>& encodings) const;

  std::size_t input_width() const { return width_; }
  int hidden() const { return hidden_; }
  std::int64_t parameter_count() const;
  std::int64_t inference_mac() const;
  const std::vector<ParamPtr<float>>& parameters() const { return params_; }

  static std::int64_t closed_form_parameter_count(std::int64_t width, std::int64_t hidden) {
    return width * hidden + hidden + hidden * hidden + hidden + hidden + 1;
  }

 private:
  Var<float> forward(const Tensor& x, Tape<float>* tape) const;

  std::size_t width_;
  int hidden_;
  std::vector<ParamPtr<float>> params_;  // w1 b1 w2 b2 w3 b3
  double mean_ = 0.0;
  double scale_ = 1.0;
};

// Throws SpecError with fewer than 2 pairs.
AccuracyPredictor predictor_train(const std::vector<AccuracyPair>& pairs,
                                  const ElasticSpace& space, const PredictorConfig& config);

// Kendall rank correlation (tau-a).
double kendall_tau(std::span<const double> a, std::span<const double> b);

}  // namespace tinytl

#endif  // TINYTL_PREDICTOR_HPP_
