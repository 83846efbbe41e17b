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


#ifndef TINYTL_PIPELINE_HPP_
#define TINYTL_PIPELINE_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tinytl/dataset.hpp"
#include "tinytl/elastic.hpp"
#include "tinytl/evolution.hpp"
#include "tinytl/predictor.hpp"
#include "tinytl/train.hpp"

namespace tinytl {

// Scores an extracted sub-network on a dataset already resized to the
// configuration's resolution. Must not record a tape.
using SubnetEvaluator =
    std::function<double(const SubNetConfig&, const Model&, const Dataset&)>;

// Top-1 accuracy, forward only.
double accuracy_evaluator(const SubNetConfig& config, const Model& model, const Dataset& data);

struct PipelineConfig {
  int phase1_epochs = 50;  // 0 skips supernet fine-tuning
  int final_epochs = 50;   // 0 skips the final fine-tune
  int batch = 8;
  double lr = 1e-3;
  int n_pairs = 500;
  double val_fraction = 0.2;
  // Predicted top-k configurations re-scored by the evaluator before the
  // winner is chosen. 0 trusts the predictor's argmax.
  int rerank_top_k = 5;
  // Train the largest sub-network on the first step of each phase-1 epoch.
  bool sandwich = true;
  bool check_memory = true;
  PredictorConfig predictor;
  SearchConfig search;
  std::uint64_t seed = 0;
  SubnetEvaluator evaluator;  // empty means accuracy_evaluator
};

struct PhaseCost {
  std::string phase;
  double per_sample_mac = 0.0;
  std::uint64_t samples = 0;
  double fraction = 0.0;
  std::int64_t passes = 0;
  double total_mac = 0.0;
};

struct PipelineCost {
  std::vector<PhaseCost> phases;
  double total_mac = 0.0;
  std::uint64_t phase1_peak_saved_bytes = 0;
  std::uint64_t phase2_peak_saved_bytes = 0;
  std::uint64_t phase3_peak_saved_bytes = 0;
};

// Phase totals: supernet fine-tune at the mean of the smallest and
// largest training MAC, pair collection at the mean inference MAC, and
// the final fine-tune at the winner's training MAC. Per-sample figures
// are batch-1 MACs under TinyTL-L+B.
std::vector<PhaseCost> pipeline_phase_costs(const ElasticSpace& space, const SubNetConfig& winner,
                                            std::uint64_t samples, const PipelineConfig& config);

// Forward-only scoring of n seeded samples. `peak_saved_bytes`, when
// given, receives the largest tape footprint observed during collection.
std::vector<AccuracyPair> collect_pairs(const Supernet& supernet, const Dataset& eval_set, int n,
                                        std::uint64_t seed, const SubnetEvaluator& evaluator = {},
                                        std::uint64_t* peak_saved_bytes = nullptr);

struct PipelineResult {
  SubNetConfig best;
  Model model;  // standalone copy of the winner after the final fine-tune
  std::vector<AccuracyPair> pairs;
  SearchResult search;
  std::vector<std::pair<SubNetConfig, double>> reranked;  // evaluator scores
  std::vector<double> phase1_loss;                        // mean loss per epoch
  TrainReport final_report;
  PipelineCost cost;
};

PipelineResult adapt_pipeline(Supernet& supernet, const Dataset& dataset,
                              const PipelineConfig& config);

}  // namespace tinytl

#endif  // TINYTL_PIPELINE_HPP_
