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


#include "tinytl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "tinytl/errors.hpp"
#include "tinytl/memory_model.hpp"
#include "tinytl/optim.hpp"
#include "tinytl/policy.hpp"

namespace tinytl {

namespace {

class ResizeCache {
 public:
  explicit ResizeCache(const Dataset& data) : data_(data) {}

  const Dataset& at(int resolution) {
    if (resolution == data_.height && resolution == data_.width) return data_;
    auto it = cache_.find(resolution);
    if (it == cache_.end()) it = cache_.emplace(resolution, resize_dataset(data_, resolution)).first;
    return it->second;
  }

 private:
  const Dataset& data_;
  std::map<int, Dataset> cache_;
};

const SubnetEvaluator& or_default(const SubnetEvaluator& e) {
  static const SubnetEvaluator fallback = accuracy_evaluator;
  return e ? e : fallback;
}


struct Phase1Outcome {
  std::vector<double> loss;
  std::uint64_t peak = 0;
};

Phase1Outcome supernet_finetune(Supernet& supernet, const Dataset& train_set,
                                const PipelineConfig& config) {
  Phase1Outcome out;
  if (config.phase1_epochs <= 0 || train_set.size() == 0) return out;
  const ElasticSpace& space = supernet.space;
  const FineTunePolicy lb(PolicyKind::kTinyTLLB);
  apply_policy(supernet.model, lb);
  const std::vector<ParamPtr<float>> params = supernet.model.parameters();
  std::vector<ParamRef<float>> trainable;
  for (const ParamPtr<float>& p : params) {
    if (p->trainable) trainable.emplace_back(p);
  }

  ResizeCache resized(train_set);
  const SubNetConfig largest = largest_subnet(space);
  const std::size_t n = train_set.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch);
  const std::int64_t total_steps =
      static_cast<std::int64_t>((n + bs - 1) / bs) * config.phase1_epochs;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdamState<float> adam;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.phase1_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const SubNetConfig c =
          config.sandwich && start == 0 ? largest : sample_subnet(space, rng);
      const Model sub = subnet_extract(supernet, c);
      const Dataset& data = resized.at(c.resolution);
      const std::size_t end = std::min(start + bs, n);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const std::vector<int> labels = data.batch_labels(idx);

      Tape<float> tape(SaveMode::kSelective);
      const Var<float> logits = sub.forward(data.batch_images<float>(idx), &tape);
      Tensor grad;
      const double loss = softmax_cross_entropy(logits.value, labels, &grad);
      if (!std::isfinite(loss)) {
        throw NumericError("supernet fine-tune: non-finite loss at epoch " +
                           std::to_string(epoch) + ", sub-network " + c.str());
      }
      const std::uint64_t peak = tape.peak_saved_bytes();
      out.peak = std::max(out.peak, peak);
      if (config.check_memory) {
        const std::uint64_t expected =
            model_footprint(subnet_arch(space, c), lb, static_cast<int>(idx.size()),
                            c.resolution)
                .activation_bytes;
        if (peak != expected) {
          throw InvariantError("supernet fine-tune: runtime saved bytes " +
                               std::to_string(peak) + " != analytic " +
                               std::to_string(expected) + " for " + c.str());
        }
      }
      GradientSet<float> grads = backward_pass(tape, logits, grad);
      // Parameters outside the sampled sub-network get a zero gradient.
      for (const ParamRef<float>& r : trainable) grads.ensure(r);
      adam_step<float>(params, grads, adam, cosine_lr(step, total_steps, config.lr));
      loss_sum += loss * static_cast<double>(idx.size());
      ++step;
    }
    out.loss.push_back(loss_sum / static_cast<double>(n));
  }
  return out;
}

}  // namespace

double accuracy_evaluator(const SubNetConfig&, const Model& model, const Dataset& data) {
  return evaluate(model, data);
}

std::vector<PhaseCost> pipeline_phase_costs(const ElasticSpace& space, const SubNetConfig& winner,
                                            std::uint64_t samples, const PipelineConfig& config) {
  const FineTunePolicy lb = FineTunePolicy(PolicyKind::kTinyTLLB);
  const SubNetConfig lo = smallest_subnet(space);
  const SubNetConfig hi = largest_subnet(space);
  auto macs = [&](const SubNetConfig& c, MacMode mode) {
    return static_cast<double>(mac_count(subnet_arch(space, c), mode, lb, 1, c.resolution));
  };
  const double train_fraction = 1.0 - config.val_fraction;

  std::vector<PhaseCost> out(3);
  out[0].phase = "supernet-finetune";
  out[0].per_sample_mac = 0.5 * (macs(lo, MacMode::kTraining) + macs(hi, MacMode::kTraining));
  out[0].fraction = train_fraction;
  out[0].passes = config.phase1_epochs;
  out[1].phase = "pair-collection";
  out[1].per_sample_mac = 0.5 * (macs(lo, MacMode::kInference) + macs(hi, MacMode::kInference));
  out[1].fraction = config.val_fraction;
  out[1].passes = config.n_pairs;
  out[2].phase = "final-finetune";
  out[2].per_sample_mac = macs(winner, MacMode::kTraining);
  out[2].fraction = 1.0;
  out[2].passes = config.final_epochs;
  for (PhaseCost& p : out) {
    p.samples = samples;
    p.total_mac = p.per_sample_mac * static_cast<double>(samples) * p.fraction *
                  static_cast<double>(p.passes);
  }
  return out;
}

std::vector<AccuracyPair> collect_pairs(const Supernet& supernet, const Dataset& eval_set, int n,
                                        std::uint64_t seed, const SubnetEvaluator& evaluator,
                                        std::uint64_t* peak_saved_bytes) {
  if (n < 0) throw SpecError("collect_pairs: n must be >= 0");
  if (n > 0 && eval_set.size() == 0) throw SpecError("collect_pairs: empty evaluation set");
  const SubnetEvaluator& eval = or_default(evaluator);
  ResizeCache resized(eval_set);
  std::mt19937_64 rng(seed);

  const std::size_t base = live_saved_bytes_all_tapes<float>();
  reset_peak_saved_bytes_all_tapes<float>();
  std::vector<AccuracyPair> pairs;
  pairs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    SubNetConfig c = sample_subnet(supernet.space, rng);
    const Model sub = subnet_extract(supernet, c);
    const double acc = eval(c, sub, resized.at(c.resolution));
    pairs.push_back({std::move(c), acc});
  }
  if (peak_saved_bytes != nullptr) {
    *peak_saved_bytes = peak_saved_bytes_all_tapes<float>() - base;
  }
  return pairs;
}

PipelineResult adapt_pipeline(Supernet& supernet, const Dataset& dataset,
                              const PipelineConfig& config) {
  const ElasticSpace& space = supernet.space;
  space.validate();
  config.search.validate();
  if (!(config.val_fraction > 0.0 && config.val_fraction < 1.0)) {
    throw SpecError("adapt_pipeline: val_fraction must lie in (0, 1)");
  }
  if (config.batch < 1) throw SpecError("adapt_pipeline: batch must be >= 1");
  if (config.rerank_top_k < 0) throw SpecError("adapt_pipeline: rerank_top_k must be >= 0");
  dataset.validate();
  if (dataset.size() < 2) throw SpecError("adapt_pipeline: need at least 2 samples");

  auto [val, train_set] = split_dataset(dataset, config.val_fraction, config.seed);
  if (val.size() == 0) throw SpecError("adapt_pipeline: validation split is empty");

  PipelineResult r;
  const Phase1Outcome p1 = supernet_finetune(supernet, train_set, config);
  r.phase1_loss = p1.loss;
  r.cost.phase1_peak_saved_bytes = p1.peak;

  std::uint64_t peak = 0;
  r.pairs = collect_pairs(supernet, val, config.n_pairs, config.seed + 1, config.evaluator, &peak);
  r.cost.phase2_peak_saved_bytes = peak;
  const AccuracyPredictor predictor = predictor_train(r.pairs, space, config.predictor);
  r.search = evolve(predictor, space, config.search);

  r.best = r.search.best;
  if (config.rerank_top_k > 0) {
    std::vector<SubNetConfig> candidates;
    const std::size_t k =
        std::min(r.search.ranked.size(), static_cast<std::size_t>(config.rerank_top_k));
    for (std::size_t i = 0; i < k; ++i) candidates.push_back(r.search.ranked[i].first);
    std::map<SubNetConfig, double> measured;
    const AccuracyPair* top = nullptr;
    for (const AccuracyPair& p : r.pairs) {
      measured.emplace(p.config, p.accuracy);
      if (top == nullptr || p.accuracy > top->accuracy) top = &p;
    }
    if (top != nullptr && std::find(candidates.begin(), candidates.end(), top->config) ==
                              candidates.end()) {
      candidates.push_back(top->config);
    }

    const SubnetEvaluator& eval = or_default(config.evaluator);
    ResizeCache resized(val);
    const std::size_t base = live_saved_bytes_all_tapes<float>();
    reset_peak_saved_bytes_all_tapes<float>();
    double best_score = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const SubNetConfig& c = candidates[i];
      auto it = measured.find(c);
      const double score = it != measured.end()
                               ? it->second
                               : eval(c, subnet_extract(supernet, c), resized.at(c.resolution));
      r.reranked.emplace_back(c, score);
      if (i == 0 || score > best_score) {
        best_score = score;
        r.best = c;
      }
    }
    r.cost.phase2_peak_saved_bytes = std::max<std::uint64_t>(
        r.cost.phase2_peak_saved_bytes, peak_saved_bytes_all_tapes<float>() - base);
  }

  r.model = subnet_extract(supernet, r.best).materialize();
  if (config.final_epochs > 0) {
    ResizeCache resized(dataset);
    TrainConfig tc;
    tc.epochs = config.final_epochs;
    tc.batch = config.batch;
    tc.lr0 = config.lr;
    tc.seed = config.seed + 2;
    tc.check_memory = config.check_memory;
    r.final_report = train(r.model, resized.at(r.best.resolution),
                           FineTunePolicy(PolicyKind::kTinyTLLB), tc);
    r.cost.phase3_peak_saved_bytes = r.final_report.peak_saved_bytes;
  }

  r.cost.phases = pipeline_phase_costs(space, r.best, dataset.size(), config);
  for (const PhaseCost& p : r.cost.phases) r.cost.total_mac += p.total_mac;
  return r;
}

}  // namespace tinytl
