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


#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tinytl/arch.hpp"
#include "tinytl/elastic.hpp"
#include "tinytl/evolution.hpp"
#include "tinytl/layers.hpp"
#include "tinytl/memory_model.hpp"
#include "tinytl/model.hpp"
#include "tinytl/policy.hpp"
#include "tinytl/quantize.hpp"
#include "tinytl/train.hpp"

namespace {

using namespace tinytl;

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  Tensor t(shape);
  for (auto& v : t.data()) v = g(rng);
  return t;
}

// Conv forward; args: channels, spatial size, kernel, depthwise.
void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  ConvSpec spec;
  spec.in_ch = spec.out_ch = c;
  spec.kernel = static_cast<int>(state.range(2));
  spec.groups = state.range(3) != 0 ? c : 1;
  const auto w = make_parameter<float>(
      "w", ParamGroup::kWeight,
      random_tensor(Shape{c, c / spec.groups, spec.kernel, spec.kernel}, 1));
  const ParamRef<float> weight(w);
  const Var<float> x = Var<float>::constant(random_tensor(Shape{8, c, hw, hw}, 2));
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d<float>(x, spec, weight, ParamRef<float>{}, TrainMask{}, nullptr).value);
  }
  const double macs = 8.0 * c * (c / spec.groups) * spec.kernel * spec.kernel * hw * hw;
  state.counters["MAC/s"] = benchmark::Counter(macs, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv2dForward)
    ->Args({48, 28, 1, 0})
    ->Args({48, 28, 3, 1})
    ->Args({48, 28, 5, 1})
    ->Args({16, 56, 3, 0})
    ->Unit(benchmark::kMicrosecond);

// One forward and backward step of the reference model per policy.
void BM_TrainStep(benchmark::State& state) {
  const auto policy = named_policies()[static_cast<std::size_t>(state.range(0))];
  const Model m = build_backbone<float>(reference_tiny_arch(4), 4, InitStrategy::kRandomZeroScale, 1);
  apply_policy(m, policy);
  const Tensor x = random_tensor(Shape{8, 3, 64, 64}, 3);
  const std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3};
  for (auto _ : state) {
    Tape<float> tape;
    const Var<float> logits = m.forward(x, &tape);
    Tensor grad;
    softmax_cross_entropy<float>(logits.value, labels, &grad);
    benchmark::DoNotOptimize(backward_pass(tape, logits, grad));
  }
  state.SetLabel(policy.name());
}
BENCHMARK(BM_TrainStep)->DenseRange(0, 5)->Unit(benchmark::kMillisecond);

void BM_InferenceForward(benchmark::State& state) {
  const Model m = build_backbone<float>(reference_tiny_arch(4), 4, InitStrategy::kRandomZeroScale, 1);
  const Tensor x = random_tensor(Shape{8, 3, 64, 64}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x, nullptr).value);
}
BENCHMARK(BM_InferenceForward)->Unit(benchmark::kMillisecond);

void BM_ModelFootprint(benchmark::State& state) {
  const ArchitectureSpec arch = reference_tiny_arch(10);
  const FineTunePolicy policy(PolicyKind::kTinyTLLB);
  for (auto _ : state) benchmark::DoNotOptimize(model_footprint(arch, policy, 8, 224));
}
BENCHMARK(BM_ModelFootprint);

void BM_Quantize8(benchmark::State& state) {
  const Tensor w = random_tensor(Shape{state.range(0)}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(quantize8(w).dequantize());
  state.SetBytesProcessed(state.iterations() * state.range(0) * 4);
}
BENCHMARK(BM_Quantize8)->Arg(1 << 12)->Arg(1 << 18);

void BM_Evolve(benchmark::State& state) {
  ElasticSpace space;
  space.n_classes = 4;
  space.resolutions = {32};
  SearchConfig sc;
  sc.seed = 1;
  const auto score = [&](const SubNetConfig& c) {
    double s = 0;
    for (const auto& v : encode_arch(c, space)) s += v;
    return s;
  };
  for (auto _ : state) benchmark::DoNotOptimize(evolve(score, space, sc).best_score);
}
BENCHMARK(BM_Evolve)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
