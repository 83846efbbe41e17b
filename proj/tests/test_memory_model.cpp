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


#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tinytl/arch.hpp"
#include "tinytl/errors.hpp"
#include "tinytl/memory_model.hpp"
#include "tinytl/model.hpp"
#include "tinytl/policy.hpp"
#include "tinytl/quantize.hpp"

namespace tinytl {
namespace {

// Golden headline footprints of the reference arch at batch 8, res 224.
constexpr std::uint64_t kGoldenFullBytes = 354127920;
constexpr std::uint64_t kGoldenLiteBiasBytes = 178420232;

LayerDesc desc(OpKind kind, Shape input, bool weight_trainable, bool rg = false) {
  LayerDesc d;
  d.name = "x";
  d.kind = kind;
  d.input = input;
  d.output = input;
  d.weight_trainable = weight_trainable;
  d.input_requires_grad = rg;
  return d;
}

TEST(LayerActivationBytes, FrozenConvSavesNothing) {
  EXPECT_EQ(layer_activation_bytes(desc(OpKind::kConv2d, Shape{64, 56, 56}, false, true), 8), 0u);
  EXPECT_EQ(layer_activation_bytes(desc(OpKind::kLinear, Shape{64}, false, true), 8), 0u);
}

TEST(LayerActivationBytes, ReluIsOneBitPerElement) {
  EXPECT_EQ(layer_activation_bytes(desc(OpKind::kReLU, Shape{32, 56, 56}, false), 8), 100352u);
}

TEST(LayerActivationBytes, TrainableConvIsFourBytesPerElement) {
  EXPECT_EQ(layer_activation_bytes(desc(OpKind::kConv2d, Shape{16, 28, 28}, true), 8), 401408u);
}

TEST(LayerActivationBytes, OtherKinds) {
  const Shape s{4, 5, 5};
  EXPECT_EQ(layer_activation_bytes(desc(OpKind::kSigmoid, s, false), 2), 800u);
  EXPECT_EQ(layer_activation_bytes(desc(OpKind::kHSwish, s, false), 2), 800u);
  EXPECT_EQ(layer_activation_bytes(desc(OpKind::kGroupNorm, s, true), 2), 800u);
  EXPECT_EQ(layer_activation_bytes(desc(OpKind::kGroupNorm, s, false), 2), 0u);
  for (OpKind k : {OpKind::kBiasAdd, OpKind::kAvgPool2, OpKind::kUpsample, OpKind::kAdd,
                   OpKind::kGlobalAvgPool}) {
    EXPECT_EQ(layer_activation_bytes(desc(k, s, true, true), 2), 0u);
  }
  EXPECT_THROW(layer_activation_bytes(desc(OpKind::kReLU, s, false), 0), SpecError);
}

TEST(ModelFootprint, TotalsAreColumnSums) {
  const auto arch = reference_tiny_arch(10);
  for (const auto& policy : named_policies()) {
    const MemoryReport r = model_footprint(arch, policy, 8, 224);
    std::uint64_t a = 0, f = 0, t = 0, o = 0;
    for (const auto& row : r.rows) {
      a += row.saved_activation_bytes;
      f += row.frozen_param_bytes;
      t += row.trainable_param_bytes;
      o += row.optimizer_state_bytes;
      EXPECT_EQ(row.optimizer_state_bytes, 2 * row.trainable_param_bytes);
    }
    EXPECT_EQ(r.activation_bytes, a);
    EXPECT_EQ(r.frozen_param_bytes, f);
    EXPECT_EQ(r.trainable_param_bytes, t);
    EXPECT_EQ(r.optimizer_state_bytes, o);
    EXPECT_EQ(r.headline_bytes(), a + f + t);
    const auto scalars = static_cast<std::uint64_t>(parameter_count(arch));
    EXPECT_EQ(f + t / 4, scalars);
  }
}

TEST(ModelFootprint, FtLastVersusLiteBias) {
  const auto arch = reference_tiny_arch(10);
  const MemoryReport last = model_footprint(arch, FineTunePolicy(PolicyKind::kFTLast), 8, 224);
  const MemoryReport lb = model_footprint(arch, FineTunePolicy(PolicyKind::kTinyTLLB), 8, 224);
  EXPECT_GT(lb.activation_bytes, last.activation_bytes);
  std::uint64_t lite_rows = 0;
  for (const auto& row : lb.rows) {
    if (row.layer.find(".lite") != std::string::npos) lite_rows += row.saved_activation_bytes;
    if (row.kind == "conv2d" && row.layer.find(".lite") == std::string::npos) {
      EXPECT_EQ(row.saved_activation_bytes, 0u) << row.layer;
    }
  }
  EXPECT_GT(lite_rows, 0u);
  const double overhead = static_cast<double>(lb.headline_bytes() - last.headline_bytes()) /
                          static_cast<double>(last.headline_bytes());
  RecordProperty("lite_bias_overhead_fraction", std::to_string(overhead));
  EXPECT_GT(overhead, 0.0);
}

TEST(ModelFootprint, GoldenHeadlineRatio) {
  const auto arch = reference_tiny_arch(4);
  const auto full = model_footprint(arch, FineTunePolicy(PolicyKind::kFTFull), 8, 224);
  const auto lb = model_footprint(arch, FineTunePolicy(PolicyKind::kTinyTLLB), 8, 224);
  EXPECT_EQ(full.headline_bytes(), kGoldenFullBytes);
  EXPECT_EQ(lb.headline_bytes(), kGoldenLiteBiasBytes);
}

TEST(ModelFootprint, LinearInBatchAndParamsIndependent) {
  const auto arch = reference_tiny_arch(10);
  for (const auto& policy : named_policies()) {
    const auto r1 = model_footprint(arch, policy, 4, 160);
    const auto r2 = model_footprint(arch, policy, 8, 160);
    const auto r3 = model_footprint(arch, policy, 8, 224);
    EXPECT_EQ(r2.activation_bytes, 2 * r1.activation_bytes) << policy.name();
    EXPECT_EQ(r1.param_bytes(), r2.param_bytes());
    EXPECT_EQ(r2.param_bytes(), r3.param_bytes());
    EXPECT_EQ(r1.optimizer_state_bytes, r3.optimizer_state_bytes);
  }
}

// With every feature-extractor parameter frozen only ReLU masks and the
// head input remain, whatever the conv widths are.
TEST(ModelFootprint, FrozenPolicyCountsOnlyActivationMasksAndHead) {
  auto arch = reference_tiny_arch(10);
  const auto r = model_footprint(arch, FineTunePolicy(PolicyKind::kFTLast), 2, 64);
  std::uint64_t masks = 0, head = 0;
  for (const auto& row : r.rows) {
    if (row.kind == "relu") masks += row.saved_activation_bytes;
    if (row.layer == "head") head += row.saved_activation_bytes;
  }
  EXPECT_EQ(head, 4u * 2 * 48);
  EXPECT_EQ(r.activation_bytes, masks + head);
}

TEST(ModelFootprint, AnalyticEqualsRuntimeTape) {
  const auto arch = reference_tiny_arch(4);
  const Model m = build_backbone<float>(arch, 4, InitStrategy::kRandomZeroScale, 1);
  for (const auto& policy : named_policies()) {
    apply_policy(m, policy);
    for (int batch : {1, 3}) {
      for (int res : {32, 37}) {
        for (bool lite : {true, false}) {
          Tape<float> tape;
          m.forward(testing::random_tensor<float>(Shape{batch, 3, res, res}, 7), &tape,
                    ForwardOptions{lite});
          EXPECT_EQ(saved_bytes(tape),
                    model_footprint(arch, policy, batch, res, lite).activation_bytes)
              << policy.name() << " b" << batch << " r" << res << " lite " << lite;
        }
      }
    }
  }
}

TEST(LiteOverheadRatio, CanonicalBlockArithmetic) {
  MBBlockSpec blk{32, 32, 6, 3, 1, LiteResidualSpec{2, 5, 2}};
  const double full = lite_overhead_ratio(blk, 56, 56);
  EXPECT_GE(full, 21.0);
  EXPECT_LE(full, 31.0);
  EXPECT_EQ(lite_overhead_ratio(blk, 56, 56, RatioPart::kChannelOnly), 6.5);
  EXPECT_EQ(lite_overhead_ratio(blk, 56, 56, RatioPart::kDownsampleOnly), 4.0);
  EXPECT_EQ(full, 26.0);
  EXPECT_THROW(lite_overhead_ratio(blk, 0, 4), SpecError);
}

TEST(MacCount, FrozenWeightPoliciesRoughlyDouble) {
  const auto arch = reference_tiny_arch(10);
  for (PolicyKind k : {PolicyKind::kFTLast, PolicyKind::kTinyTLB, PolicyKind::kFTNormLast}) {
    const FineTunePolicy p(k);
    const double ratio = static_cast<double>(mac_count(arch, MacMode::kTraining, p, 8, 224)) /
                         static_cast<double>(mac_count(arch, MacMode::kInference, p, 8, 224));
    EXPECT_GE(ratio, 1.9) << p.name();
    EXPECT_LE(ratio, 2.1) << p.name();
  }
}

TEST(MacCount, FullyTrainableRoughlyTriple) {
  const auto arch = reference_tiny_arch(10);
  const FineTunePolicy p(PolicyKind::kFTFull);
  const double ratio = static_cast<double>(mac_count(arch, MacMode::kTraining, p, 8, 224)) /
                       static_cast<double>(mac_count(arch, MacMode::kInference, p, 8, 224));
  EXPECT_GE(ratio, 2.7);
  EXPECT_LE(ratio, 3.0);
}

TEST(MacCount, PointwiseConvClosedForm) {
  // A block whose projection is a 1x1 conv from 16 to 32 channels at 28x28.
  ArchitectureSpec arch = make_uniform_arch(StemSpec{3, 4, 3, 1}, {32, 32, 32, 32, 32},
                                            {1, 1, 1, 1, 1}, 2, 4, 3, LiteResidualSpec{}, 10, 28);
  arch.norm.channels_per_group = 4;
  arch.validate();
  std::int64_t mac = -1;
  for (const auto& d : trace_layers(arch, FineTunePolicy(PolicyKind::kFTLast), 28)) {
    if (d.name == "s0.b0.project.conv") mac = d.forward_mac;
  }
  EXPECT_EQ(8 * mac, 3211264);
}

TEST(MacCount, LinearInBatchAndTrainingAtLeastInference) {
  const auto arch = reference_tiny_arch(10);
  for (const auto& p : named_policies()) {
    const auto i1 = mac_count(arch, MacMode::kInference, p, 1, 128);
    EXPECT_EQ(mac_count(arch, MacMode::kInference, p, 8, 128), 8 * i1);
    EXPECT_GE(mac_count(arch, MacMode::kTraining, p, 1, 128), i1);
    const CostReport c = cost_report(arch, p, 2, 128);
    EXPECT_GE(c.training_mac, c.inference_mac);
  }
}

// Training MACs grow with the trainable set.
TEST(MacCount, MonotoneInTrainableSet) {
  const auto arch = reference_tiny_arch(10);
  const std::vector<ParamGroup> groups{ParamGroup::kWeight, ParamGroup::kBias, ParamGroup::kNorm,
                                       ParamGroup::kLite};
  auto policy_of = [&](unsigned mask) {
    std::set<ParamGroup> s;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (mask & (1u << i)) s.insert(groups[i]);
    }
    return FineTunePolicy::custom(s);
  };
  for (unsigned a = 0; a < 16; ++a) {
    for (unsigned b = 0; b < 16; ++b) {
      if ((a & b) != b) continue;
      EXPECT_GE(mac_count(arch, MacMode::kTraining, policy_of(a), 2, 96),
                mac_count(arch, MacMode::kTraining, policy_of(b), 2, 96))
          << a << " vs " << b;
      EXPECT_GE(model_footprint(arch, policy_of(a), 2, 96).activation_bytes,
                model_footprint(arch, policy_of(b), 2, 96).activation_bytes);
    }
  }
}

TEST(Quantize8, EndpointsExact) {
  const Tensor w(Shape{2}, {-1.0f, 1.0f});
  const Tensor r = quantize8(w).dequantize();
  EXPECT_EQ(r[0], -1.0f);
  EXPECT_EQ(r[1], 1.0f);
}

TEST(Quantize8, ConstantTensorExact) {
  const Tensor w(Shape{3, 3}, 0.123f);
  const Quantized8 q = quantize8(w);
  EXPECT_EQ(q.scale, 0.0);
  EXPECT_TRUE(testing::bit_equal(q.dequantize(), w));
}

TEST(Quantize8, HalfStepBoundOnUniformTensor) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  Tensor w(Shape{10000});
  for (auto& v : w.data()) v = u(rng);
  const Quantized8 q = quantize8(w);
  const Tensor r = q.dequantize();
  EXPECT_LE(testing::max_abs_diff(r, w), 4.0 / 255.0 / 2.0 * (1 + 1e-6));
  EXPECT_LE(testing::max_abs_diff(r, w), q.scale / 2.0 * (1 + 1e-6));
}

TEST(Quantize8, NonFiniteRejected) {
  Tensor w(Shape{2}, {0.0f, std::nanf("")});
  EXPECT_THROW(quantize8(w), NumericError);
}

TEST(Quantize8, OnlyFrozenConvWeightsAreQuantized) {
  const Model m = build_backbone<float>(reference_tiny_arch(4), 4, InitStrategy::kRandomZeroScale, 1);
  apply_policy(m, FineTunePolicy(PolicyKind::kTinyTLLB));
  std::vector<Tensor> before;
  for (const auto& p : m.parameters()) before.push_back(p->value);
  const int n = quantize_frozen_weights(m);
  EXPECT_EQ(n, 1 + 5 * 2 * 3);
  const auto ps = m.parameters();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const bool frozen_weight = ps[i]->group == ParamGroup::kWeight;
    if (!frozen_weight) EXPECT_TRUE(testing::bit_equal(before[i], ps[i]->value)) << ps[i]->name;
    EXPECT_TRUE(testing::bit_equal(quantize8(ps[i]->value).dequantize(), ps[i]->value) ||
                !frozen_weight);
  }
}

}  // namespace
}  // namespace tinytl
