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

#ifndef TINYTL_MEMORY_MODEL_HPP_
#define TINYTL_MEMORY_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "tinytl/arch.hpp"
#include "tinytl/model.hpp"
#include "tinytl/policy.hpp"
#include "tinytl/tape.hpp"

namespace tinytl {

// One op of the symbolic graph, at batch 1.
struct LayerDesc {
  std::string name;
  OpKind kind = OpKind::kAdd;
  Shape input;   // per-sample input shape
  Shape output;  // per-sample output shape
  // conv/linear weight, or norm scale
  bool weight_trainable = false;
  // whether a gradient reaches the op's input
  bool input_requires_grad = false;
  std::int64_t forward_mac = 0;  // per sample
  std::int64_t frozen_params = 0;
  std::int64_t trainable_params = 0;
};

// Bytes the op saves for backward at the given batch, following the same
// rules as the runtime tape in SaveMode::kSelective.
std::uint64_t layer_activation_bytes(const LayerDesc& layer, int batch);

// Walks the graph `BasicModel::forward` records, without running it.
std::vector<LayerDesc> trace_layers(const ArchitectureSpec& arch, const FineTunePolicy& policy,
                                    int resolution, bool lite = true);

struct MemoryRow {
  std::string layer;
  std::string kind;
  std::uint64_t saved_activation_bytes = 0;
  std::uint64_t frozen_param_bytes = 0;     // 8-bit
  std::uint64_t trainable_param_bytes = 0;  // 32-bit
  std::uint64_t optimizer_state_bytes = 0;  // two Adam moments
};

struct MemoryReport {
  std::string policy;
  int batch = 0;
  int resolution = 0;
  std::vector<MemoryRow> rows;
  std::uint64_t activation_bytes = 0;
  std::uint64_t frozen_param_bytes = 0;
  std::uint64_t trainable_param_bytes = 0;
  std::uint64_t optimizer_state_bytes = 0;

  std::uint64_t param_bytes() const { return frozen_param_bytes + trainable_param_bytes; }
  // Activations plus parameters; optimizer state is reported separately.
  std::uint64_t headline_bytes() const { return activation_bytes + param_bytes(); }
};

MemoryReport model_footprint(const ArchitectureSpec& arch, const FineTunePolicy& policy,
                             int batch, int resolution, bool lite = true);

template <typename T>
MemoryReport model_footprint(const BasicModel<T>& model, const FineTunePolicy& policy, int batch,
                             int resolution) {
  return model_footprint(model.arch(), policy, batch, resolution);
}

enum class MacMode { kInference, kTraining };

// Conv: out_elems * k^2 * in_ch / groups. Linear: D_in * D_out. Upsample: 4
// per output element. Training adds an input-gradient pass for every layer
// and a weight-gradient pass for trainable weights.
std::uint64_t mac_count(const ArchitectureSpec& arch, MacMode mode, const FineTunePolicy& policy,
                        int batch, int resolution, bool lite = true);

struct CostReport {
  std::uint64_t inference_mac = 0;
  std::uint64_t training_mac = 0;
  MemoryReport memory;
};

CostReport cost_report(const ArchitectureSpec& arch, const FineTunePolicy& policy, int batch,
                       int resolution);

enum class RatioPart { kFull, kChannelOnly, kDownsampleOnly };

// Saved feature maps of the inverted bottleneck (block input, expanded map,
// depthwise output) over those of the lite branch (pooled input and conv
// output). kChannelOnly evaluates the lite branch without its pooling,
// kDownsampleOnly isolates the pooling factor.
double lite_overhead_ratio(const MBBlockSpec& block, int h, int w,
                           RatioPart part = RatioPart::kFull);

}  // namespace tinytl

#endif  // TINYTL_MEMORY_MODEL_HPP_
