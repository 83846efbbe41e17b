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

#ifndef TINYTL_ARCH_HPP_
#define TINYTL_ARCH_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "tinytl/layers.hpp"

namespace tinytl {

// Parallel branch added to every block: 2x2 pool, one group conv, GN, bias,
// ReLU, bilinear upsample back to the block's output size.
struct LiteResidualSpec {
  int groups = 2;
  int kernel = 5;
  int downsample = 2;  // fixed

  friend bool operator==(const LiteResidualSpec&, const LiteResidualSpec&) = default;
};

// Mobile inverted bottleneck: expand 1x1 -> depthwise kxk -> project 1x1.
struct MBBlockSpec {
  int in_ch = 0;
  int out_ch = 0;
  int expand = 6;
  int kernel = 3;
  int stride = 1;
  LiteResidualSpec lite;

  int expanded() const { return in_ch * expand; }
  bool has_skip() const { return stride == 1 && in_ch == out_ch; }

  friend bool operator==(const MBBlockSpec&, const MBBlockSpec&) = default;
};

struct StemSpec {
  int in_ch = 3;
  int out_ch = 8;
  int kernel = 3;
  int stride = 2;

  friend bool operator==(const StemSpec&, const StemSpec&) = default;
};

struct StageSpec {
  std::vector<MBBlockSpec> blocks;  // size is the stage depth

  int depth() const { return static_cast<int>(blocks.size()); }
  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

inline constexpr int kNumStages = 5;

struct ArchitectureSpec {
  int version = 1;
  StemSpec stem;
  std::vector<StageSpec> stages;
  int n_classes = 10;
  int resolution = 224;
  NormSpec norm;

  // Throws SpecError naming the offending stage/block.
  void validate() const;

  int feature_channels() const;
  // Spatial size after the stem and all stages for an input of size `res`.
  int output_size(int res) const;

  friend bool operator==(const ArchitectureSpec& a, const ArchitectureSpec& b) {
    return a.version == b.version && a.stem == b.stem && a.stages == b.stages &&
           a.n_classes == b.n_classes && a.resolution == b.resolution &&
           a.norm.channels_per_group == b.norm.channels_per_group && a.norm.eps == b.norm.eps;
  }
};

// Uniform architecture: `widths` are the stage output channels, every stage
// has `depth` identical blocks, the first block of a stage carries the
// stage stride.
ArchitectureSpec make_uniform_arch(const StemSpec& stem, const std::vector<int>& widths,
                                   const std::vector<int>& strides, int depth, int expand,
                                   int kernel, LiteResidualSpec lite, int n_classes,
                                   int resolution);

// The bundled reference-tiny backbone (widths 8, 16, 24, 32, 48).
ArchitectureSpec reference_tiny_arch(int n_classes = 10);

// Scalar parameter count, lite branches included.
std::int64_t parameter_count(const ArchitectureSpec& arch);

}  // namespace tinytl

#endif  // TINYTL_ARCH_HPP_
