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

#include "tinytl/arch.hpp"

#include <algorithm>
#include <string>

#include "tinytl/errors.hpp"

namespace tinytl {
namespace {

bool one_of(int v, std::initializer_list<int> allowed) {
  return std::find(allowed.begin(), allowed.end(), v) != allowed.end();
}

std::string where(std::size_t s, std::size_t b) {
  return "stages[" + std::to_string(s) + "].blocks[" + std::to_string(b) + "]";
}

// conv (no bias) + GN affine + post-norm bias.
std::int64_t unit_params(int in_ch, int out_ch, int kernel, int groups) {
  return static_cast<std::int64_t>(out_ch) * (in_ch / groups) * kernel * kernel + 3LL * out_ch;
}

}  // namespace

void ArchitectureSpec::validate() const {
  if (stem.in_ch <= 0 || stem.out_ch <= 0) throw SpecError("stem: channels must be positive");
  if (stem.kernel <= 0 || stem.kernel % 2 == 0) throw SpecError("stem: kernel must be odd");
  if (stem.stride != 1 && stem.stride != 2) throw SpecError("stem: stride must be 1 or 2");
  if (stem.out_ch % norm.channels_per_group != 0) {
    throw SpecError("stem: out_ch " + std::to_string(stem.out_ch) +
                    " not divisible by norm group size");
  }
  if (n_classes < 1) throw SpecError("head: n_classes must be >= 1");
  if (resolution < 1) throw SpecError("resolution must be positive");
  if (static_cast<int>(stages.size()) != kNumStages) {
    throw SpecError("expected " + std::to_string(kNumStages) + " stages, got " +
                    std::to_string(stages.size()));
  }
  int prev = stem.out_ch;
  std::string prev_name = "stem";
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const StageSpec& st = stages[s];
    if (!one_of(st.depth(), {2, 3, 4})) {
      throw SpecError("stages[" + std::to_string(s) + "]: depth " + std::to_string(st.depth()) +
                      " not in {2,3,4}");
    }
    int downsampling = 0;
    for (std::size_t b = 0; b < st.blocks.size(); ++b) {
      const MBBlockSpec& blk = st.blocks[b];
      const std::string name = where(s, b);
      if (blk.in_ch != prev) {
        throw SpecError(name + ": in_ch " + std::to_string(blk.in_ch) + " does not match " +
                        prev_name + " out_ch " + std::to_string(prev));
      }
      if (blk.out_ch <= 0) throw SpecError(name + ": out_ch must be positive");
      if (!one_of(blk.expand, {3, 4, 6})) throw SpecError(name + ": expand not in {3,4,6}");
      if (!one_of(blk.kernel, {3, 5, 7})) throw SpecError(name + ": kernel not in {3,5,7}");
      if (!one_of(blk.stride, {1, 2})) throw SpecError(name + ": stride not in {1,2}");
      if (!one_of(blk.lite.groups, {2, 4})) throw SpecError(name + ": lite.groups not in {2,4}");
      if (!one_of(blk.lite.kernel, {3, 5})) throw SpecError(name + ": lite.kernel not in {3,5}");
      if (blk.lite.downsample != 2) throw SpecError(name + ": lite.downsample must be 2");
      if (blk.in_ch % blk.lite.groups != 0 || blk.out_ch % blk.lite.groups != 0) {
        throw SpecError(name + ": channels not divisible by lite.groups");
      }
      for (int c : {blk.expanded(), blk.out_ch}) {
        if (c % norm.channels_per_group != 0) {
          throw SpecError(name + ": " + std::to_string(c) +
                          " channels not divisible by norm group size " +
                          std::to_string(norm.channels_per_group));
        }
      }
      if (blk.stride == 2) ++downsampling;
      prev = blk.out_ch;
      prev_name = name;
    }
    if (downsampling > 1) {
      throw SpecError("stages[" + std::to_string(s) + "]: more than one stride-2 block");
    }
  }
}

int ArchitectureSpec::feature_channels() const {
  return stages.empty() || stages.back().blocks.empty() ? stem.out_ch
                                                        : stages.back().blocks.back().out_ch;
}

int ArchitectureSpec::output_size(int res) const {
  ConvSpec c{stem.in_ch, stem.out_ch, stem.kernel, stem.stride};
  int size = c.out_size(res);
  for (const auto& st : stages) {
    for (const auto& b : st.blocks) {
      ConvSpec dw{b.expanded(), b.expanded(), b.kernel, b.stride, b.expanded()};
      size = dw.out_size(size);
    }
  }
  return size;
}

ArchitectureSpec make_uniform_arch(const StemSpec& stem, const std::vector<int>& widths,
                                   const std::vector<int>& strides, int depth, int expand,
                                   int kernel, LiteResidualSpec lite, int n_classes,
                                   int resolution) {
  if (widths.size() != strides.size()) throw SpecError("widths and strides differ in length");
  ArchitectureSpec arch;
  arch.stem = stem;
  arch.n_classes = n_classes;
  arch.resolution = resolution;
  int prev = stem.out_ch;
  for (std::size_t s = 0; s < widths.size(); ++s) {
    StageSpec st;
    for (int b = 0; b < depth; ++b) {
      MBBlockSpec blk;
      blk.in_ch = prev;
      blk.out_ch = widths[s];
      blk.expand = expand;
      blk.kernel = kernel;
      blk.stride = b == 0 ? strides[s] : 1;
      blk.lite = lite;
      st.blocks.push_back(blk);
      prev = widths[s];
    }
    arch.stages.push_back(st);
  }
  return arch;
}

ArchitectureSpec reference_tiny_arch(int n_classes) {
  return make_uniform_arch(StemSpec{3, 8, 3, 2}, {8, 16, 24, 32, 48}, {1, 2, 2, 2, 1}, 2, 6, 3,
                           LiteResidualSpec{}, n_classes, 224);
}

std::int64_t parameter_count(const ArchitectureSpec& arch) {
  std::int64_t total = unit_params(arch.stem.in_ch, arch.stem.out_ch, arch.stem.kernel, 1);
  for (const auto& st : arch.stages) {
    for (const auto& b : st.blocks) {
      const int e = b.expanded();
      total += unit_params(b.in_ch, e, 1, 1);
      total += unit_params(e, e, b.kernel, e);
      total += unit_params(e, b.out_ch, 1, 1);
      total += unit_params(b.in_ch, b.out_ch, b.lite.kernel, b.lite.groups);
    }
  }
  total += static_cast<std::int64_t>(arch.feature_channels()) * arch.n_classes + arch.n_classes;
  return total;
}

}  // namespace tinytl
