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

#ifndef TINYTL_ELASTIC_HPP_
#define TINYTL_ELASTIC_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tinytl/arch.hpp"
#include "tinytl/model.hpp"

namespace tinytl {

struct StageOptions {
  std::vector<int> depth{2, 3, 4};
  std::vector<int> kernel{3, 5, 7};
  std::vector<int> expand{3, 4, 6};
  std::vector<int> lite_groups{2, 4};
  std::vector<int> lite_kernel{3, 5};

  int max_depth() const;
  friend bool operator==(const StageOptions&, const StageOptions&) = default;
};

// Elastic sub-network space over a fixed stage layout. Option lists are
// kept sorted ascending; per-stage lists allow restricting single stages.
struct ElasticSpace {
  StemSpec stem;
  std::vector<int> widths{8, 16, 24, 32, 48};  // stage output channels
  std::vector<int> strides{1, 2, 2, 2, 1};     // first-block stride per stage
  int n_classes = 10;
  std::vector<StageOptions> stages = std::vector<StageOptions>(kNumStages);
  std::vector<int> resolutions{224};
  NormSpec norm;

  // Throws SpecError on empty or invalid option lists.
  void validate() const;
  // Total number of distinct sub-network configurations.
  std::uint64_t size() const;
  // The weight-sharing supernet: max depth, kernel and expand per stage,
  // lite branches at the smallest group count and largest kernel.
  ArchitectureSpec supernet_arch() const;
};

struct BlockChoice {
  int kernel = 3;
  int expand = 6;
  int lite_groups = 2;
  int lite_kernel = 5;

  friend auto operator<=>(const BlockChoice&, const BlockChoice&) = default;
};

struct StageChoice {
  std::vector<BlockChoice> blocks;  // one per active block

  int depth() const { return static_cast<int>(blocks.size()); }
  friend auto operator<=>(const StageChoice&, const StageChoice&) = default;
};

struct SubNetConfig {
  std::vector<StageChoice> stages;
  int resolution = 224;

  std::string str() const;
  friend auto operator<=>(const SubNetConfig&, const SubNetConfig&) = default;
};

// Throws SpecError when a choice is not drawn from the space.
void validate_config(const SubNetConfig& config, const ElasticSpace& space);

SubNetConfig sample_subnet(const ElasticSpace& space, std::mt19937_64& rng);
SubNetConfig sample_subnet(const ElasticSpace& space, std::uint64_t seed);

SubNetConfig smallest_subnet(const ElasticSpace& space);
SubNetConfig largest_subnet(const ElasticSpace& space);

// All configurations; throws SpecError when the space exceeds `limit`.
std::vector<SubNetConfig> enumerate_subnets(const ElasticSpace& space,
                                            std::uint64_t limit = 1u << 20);

ArchitectureSpec subnet_arch(const ElasticSpace& space, const SubNetConfig& config);

// One-hot layout: per stage the depth one-hot, then per block slot the
// kernel, expand, lite-group and lite-kernel one-hots (all zero for
// inactive slots); the resolution one-hot comes last.
std::size_t encoding_width(const ElasticSpace& space);
std::vector<float> encode_arch(const SubNetConfig& config, const ElasticSpace& space);
SubNetConfig decode_arch(std::span<const float> encoded, const ElasticSpace& space);

struct Supernet {
  ElasticSpace space;
  Model model;
};

Supernet build_supernet(const ElasticSpace& space, InitStrategy init, std::uint64_t seed,
                        const Model* pretrained = nullptr);

// A model whose parameters are index-mapped views into the supernet:
// leading blocks per stage, centered kernels, leading expanded channels,
// lite kernels regrouped from the supernet's coarser grouping. Writes to
// the supernet are visible through the returned model.
Model subnet_extract(const Supernet& supernet, const SubNetConfig& config);

}  // namespace tinytl

#endif  // TINYTL_ELASTIC_HPP_
