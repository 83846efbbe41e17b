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

#include "tinytl/elastic.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <sstream>

#include "tinytl/errors.hpp"

namespace tinytl {
namespace {

template <typename C>
int pick(const std::vector<int>& opts, C& rng) {
  std::uniform_int_distribution<std::size_t> d(0, opts.size() - 1);
  return opts[d(rng)];
}

std::size_t index_of(const std::vector<int>& opts, int v, const std::string& what) {
  auto it = std::find(opts.begin(), opts.end(), v);
  if (it == opts.end()) throw SpecError(what + " choice " + std::to_string(v) + " not in space");
  return static_cast<std::size_t>(it - opts.begin());
}

void check_list(const std::vector<int>& v, std::initializer_list<int> allowed,
                const std::string& what) {
  if (v.empty()) throw SpecError("space: empty option list for " + what);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::find(allowed.begin(), allowed.end(), v[i]) == allowed.end()) {
      throw SpecError("space: " + what + " option " + std::to_string(v[i]) + " not allowed");
    }
    if (i > 0 && v[i] <= v[i - 1]) throw SpecError("space: " + what + " options must ascend");
  }
}

std::uint64_t block_choices(const StageOptions& o) {
  return o.kernel.size() * o.expand.size() * o.lite_groups.size() * o.lite_kernel.size();
}

using Indices = ParamRef<float>::Indices;

ParamRef<float> view(const ParamRef<float>& base, const Shape& shape, Indices idx) {
  bool identity = shape == base.shape();
  for (std::size_t i = 0; identity && i < idx.size(); ++i) {
    identity = idx[i] == static_cast<std::int64_t>(i);
  }
  if (identity) return base;
  return ParamRef<float>(base.base_ptr(), shape, std::make_shared<const Indices>(std::move(idx)));
}

ParamRef<float> prefix(const ParamRef<float>& base, std::int64_t n) {
  Indices idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), std::int64_t{0});
  return view(base, Shape{n}, std::move(idx));
}

// base [O, Cb, K, K] -> [o, c, k, k] with an input-channel map and a
// centered kernel window.
template <typename InMap>
ParamRef<float> conv_view(const ParamRef<float>& base, std::int64_t o, std::int64_t c, int k,
                          InMap in_map) {
  const Shape& bs = base.shape();
  const std::int64_t cb = bs[1];
  const std::int64_t kb = bs[2];
  const std::int64_t off = (kb - k) / 2;
  Indices idx;
  idx.reserve(static_cast<std::size_t>(o * c * k * k));
  for (std::int64_t oo = 0; oo < o; ++oo) {
    for (std::int64_t cc = 0; cc < c; ++cc) {
      const std::int64_t src_c = in_map(oo, cc);
      for (std::int64_t kh = 0; kh < k; ++kh) {
        for (std::int64_t kw = 0; kw < k; ++kw) {
          idx.push_back(((oo * cb + src_c) * kb + kh + off) * kb + kw + off);
        }
      }
    }
  }
  return view(base, Shape{o, c, k, k}, std::move(idx));
}

}  // namespace

int StageOptions::max_depth() const { return depth.empty() ? 0 : depth.back(); }

void ElasticSpace::validate() const {
  if (static_cast<int>(stages.size()) != kNumStages || widths.size() != stages.size() ||
      strides.size() != stages.size()) {
    throw SpecError("space: expected " + std::to_string(kNumStages) +
                    " stages with widths and strides");
  }
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const std::string p = "stages[" + std::to_string(s) + "].";
    check_list(stages[s].depth, {2, 3, 4}, p + "depth");
    check_list(stages[s].kernel, {3, 5, 7}, p + "kernel");
    check_list(stages[s].expand, {3, 4, 6}, p + "expand");
    check_list(stages[s].lite_groups, {2, 4}, p + "lite_groups");
    check_list(stages[s].lite_kernel, {3, 5}, p + "lite_kernel");
  }
  if (resolutions.empty()) throw SpecError("space: empty resolution list");
  for (std::size_t i = 0; i < resolutions.size(); ++i) {
    if (resolutions[i] < 1 || (i > 0 && resolutions[i] <= resolutions[i - 1])) {
      throw SpecError("space: resolutions must be positive and ascending");
    }
  }
  const ArchitectureSpec sup = supernet_arch();
  sup.validate();
  // every smaller choice must also give valid channel counts
  for (std::size_t s = 0; s < stages.size(); ++s) {
    for (const MBBlockSpec& b : sup.stages[s].blocks) {
      for (int e : stages[s].expand) {
        if ((b.in_ch * e) % norm.channels_per_group != 0) {
          throw SpecError("space: stage " + std::to_string(s) + " expand " + std::to_string(e) +
                          " gives channels not divisible by the norm group size");
        }
      }
      for (int g : stages[s].lite_groups) {
        if (b.in_ch % g != 0 || b.out_ch % g != 0) {
          throw SpecError("space: stage " + std::to_string(s) + " lite groups " +
                          std::to_string(g) + " do not divide the channels");
        }
      }
    }
  }
}

std::uint64_t ElasticSpace::size() const {
  std::uint64_t total = resolutions.size();
  for (const auto& st : stages) {
    std::uint64_t per_stage = 0;
    const std::uint64_t b = block_choices(st);
    for (int d : st.depth) {
      std::uint64_t p = 1;
      for (int i = 0; i < d; ++i) p *= b;
      per_stage += p;
    }
    total *= per_stage;
  }
  return total;
}

ArchitectureSpec ElasticSpace::supernet_arch() const {
  ArchitectureSpec arch;
  arch.stem = stem;
  arch.n_classes = n_classes;
  arch.resolution = resolutions.empty() ? 224 : resolutions.back();
  arch.norm = norm;
  int prev = stem.out_ch;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const StageOptions& o = stages[s];
    StageSpec st;
    for (int b = 0; b < o.max_depth(); ++b) {
      MBBlockSpec blk;
      blk.in_ch = prev;
      blk.out_ch = widths[s];
      blk.expand = o.expand.back();
      blk.kernel = o.kernel.back();
      blk.stride = b == 0 ? strides[s] : 1;
      blk.lite.groups = o.lite_groups.front();
      blk.lite.kernel = o.lite_kernel.back();
      st.blocks.push_back(blk);
      prev = widths[s];
    }
    arch.stages.push_back(std::move(st));
  }
  return arch;
}

std::string SubNetConfig::str() const {
  std::ostringstream os;
  os << "r" << resolution;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    os << " | s" << s << " d" << stages[s].depth();
    for (const auto& b : stages[s].blocks) {
      os << " k" << b.kernel << "e" << b.expand << "g" << b.lite_groups << "l" << b.lite_kernel;
    }
  }
  return os.str();
}

void validate_config(const SubNetConfig& config, const ElasticSpace& space) {
  if (config.stages.size() != space.stages.size()) {
    throw SpecError("config has " + std::to_string(config.stages.size()) + " stages, space has " +
                    std::to_string(space.stages.size()));
  }
  index_of(space.resolutions, config.resolution, "resolution");
  for (std::size_t s = 0; s < config.stages.size(); ++s) {
    const StageOptions& o = space.stages[s];
    const std::string p = "stage " + std::to_string(s) + " ";
    index_of(o.depth, config.stages[s].depth(), p + "depth");
    for (const auto& b : config.stages[s].blocks) {
      index_of(o.kernel, b.kernel, p + "kernel");
      index_of(o.expand, b.expand, p + "expand");
      index_of(o.lite_groups, b.lite_groups, p + "lite_groups");
      index_of(o.lite_kernel, b.lite_kernel, p + "lite_kernel");
    }
  }
}

SubNetConfig sample_subnet(const ElasticSpace& space, std::mt19937_64& rng) {
  SubNetConfig c;
  for (const auto& o : space.stages) {
    StageChoice st;
    const int d = pick(o.depth, rng);
    for (int b = 0; b < d; ++b) {
      BlockChoice bc;
      bc.kernel = pick(o.kernel, rng);
      bc.expand = pick(o.expand, rng);
      bc.lite_groups = pick(o.lite_groups, rng);
      bc.lite_kernel = pick(o.lite_kernel, rng);
      st.blocks.push_back(bc);
    }
    c.stages.push_back(std::move(st));
  }
  c.resolution = pick(space.resolutions, rng);
  return c;
}

SubNetConfig sample_subnet(const ElasticSpace& space, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_subnet(space, rng);
}

SubNetConfig smallest_subnet(const ElasticSpace& space) {
  SubNetConfig c;
  for (const auto& o : space.stages) {
    StageChoice st;
    st.blocks.assign(static_cast<std::size_t>(o.depth.front()),
                     BlockChoice{o.kernel.front(), o.expand.front(), o.lite_groups.front(),
                                 o.lite_kernel.front()});
    c.stages.push_back(std::move(st));
  }
  c.resolution = space.resolutions.front();
  return c;
}

SubNetConfig largest_subnet(const ElasticSpace& space) {
  SubNetConfig c;
  for (const auto& o : space.stages) {
    StageChoice st;
    st.blocks.assign(static_cast<std::size_t>(o.depth.back()),
                     BlockChoice{o.kernel.back(), o.expand.back(), o.lite_groups.front(),
                                 o.lite_kernel.back()});
    c.stages.push_back(std::move(st));
  }
  c.resolution = space.resolutions.back();
  return c;
}

std::vector<SubNetConfig> enumerate_subnets(const ElasticSpace& space, std::uint64_t limit) {
  if (space.size() > limit) {
    throw SpecError("space has " + std::to_string(space.size()) + " configs, above limit " +
                    std::to_string(limit));
  }
  // Per-stage alternatives first, then their cartesian product.
  std::vector<std::vector<StageChoice>> per_stage;
  for (const auto& o : space.stages) {
    std::vector<BlockChoice> blocks;
    for (int k : o.kernel) {
      for (int e : o.expand) {
        for (int g : o.lite_groups) {
          for (int l : o.lite_kernel) blocks.push_back(BlockChoice{k, e, g, l});
        }
      }
    }
    std::vector<StageChoice> alts;
    for (int d : o.depth) {
      std::vector<std::size_t> digit(static_cast<std::size_t>(d), 0);
      while (true) {
        StageChoice st;
        for (std::size_t i : digit) st.blocks.push_back(blocks[i]);
        alts.push_back(std::move(st));
        std::size_t pos = digit.size();
        while (pos > 0 && ++digit[pos - 1] == blocks.size()) digit[--pos] = 0;
        if (pos == 0) break;
      }
    }
    per_stage.push_back(std::move(alts));
  }
  std::vector<SubNetConfig> out;
  std::vector<std::size_t> sel(per_stage.size(), 0);
  for (int r : space.resolutions) {
    std::fill(sel.begin(), sel.end(), 0);
    while (true) {
      SubNetConfig c;
      for (std::size_t s = 0; s < per_stage.size(); ++s) c.stages.push_back(per_stage[s][sel[s]]);
      c.resolution = r;
      out.push_back(std::move(c));
      std::size_t pos = sel.size();
      while (pos > 0 && ++sel[pos - 1] == per_stage[pos - 1].size()) sel[--pos] = 0;
      if (pos == 0) break;
    }
  }
  return out;
}

ArchitectureSpec subnet_arch(const ElasticSpace& space, const SubNetConfig& config) {
  validate_config(config, space);
  ArchitectureSpec arch = space.supernet_arch();
  arch.resolution = config.resolution;
  for (std::size_t s = 0; s < arch.stages.size(); ++s) {
    auto& blocks = arch.stages[s].blocks;
    blocks.resize(config.stages[s].blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const BlockChoice& c = config.stages[s].blocks[b];
      blocks[b].kernel = c.kernel;
      blocks[b].expand = c.expand;
      blocks[b].lite.groups = c.lite_groups;
      blocks[b].lite.kernel = c.lite_kernel;
    }
  }
  return arch;
}

std::size_t encoding_width(const ElasticSpace& space) {
  std::size_t w = space.resolutions.size();
  for (const auto& o : space.stages) {
    w += o.depth.size() + static_cast<std::size_t>(o.max_depth()) *
                              (o.kernel.size() + o.expand.size() + o.lite_groups.size() +
                               o.lite_kernel.size());
  }
  return w;
}

std::vector<float> encode_arch(const SubNetConfig& config, const ElasticSpace& space) {
  validate_config(config, space);
  std::vector<float> out(encoding_width(space), 0.0f);
  std::size_t pos = 0;
  auto hot = [&](const std::vector<int>& opts, int v, bool active) {
    if (active) out[pos + index_of(opts, v, "encode")] = 1.0f;
    pos += opts.size();
  };
  for (std::size_t s = 0; s < space.stages.size(); ++s) {
    const StageOptions& o = space.stages[s];
    const StageChoice& st = config.stages[s];
    hot(o.depth, st.depth(), true);
    for (int b = 0; b < o.max_depth(); ++b) {
      const bool active = b < st.depth();
      const BlockChoice c = active ? st.blocks[static_cast<std::size_t>(b)] : BlockChoice{};
      hot(o.kernel, c.kernel, active);
      hot(o.expand, c.expand, active);
      hot(o.lite_groups, c.lite_groups, active);
      hot(o.lite_kernel, c.lite_kernel, active);
    }
  }
  hot(space.resolutions, config.resolution, true);
  return out;
}

SubNetConfig decode_arch(std::span<const float> encoded, const ElasticSpace& space) {
  if (encoded.size() != encoding_width(space)) throw DimensionError("decode_arch: width mismatch");
  std::size_t pos = 0;
  auto read = [&](const std::vector<int>& opts) -> int {
    int found = -1;
    for (std::size_t i = 0; i < opts.size(); ++i) {
      if (encoded[pos + i] != 0.0f) {
        if (found >= 0) throw SpecError("decode_arch: one-hot group has several entries");
        found = opts[i];
      }
    }
    pos += opts.size();
    return found;
  };
  SubNetConfig c;
  for (const auto& o : space.stages) {
    StageChoice st;
    const int d = read(o.depth);
    if (d < 0) throw SpecError("decode_arch: missing depth");
    for (int b = 0; b < o.max_depth(); ++b) {
      BlockChoice bc;
      bc.kernel = read(o.kernel);
      bc.expand = read(o.expand);
      bc.lite_groups = read(o.lite_groups);
      bc.lite_kernel = read(o.lite_kernel);
      if (b < d) {
        if (bc.kernel < 0 || bc.expand < 0 || bc.lite_groups < 0 || bc.lite_kernel < 0) {
          throw SpecError("decode_arch: active block slot without a choice");
        }
        st.blocks.push_back(bc);
      }
    }
    c.stages.push_back(std::move(st));
  }
  c.resolution = read(space.resolutions);
  return c;
}

Supernet build_supernet(const ElasticSpace& space, InitStrategy init, std::uint64_t seed,
                        const Model* pretrained) {
  space.validate();
  return Supernet{space, build_backbone<float>(space.supernet_arch(), space.n_classes, init, seed,
                                               pretrained)};
}

Model subnet_extract(const Supernet& supernet, const SubNetConfig& config) {
  const ArchitectureSpec arch = subnet_arch(supernet.space, config);
  const Model& sup = supernet.model;
  std::vector<std::vector<BlockParams<float>>> stages;
  for (std::size_t s = 0; s < arch.stages.size(); ++s) {
    auto& dst = stages.emplace_back();
    for (std::size_t b = 0; b < arch.stages[s].blocks.size(); ++b) {
      const MBBlockSpec& spec = arch.stages[s].blocks[b];
      const BlockParams<float>& src = sup.stages()[s][b];
      const std::int64_t e = spec.expanded();
      const std::int64_t in = spec.in_ch;
      const std::int64_t out = spec.out_ch;
      BlockParams<float> bp;
      bp.spec = spec;

      bp.expand = src.expand;
      bp.expand.spec.out_ch = static_cast<int>(e);
      bp.expand.weight = conv_view(src.expand.weight, e, in, 1,
                                   [](std::int64_t, std::int64_t c) { return c; });
      bp.expand.scale = prefix(src.expand.scale, e);
      bp.expand.shift = prefix(src.expand.shift, e);
      bp.expand.bias = prefix(src.expand.bias, e);

      bp.depthwise = src.depthwise;
      bp.depthwise.spec.in_ch = bp.depthwise.spec.out_ch = bp.depthwise.spec.groups =
          static_cast<int>(e);
      bp.depthwise.spec.kernel = spec.kernel;
      bp.depthwise.weight = conv_view(src.depthwise.weight, e, 1, spec.kernel,
                                      [](std::int64_t, std::int64_t) { return std::int64_t{0}; });
      bp.depthwise.scale = prefix(src.depthwise.scale, e);
      bp.depthwise.shift = prefix(src.depthwise.shift, e);
      bp.depthwise.bias = prefix(src.depthwise.bias, e);

      bp.project = src.project;
      bp.project.spec.in_ch = static_cast<int>(e);
      bp.project.weight = conv_view(src.project.weight, out, e, 1,
                                    [](std::int64_t, std::int64_t c) { return c; });

      bp.lite = src.lite;
      const std::int64_t g = spec.lite.groups;
      const std::int64_t gb = src.spec.lite.groups;
      bp.lite.spec.groups = static_cast<int>(g);
      bp.lite.spec.kernel = spec.lite.kernel;
      bp.lite.weight = conv_view(src.lite.weight, out, in / g, spec.lite.kernel,
                                 [=](std::int64_t o, std::int64_t ci) {
                                   const std::int64_t j = o / (out / g);
                                   const std::int64_t big = o / (out / gb);
                                   return j * (in / g) + ci - big * (in / gb);
                                 });
      dst.push_back(std::move(bp));
    }
  }
  return Model::assemble(arch, sup.stem(), std::move(stages), sup.head());
}

}  // namespace tinytl
