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

#ifndef TINYTL_MODEL_HPP_
#define TINYTL_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tinytl/arch.hpp"
#include "tinytl/layers.hpp"
#include "tinytl/tape.hpp"

namespace tinytl {

// conv (weight-standardized, no bias) -> GN(scale, shift) -> + bias.
template <typename T>
struct ConvUnit {
  ConvSpec spec;
  ParamRef<T> weight;
  ParamRef<T> scale;
  ParamRef<T> shift;
  ParamRef<T> bias;
};

template <typename T>
struct BlockParams {
  MBBlockSpec spec;
  ConvUnit<T> expand;
  ConvUnit<T> depthwise;
  ConvUnit<T> project;
  ConvUnit<T> lite;
};

template <typename T>
struct HeadParams {
  ParamRef<T> weight;  // D x n_classes
  ParamRef<T> bias;
};

enum class InitStrategy { kPretrainedCopy, kRandomZeroScale };

struct ForwardOptions {
  bool lite = true;  // false drops every lite branch from the graph
};

// A backbone plus classifier. Parameters are shared handles: a sub-network
// extracted from a supernet references (slices of) the supernet's tensors.
template <typename T>
class BasicModel {
 public:
  BasicModel() = default;

  const ArchitectureSpec& arch() const { return arch_; }
  const ConvUnit<T>& stem() const { return stem_; }
  const std::vector<std::vector<BlockParams<T>>>& stages() const { return stages_; }
  const HeadParams<T>& head() const { return head_; }

  // Every parameter reference in forward order.
  std::vector<ParamRef<T>> refs() const;
  // Distinct underlying tensors in forward order.
  std::vector<ParamPtr<T>> parameters() const;
  ParamPtr<T> find(const std::string& name) const;
  // Scalars reachable through this model's references.
  std::int64_t parameter_count() const;

  Var<T> forward(const Var<T>& x, Tape<T>* tape, ForwardOptions opt = {}) const;
  Var<T> forward(const BasicTensor<T>& x, Tape<T>* tape, ForwardOptions opt = {}) const {
    return forward(Var<T>::constant(x), tape, opt);
  }
  Var<T> features(const Var<T>& x, Tape<T>* tape, ForwardOptions opt = {}) const;

  // Deep copy with every view gathered into a standalone tensor.
  BasicModel materialize() const;

  // Deep copy in another precision; views keep their index maps.
  template <typename U>
  BasicModel<U> cast() const;

  // Assembly hooks used by the builder and by sub-network extraction.
  static BasicModel assemble(ArchitectureSpec arch, ConvUnit<T> stem,
                             std::vector<std::vector<BlockParams<T>>> stages, HeadParams<T> head);

 private:
  template <typename U>
  friend class BasicModel;

  ArchitectureSpec arch_;
  ConvUnit<T> stem_;
  std::vector<std::vector<BlockParams<T>>> stages_;
  HeadParams<T> head_;
};

using Model = BasicModel<float>;
using Model64 = BasicModel<double>;

template <typename T>
Var<T> conv_unit_forward(const Var<T>& a, const ConvUnit<T>& unit, const NormSpec& norm, bool relu,
                         Tape<T>* tape, const std::string& label);

// Main path plus skip. Does not include the lite branch.
template <typename T>
Var<T> mb_block_forward(const Var<T>& a, const BlockParams<T>& block, const NormSpec& norm,
                        Tape<T>* tape, const std::string& label = "block");

// Pooled branch resized to (out_h, out_w); the caller adds it to the main path.
template <typename T>
Var<T> lite_residual_forward(const Var<T>& a, const BlockParams<T>& block, const NormSpec& norm,
                             int out_h, int out_w, Tape<T>* tape,
                             const std::string& label = "lite");

template <typename T>
Var<T> classifier_forward(const Var<T>& features, const HeadParams<T>& head, Tape<T>* tape);

// Builds and initializes a model. Random weights are He fan-in normal,
// biases 0, norm scale 1 and shift 0. kRandomZeroScale zeroes the scale of
// every lite-branch norm; kPretrainedCopy copies all tensors by name from
// `pretrained`, which must be given and structurally compatible.
template <typename T>
BasicModel<T> build_backbone(const ArchitectureSpec& arch, int n_classes, InitStrategy init,
                             std::uint64_t seed, const BasicModel<T>* pretrained = nullptr);

}  // namespace tinytl

#endif  // TINYTL_MODEL_HPP_
