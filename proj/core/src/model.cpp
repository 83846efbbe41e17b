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

#include "tinytl/model.hpp"

#include <cmath>
#include <map>
#include <random>
#include <unordered_map>
#include <utility>

#include "tinytl/errors.hpp"

namespace tinytl {
namespace {

template <typename T>
void for_each_unit(const BasicModel<T>& m, auto&& fn) {
  fn(m.stem());
  for (const auto& st : m.stages()) {
    for (const auto& b : st) {
      fn(b.expand);
      fn(b.depthwise);
      fn(b.project);
      fn(b.lite);
    }
  }
}

template <typename T>
void push_unit(std::vector<ParamRef<T>>& out, const ConvUnit<T>& u) {
  out.push_back(u.weight);
  out.push_back(u.scale);
  out.push_back(u.shift);
  out.push_back(u.bias);
}

// Creates parameters in a fixed order so a seed fully determines values.
template <typename T>
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  ParamRef<T> he(std::string name, ParamGroup group, const Shape& shape, std::int64_t fan_in) {
    BasicTensor<T> v(shape);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (std::size_t i = 0; i < v.numel(); ++i) v[i] = static_cast<T>(dist(rng_));
    return ParamRef<T>(make_parameter<T>(std::move(name), group, std::move(v)));
  }

  static ParamRef<T> constant(std::string name, ParamGroup group, const Shape& shape, T value) {
    return ParamRef<T>(make_parameter<T>(std::move(name), group, BasicTensor<T>(shape, value)));
  }

  ConvUnit<T> unit(const std::string& prefix, const ConvSpec& spec, bool lite) {
    ConvUnit<T> u;
    u.spec = spec;
    const ParamGroup wg = lite ? ParamGroup::kLite : ParamGroup::kWeight;
    const ParamGroup ng = lite ? ParamGroup::kLite : ParamGroup::kNorm;
    const ParamGroup bg = lite ? ParamGroup::kLite : ParamGroup::kBias;
    const std::int64_t fan_in =
        static_cast<std::int64_t>(spec.in_ch / spec.groups) * spec.kernel * spec.kernel;
    u.weight = he(prefix + ".conv.weight", wg, spec.weight_shape(), fan_in);
    u.scale = constant(prefix + ".gn.scale", ng, Shape{spec.out_ch}, T(1));
    u.shift = constant(prefix + ".gn.shift", ng, Shape{spec.out_ch}, T(0));
    u.bias = constant(prefix + ".bias", bg, Shape{spec.out_ch}, T(0));
    return u;
  }

 private:
  std::mt19937_64 rng_;
};

ConvSpec unit_spec(int in_ch, int out_ch, int kernel, int stride, int groups) {
  ConvSpec s;
  s.in_ch = in_ch;
  s.out_ch = out_ch;
  s.kernel = kernel;
  s.stride = stride;
  s.groups = groups;
  s.has_bias = false;
  s.standardize_weight = true;
  return s;
}

}  // namespace

template <typename T>
std::vector<ParamRef<T>> BasicModel<T>::refs() const {
  std::vector<ParamRef<T>> out;
  for_each_unit(*this, [&](const ConvUnit<T>& u) { push_unit(out, u); });
  out.push_back(head_.weight);
  out.push_back(head_.bias);
  return out;
}

template <typename T>
std::vector<ParamPtr<T>> BasicModel<T>::parameters() const {
  std::vector<ParamPtr<T>> out;
  std::unordered_map<const Parameter<T>*, bool> seen;
  for (const auto& r : refs()) {
    if (!r.valid()) continue;
    if (seen.emplace(r.base_ptr().get(), true).second) out.push_back(r.base_ptr());
  }
  return out;
}

template <typename T>
ParamPtr<T> BasicModel<T>::find(const std::string& name) const {
  for (const auto& r : refs()) {
    if (r.valid() && r.name() == name) return r.base_ptr();
  }
  return nullptr;
}

template <typename T>
std::int64_t BasicModel<T>::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& r : refs()) {
    if (r.valid()) n += r.shape().numel();
  }
  return n;
}

template <typename T>
Var<T> conv_unit_forward(const Var<T>& a, const ConvUnit<T>& unit, const NormSpec& norm, bool relu,
                         Tape<T>* tape, const std::string& label) {
  Var<T> h = conv2d(a, unit.spec, unit.weight, ParamRef<T>{}, TrainMask{unit.weight.trainable(), false},
                    tape, label + ".conv");
  h = group_norm(h, norm, unit.scale, unit.shift,
                 TrainMask{unit.scale.trainable(), unit.shift.trainable()}, tape, label + ".gn");
  h = bias_add(h, unit.bias, unit.bias.trainable(), tape, label + ".bias");
  if (relu) h = activation(h, ActKind::kReLU, tape, label + ".relu");
  return h;
}

template <typename T>
Var<T> mb_block_forward(const Var<T>& a, const BlockParams<T>& block, const NormSpec& norm,
                        Tape<T>* tape, const std::string& label) {
  if (a.shape().rank() != 4 || a.shape()[1] != block.spec.in_ch) {
    throw StructuralError(label + ": input " + a.shape().str() + " does not match in_ch " +
                          std::to_string(block.spec.in_ch));
  }
  Var<T> h = conv_unit_forward(a, block.expand, norm, true, tape, label + ".expand");
  h = conv_unit_forward(h, block.depthwise, norm, true, tape, label + ".dw");
  h = conv_unit_forward(h, block.project, norm, false, tape, label + ".project");
  if (block.spec.has_skip()) h = add(h, a, tape, label + ".skip");
  return h;
}

template <typename T>
Var<T> lite_residual_forward(const Var<T>& a, const BlockParams<T>& block, const NormSpec& norm,
                             int out_h, int out_w, Tape<T>* tape, const std::string& label) {
  Var<T> h = avg_pool2(a, tape, label + ".pool");
  h = conv_unit_forward(h, block.lite, norm, true, tape, label);
  return bilinear_upsample(h, out_h, out_w, tape, label + ".upsample");
}

template <typename T>
Var<T> classifier_forward(const Var<T>& features, const HeadParams<T>& head, Tape<T>* tape) {
  if (features.shape().rank() != 4 || features.shape()[1] != head.weight.shape()[0]) {
    throw DimensionError("classifier: features " + features.shape().str() + " vs head " +
                         head.weight.shape().str());
  }
  Var<T> pooled = global_avg_pool(features, tape, "head.pool");
  return linear_forward(pooled, head.weight, head.bias,
                        TrainMask{head.weight.trainable(), head.bias.trainable()}, tape, "head");
}

template <typename T>
Var<T> BasicModel<T>::features(const Var<T>& x, Tape<T>* tape, ForwardOptions opt) const {
  const NormSpec& norm = arch_.norm;
  Var<T> h = conv_unit_forward(x, stem_, norm, true, tape, "stem");
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      const std::string label = "s" + std::to_string(s) + ".b" + std::to_string(b);
      const BlockParams<T>& blk = stages_[s][b];
      Var<T> out = mb_block_forward(h, blk, norm, tape, label);
      if (opt.lite) {
        Var<T> l = lite_residual_forward(h, blk, norm, static_cast<int>(out.shape()[2]),
                                         static_cast<int>(out.shape()[3]), tape, label + ".lite");
        out = add(out, l, tape, label + ".lite_add");
      }
      h = std::move(out);
    }
  }
  return h;
}

template <typename T>
Var<T> BasicModel<T>::forward(const Var<T>& x, Tape<T>* tape, ForwardOptions opt) const {
  return classifier_forward(features(x, tape, opt), head_, tape);
}

template <typename T>
BasicModel<T> BasicModel<T>::assemble(ArchitectureSpec arch, ConvUnit<T> stem,
                                      std::vector<std::vector<BlockParams<T>>> stages,
                                      HeadParams<T> head) {
  BasicModel m;
  m.arch_ = std::move(arch);
  m.stem_ = std::move(stem);
  m.stages_ = std::move(stages);
  m.head_ = std::move(head);
  return m;
}

template <typename T>
BasicModel<T> BasicModel<T>::materialize() const {
  auto copy = [](const ParamRef<T>& r) {
    if (!r.valid()) return r;
    return ParamRef<T>(
        make_parameter<T>(r.name(), r.base().group, r.copy_values(), r.base().trainable));
  };
  auto copy_unit = [&](const ConvUnit<T>& u) {
    return ConvUnit<T>{u.spec, copy(u.weight), copy(u.scale), copy(u.shift), copy(u.bias)};
  };
  BasicModel m;
  m.arch_ = arch_;
  m.stem_ = copy_unit(stem_);
  for (const auto& st : stages_) {
    auto& dst = m.stages_.emplace_back();
    for (const auto& b : st) {
      dst.push_back(BlockParams<T>{b.spec, copy_unit(b.expand), copy_unit(b.depthwise),
                                   copy_unit(b.project), copy_unit(b.lite)});
    }
  }
  m.head_ = HeadParams<T>{copy(head_.weight), copy(head_.bias)};
  return m;
}

template <typename T>
template <typename U>
BasicModel<U> BasicModel<T>::cast() const {
  std::map<const Parameter<T>*, ParamPtr<U>> bases;
  auto conv = [&](const ParamRef<T>& r) -> ParamRef<U> {
    if (!r.valid()) return {};
    auto& dst = bases[r.base_ptr().get()];
    if (!dst) {
      const Parameter<T>& p = r.base();
      dst = make_parameter<U>(p.name, p.group, p.value.template cast<U>(), p.trainable);
    }
    if (!r.is_view()) return ParamRef<U>(dst);
    return ParamRef<U>(dst, r.shape(),
                       std::make_shared<const typename ParamRef<U>::Indices>(*r.gather()));
  };
  auto conv_unit = [&](const ConvUnit<T>& u) {
    return ConvUnit<U>{u.spec, conv(u.weight), conv(u.scale), conv(u.shift), conv(u.bias)};
  };
  BasicModel<U> m;
  m.arch_ = arch_;
  m.stem_ = conv_unit(stem_);
  for (const auto& st : stages_) {
    auto& dst = m.stages_.emplace_back();
    for (const auto& b : st) {
      dst.push_back(BlockParams<U>{b.spec, conv_unit(b.expand), conv_unit(b.depthwise),
                                   conv_unit(b.project), conv_unit(b.lite)});
    }
  }
  m.head_ = HeadParams<U>{conv(head_.weight), conv(head_.bias)};
  return m;
}

template <typename T>
BasicModel<T> build_backbone(const ArchitectureSpec& arch_in, int n_classes, InitStrategy init,
                             std::uint64_t seed, const BasicModel<T>* pretrained) {
  ArchitectureSpec arch = arch_in;
  arch.n_classes = n_classes;
  arch.validate();
  if (init == InitStrategy::kPretrainedCopy && pretrained == nullptr) {
    throw SpecError("build_backbone: PretrainedCopy needs a source model");
  }

  Initializer<T> ini(seed);
  const StemSpec& st = arch.stem;
  ConvUnit<T> stem =
      ini.unit("stem", unit_spec(st.in_ch, st.out_ch, st.kernel, st.stride, 1), false);
  std::vector<std::vector<BlockParams<T>>> stages;
  for (std::size_t s = 0; s < arch.stages.size(); ++s) {
    auto& dst = stages.emplace_back();
    for (std::size_t b = 0; b < arch.stages[s].blocks.size(); ++b) {
      const MBBlockSpec& spec = arch.stages[s].blocks[b];
      const std::string p = "s" + std::to_string(s) + ".b" + std::to_string(b);
      const int e = spec.expanded();
      BlockParams<T> bp;
      bp.spec = spec;
      bp.expand = ini.unit(p + ".expand", unit_spec(spec.in_ch, e, 1, 1, 1), false);
      bp.depthwise = ini.unit(p + ".dw", unit_spec(e, e, spec.kernel, spec.stride, e), false);
      bp.project = ini.unit(p + ".project", unit_spec(e, spec.out_ch, 1, 1, 1), false);
      bp.lite = ini.unit(p + ".lite",
                         unit_spec(spec.in_ch, spec.out_ch, spec.lite.kernel, 1, spec.lite.groups),
                         true);
      if (init == InitStrategy::kRandomZeroScale) bp.lite.scale.base_ptr()->value.fill(T(0));
      dst.push_back(std::move(bp));
    }
  }
  const int d = arch.feature_channels();
  HeadParams<T> head{ini.he("head.weight", ParamGroup::kHead, Shape{d, n_classes}, d),
                     Initializer<T>::constant("head.bias", ParamGroup::kHead, Shape{n_classes},
                                              T(0))};
  BasicModel<T> model = BasicModel<T>::assemble(arch, std::move(stem), std::move(stages),
                                                std::move(head));

  if (init == InitStrategy::kPretrainedCopy) {
    // The classifier is task specific and stays freshly initialized.
    std::map<std::string, ParamRef<T>> source;
    for (const auto& r : pretrained->refs()) {
      if (r.valid()) source.emplace(r.name(), r);
    }
    for (const auto& r : model.refs()) {
      if (r.base().group == ParamGroup::kHead) continue;
      auto it = source.find(r.name());
      if (it == source.end()) {
        throw SpecError("build_backbone: pretrained model has no parameter '" + r.name() + "'");
      }
      if (!(it->second.shape() == r.shape())) {
        throw SpecError("build_backbone: pretrained '" + r.name() + "' has shape " +
                        it->second.shape().str() + ", expected " + r.shape().str());
      }
      r.base_ptr()->value = it->second.copy_values();
    }
  }
  return model;
}

#define TINYTL_INSTANTIATE_MODEL(T)                                                            \
  template class BasicModel<T>;                                                                \
  template Var<T> conv_unit_forward(const Var<T>&, const ConvUnit<T>&, const NormSpec&, bool,  \
                                    Tape<T>*, const std::string&);                             \
  template Var<T> mb_block_forward(const Var<T>&, const BlockParams<T>&, const NormSpec&,      \
                                   Tape<T>*, const std::string&);                              \
  template Var<T> lite_residual_forward(const Var<T>&, const BlockParams<T>&, const NormSpec&, \
                                        int, int, Tape<T>*, const std::string&);               \
  template Var<T> classifier_forward(const Var<T>&, const HeadParams<T>&, Tape<T>*);           \
  template BasicModel<T> build_backbone(const ArchitectureSpec&, int, InitStrategy,            \
                                        std::uint64_t, const BasicModel<T>*);

TINYTL_INSTANTIATE_MODEL(float)
TINYTL_INSTANTIATE_MODEL(double)

#undef TINYTL_INSTANTIATE_MODEL

template BasicModel<double> BasicModel<float>::cast<double>() const;
template BasicModel<float> BasicModel<double>::cast<float>() const;
template BasicModel<float> BasicModel<float>::cast<float>() const;

}  // namespace tinytl
