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


// Small seeded networks that touch every layer type, used by the gradient
// and memory-rule suites.

#ifndef TINYTL_TESTS_SUPPORT_RANDOM_NET_HPP_
#define TINYTL_TESTS_SUPPORT_RANDOM_NET_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tinytl/layers.hpp"
#include "tinytl/policy.hpp"
#include "tinytl/tape.hpp"

namespace tinytl::testing {

struct RandomNetSpec {
  int batch = 2;
  int in_ch = 3;
  int size = 8;
  int stem_ch = 8;
  int stem_kernel = 3;
  int stem_stride = 1;
  int expand = 2;
  int dw_kernel = 3;
  int dw_stride = 1;
  int lite_groups = 2;
  int lite_kernel = 3;
  int n_classes = 3;
  NormSpec norm{NormKind::kGroupNorm, 2, 1e-5};

  static RandomNetSpec draw(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&](std::initializer_list<int> v) {
      return *(v.begin() + std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng));
    };
    RandomNetSpec s;
    s.batch = pick({1, 2, 3});
    s.in_ch = pick({1, 2, 3});
    s.size = pick({6, 7, 8, 9});
    s.stem_ch = pick({4, 8});
    s.stem_kernel = pick({3, 5});
    s.stem_stride = pick({1, 2});
    s.expand = pick({1, 2, 3});
    s.dw_kernel = pick({3, 5, 7});
    s.dw_stride = pick({1, 2});
    s.lite_groups = pick({2, 4});
    s.lite_kernel = pick({3, 5});
    s.n_classes = pick({2, 3, 5});
    return s;
  }
};

// stem: conv(WS) -> frozen BN -> bias -> relu
// block: 1x1 -> GN -> bias -> hswish, depthwise -> GN -> bias -> sigmoid,
//        1x1 -> GN -> bias, plus a skip when shapes allow
// lite: pool -> group conv -> GN -> bias -> relu -> upsample, added
// head: global pool -> linear
template <typename T>
class RandomNet {
 public:
  struct Unit {
    ConvSpec conv;
    ParamPtr<T> weight;
    ParamPtr<T> scale;
    ParamPtr<T> shift;
    ParamPtr<T> bias;
  };

  RandomNet() = default;

  static RandomNet build(const RandomNetSpec& spec, std::uint64_t seed) {
    RandomNet net;
    net.spec_ = spec;
    std::mt19937_64 rng(seed ^ 0x5eedULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto tensor = [&](const Shape& shape, double mean, double sd) {
      BasicTensor<T> t(shape);
      for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(mean + sd * normal(rng));
      return t;
    };
    auto unit = [&](const std::string& name, ConvSpec c, ParamGroup wg, ParamGroup ng,
                    ParamGroup bg) {
      c.standardize_weight = c.groups == 1;
      const double fan = static_cast<double>(c.in_ch / c.groups) * c.kernel * c.kernel;
      Unit u;
      u.conv = c;
      u.weight = make_parameter<T>(name + ".conv.weight", wg,
                                   tensor(c.weight_shape(), 0.0, std::sqrt(2.0 / fan)));
      u.scale = make_parameter<T>(name + ".norm.scale", ng, tensor(Shape{c.out_ch}, 1.0, 0.2));
      u.shift = make_parameter<T>(name + ".norm.shift", ng, tensor(Shape{c.out_ch}, 0.0, 0.2));
      u.bias = make_parameter<T>(name + ".bias", bg, tensor(Shape{c.out_ch}, 0.0, 0.2));
      return u;
    };
    auto conv = [](int in, int out, int k, int s, int g) {
      ConvSpec c;
      c.in_ch = in;
      c.out_ch = out;
      c.kernel = k;
      c.stride = s;
      c.groups = g;
      return c;
    };
    const int c0 = spec.stem_ch;
    const int ce = c0 * spec.expand;
    net.stem_ = unit("stem", conv(spec.in_ch, c0, spec.stem_kernel, spec.stem_stride, 1),
                     ParamGroup::kWeight, ParamGroup::kNorm, ParamGroup::kBias);
    net.bn_mean_ = tensor(Shape{c0}, 0.0, 0.3);
    net.bn_var_ = tensor(Shape{c0}, 0.0, 0.3);
    for (std::size_t i = 0; i < net.bn_var_.numel(); ++i) {
      net.bn_var_[i] = static_cast<T>(0.5 + std::abs(static_cast<double>(net.bn_var_[i])));
    }
    net.expand_ = unit("expand", conv(c0, ce, 1, 1, 1), ParamGroup::kWeight, ParamGroup::kNorm,
                       ParamGroup::kBias);
    net.dw_ = unit("dw", conv(ce, ce, spec.dw_kernel, spec.dw_stride, ce), ParamGroup::kWeight,
                   ParamGroup::kNorm, ParamGroup::kBias);
    net.project_ = unit("project", conv(ce, c0, 1, 1, 1), ParamGroup::kWeight, ParamGroup::kNorm,
                        ParamGroup::kBias);
    net.lite_ = unit("lite", conv(c0, c0, spec.lite_kernel, 1, spec.lite_groups),
                     ParamGroup::kLite, ParamGroup::kLite, ParamGroup::kLite);
    net.head_w_ = make_parameter<T>("head.weight", ParamGroup::kHead,
                                    tensor(Shape{c0, spec.n_classes}, 0.0, 0.5));
    net.head_b_ = make_parameter<T>("head.bias", ParamGroup::kHead,
                                    tensor(Shape{spec.n_classes}, 0.0, 0.1));
    return net;
  }

  const RandomNetSpec& spec() const { return spec_; }

  std::vector<ParamPtr<T>> parameters() const {
    std::vector<ParamPtr<T>> out;
    for (const Unit* u : {&stem_, &expand_, &dw_, &project_, &lite_}) {
      out.insert(out.end(), {u->weight, u->scale, u->shift, u->bias});
    }
    out.push_back(head_w_);
    out.push_back(head_b_);
    return out;
  }

  void apply(const FineTunePolicy& policy) const {
    for (const ParamPtr<T>& p : parameters()) p->trainable = policy.trains(p->group);
  }

  Shape input_shape() const { return Shape{spec_.batch, spec_.in_ch, spec_.size, spec_.size}; }

  Var<T> forward(const BasicTensor<T>& x, Tape<T>* tape) const {
    Var<T> h = conv(Var<T>::constant(x), stem_, tape, "stem");
    h = frozen_batch_norm(h, bn_mean_, bn_var_, ParamRef<T>(stem_.scale),
                          ParamRef<T>(stem_.shift), mask(stem_), tape, 1e-5, "stem.bn");
    h = bias(h, stem_, tape, "stem");
    h = activation(h, ActKind::kReLU, tape, "stem.relu");
    const Var<T> block_in = h;

    Var<T> b = conv(h, expand_, tape, "expand");
    b = norm(b, expand_, tape, "expand");
    b = activation(b, ActKind::kHSwish, tape, "expand.hswish");
    b = conv(b, dw_, tape, "dw");
    b = norm(b, dw_, tape, "dw");
    b = activation(b, ActKind::kSigmoid, tape, "dw.sigmoid");
    b = conv(b, project_, tape, "project");
    b = norm(b, project_, tape, "project");
    if (b.shape() == block_in.shape()) b = add(b, block_in, tape, "skip");

    Var<T> l = avg_pool2(block_in, tape, "lite.pool");
    l = conv(l, lite_, tape, "lite");
    l = norm(l, lite_, tape, "lite");
    l = activation(l, ActKind::kReLU, tape, "lite.relu");
    l = bilinear_upsample(l, static_cast<int>(b.shape()[2]), static_cast<int>(b.shape()[3]), tape,
                          "lite.upsample");
    b = add(b, l, tape, "lite.add");

    Var<T> f = global_avg_pool(b, tape, "head.pool");
    return linear_forward(f, ParamRef<T>(head_w_), ParamRef<T>(head_b_),
                          TrainMask{head_w_->trainable, head_b_->trainable}, tape, "head");
  }

  // Same values and trainable flags in another precision.
  template <typename U>
  RandomNet<U> cast() const {
    RandomNet<U> out;
    out.spec_ = spec_;
    auto p = [](const ParamPtr<T>& src) {
      return make_parameter<U>(src->name, src->group, src->value.template cast<U>(),
                               src->trainable);
    };
    auto u = [&](const Unit& src) {
      return typename RandomNet<U>::Unit{src.conv, p(src.weight), p(src.scale), p(src.shift),
                                         p(src.bias)};
    };
    out.stem_ = u(stem_);
    out.expand_ = u(expand_);
    out.dw_ = u(dw_);
    out.project_ = u(project_);
    out.lite_ = u(lite_);
    out.bn_mean_ = bn_mean_.template cast<U>();
    out.bn_var_ = bn_var_.template cast<U>();
    out.head_w_ = p(head_w_);
    out.head_b_ = p(head_b_);
    return out;
  }

 private:
  template <typename U>
  friend class RandomNet;

  static TrainMask mask(const Unit& u) { return TrainMask{u.scale->trainable, u.shift->trainable}; }

  Var<T> conv(const Var<T>& a, const Unit& u, Tape<T>* tape, const std::string& name) const {
    return conv2d(a, u.conv, ParamRef<T>(u.weight), ParamRef<T>(),
                  TrainMask{u.weight->trainable, false}, tape, name + ".conv");
  }
  Var<T> bias(const Var<T>& a, const Unit& u, Tape<T>* tape, const std::string& name) const {
    return bias_add(a, ParamRef<T>(u.bias), u.bias->trainable, tape, name + ".bias");
  }
  Var<T> norm(const Var<T>& a, const Unit& u, Tape<T>* tape, const std::string& name) const {
    Var<T> h = group_norm(a, spec_.norm, ParamRef<T>(u.scale), ParamRef<T>(u.shift), mask(u),
                          tape, name + ".gn");
    return bias(h, u, tape, name);
  }

  RandomNetSpec spec_;
  Unit stem_, expand_, dw_, project_, lite_;
  BasicTensor<T> bn_mean_, bn_var_;
  ParamPtr<T> head_w_, head_b_;
};

// Smallest distance from any ReLU / h-swish input to that op's kinks
// (0 for ReLU, -3 and 3 for h-swish). Needs a SaveMode::kAll tape.
template <typename T>
double kink_margin(const Tape<T>& tape) {
  double margin = std::numeric_limits<double>::infinity();
  for (const TapeNode<T>& n : tape.nodes()) {
    if (n.kind != OpKind::kReLU && n.kind != OpKind::kHSwish) continue;
    const BasicTensor<T>* in = n.saved_tensor(0);
    if (in == nullptr) continue;
    for (std::size_t i = 0; i < in->numel(); ++i) {
      const double v = static_cast<double>((*in)[i]);
      double d = std::abs(v);
      if (n.kind == OpKind::kHSwish) d = std::min(std::abs(v - 3.0), std::abs(v + 3.0));
      margin = std::min(margin, d);
    }
  }
  return margin;
}


}  // namespace tinytl::testing

#endif  // TINYTL_TESTS_SUPPORT_RANDOM_NET_HPP_
