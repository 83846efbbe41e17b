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

#include "tinytl/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kernels.hpp"
#include "tinytl/errors.hpp"

namespace tinytl {
namespace {

template <typename T>
TapeNode<T> make_node(OpKind kind, std::string label, std::initializer_list<const Var<T>*> inputs,
                      const Tape<T>& tape) {
  TapeNode<T> node;
  node.kind = kind;
  node.label = std::move(label);
  for (const Var<T>* v : inputs) {
    if (v->id != kNoValue && v->tape_uid != tape.uid()) {
      throw StructuralError("op '" + node.label + "' consumes a value from another tape");
    }
    node.inputs.push_back(v->id);
    node.input_requires_grad.push_back(v->id != kNoValue && v->requires_grad);
  }
  return node;
}

template <typename T>
SavedBuffer<T> save_full(const BasicTensor<T>& t) {
  return SavedBuffer<T>{t, StorageClass::full32(t.numel())};
}

template <typename T>
SavedBuffer<T> save_mask(BitMask m) {
  const std::size_t n = m.numel();
  return SavedBuffer<T>{std::move(m), StorageClass::bitmask(n)};
}

template <typename T>
const BasicTensor<T>& require_saved(const TapeNode<T>& node, std::size_t i) {
  const BasicTensor<T>* t = node.saved_tensor(i);
  if (t == nullptr) {
    throw InvariantError("op '" + node.label + "' needs its saved input but none was stored");
  }
  return *t;
}

void require_rank(const Shape& s, std::size_t rank, const std::string& what) {
  if (s.rank() != rank) {
    throw DimensionError(what + ": expected rank " + std::to_string(rank) + ", got " + s.str());
  }
}

template <typename T>
void require_param_shape(const ParamRef<T>& p, const Shape& expected, const std::string& what) {
  if (!p.valid()) throw StructuralError(what + ": missing parameter");
  if (!(p.shape() == expected)) {
    throw DimensionError(what + ": parameter '" + p.name() + "' has shape " + p.shape().str() +
                         ", expected " + expected.str());
  }
}

// Per-channel sum over all positions of an N x C x ... tensor.
template <typename T>
BasicTensor<T> channel_sum(const BasicTensor<T>& g) {
  const std::int64_t n = g.dim(0);
  const std::int64_t c = g.dim(1);
  const std::int64_t plane = static_cast<std::int64_t>(g.numel()) / (n * c);
  BasicTensor<T> out(Shape{c});
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t k = 0; k < c; ++k) {
      const T* p = g.ptr() + (i * c + k) * plane;
      T acc = T(0);
      for (std::int64_t j = 0; j < plane; ++j) acc += p[j];
      out[static_cast<std::size_t>(k)] += acc;
    }
  }
  return out;
}

}  // namespace

const char* to_string(ActKind kind) {
  switch (kind) {
    case ActKind::kReLU: return "relu";
    case ActKind::kSigmoid: return "sigmoid";
    case ActKind::kHSwish: return "hswish";
  }
  return "?";
}

void ConvSpec::validate() const {
  if (in_ch <= 0 || out_ch <= 0) throw SpecError("conv: channel counts must be positive");
  if (kernel <= 0 || kernel % 2 == 0) {
    throw SpecError("conv: kernel must be odd and positive, got " + std::to_string(kernel));
  }
  if (stride != 1 && stride != 2) throw SpecError("conv: stride must be 1 or 2");
  if (groups < 1) throw SpecError("conv: groups must be >= 1");
  if (in_ch % groups != 0 || out_ch % groups != 0) {
    throw SpecError("conv: channels " + std::to_string(in_ch) + "->" + std::to_string(out_ch) +
                    " not divisible by groups " + std::to_string(groups));
  }
}

int NormSpec::groups(int channels) const {
  if (channels_per_group <= 0 || channels % channels_per_group != 0) {
    throw SpecError("group norm: " + std::to_string(channels) +
                    " channels not divisible by group size " +
                    std::to_string(channels_per_group));
  }
  return channels / channels_per_group;
}

// ---------------------------------------------------------------- linear

template <typename T>
Var<T> linear_forward(const Var<T>& a, const ParamRef<T>& weight, const ParamRef<T>& bias,
                      TrainMask mask, Tape<T>* tape, std::string label) {
  require_rank(a.shape(), 2, "linear input");
  if (!weight.valid()) throw StructuralError("linear: missing weight");
  require_rank(weight.shape(), 2, "linear weight");
  const std::int64_t n = a.shape()[0];
  const std::int64_t din = a.shape()[1];
  const std::int64_t dout = weight.shape()[1];
  if (weight.shape()[0] != din) {
    throw DimensionError("linear: input " + a.shape().str() + " vs weight " +
                         weight.shape().str());
  }
  if (bias.valid()) require_param_shape(bias, Shape{dout}, "linear bias");

  BasicTensor<T> scratch;
  const BasicTensor<T>& w = weight.values(scratch);
  BasicTensor<T> out(Shape{n, dout});
  kernels::gemm_nn<T>(n, dout, din, a.value.ptr(), w.ptr(), out.ptr());
  if (bias.valid()) {
    BasicTensor<T> bscratch;
    const BasicTensor<T>& b = bias.values(bscratch);
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < dout; ++j) out[static_cast<std::size_t>(i * dout + j)] += b[j];
    }
  }
  if (tape == nullptr) return Var<T>::constant(std::move(out));

  TapeNode<T> node = make_node<T>(OpKind::kLinear, std::move(label), {&a}, *tape);
  node.weight = weight;
  node.bias = bias;
  node.mask = mask;
  if (!bias.valid()) node.mask.bias_trainable = false;
  if (tape->save_all() || node.mask.weight_trainable) node.saved.push_back(save_full(a.value));
  node.backward = [n, din, dout](const TapeNode<T>& nd, const BasicTensor<T>& g,
                                 BackwardSink<T>& sink) {
    if (nd.mask.bias_trainable) {
      BasicTensor<T> gb(Shape{dout});
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < dout; ++j) gb[j] += g[static_cast<std::size_t>(i * dout + j)];
      }
      sink.bias(gb);
    }
    if (nd.mask.weight_trainable) {
      const BasicTensor<T>& x = require_saved(nd, 0);
      BasicTensor<T> gw(Shape{din, dout});
      kernels::gemm_tn<T>(din, dout, n, x.ptr(), g.ptr(), gw.ptr());
      sink.weight(gw);
    }
    if (sink.wants_input(0)) {
      BasicTensor<T> scratch2;
      const BasicTensor<T>& w2 = nd.weight.values(scratch2);
      BasicTensor<T> gin(Shape{n, din});
      for (std::int64_t i = 0; i < n; ++i) {
        const T* grow = g.ptr() + i * dout;
        for (std::int64_t k = 0; k < din; ++k) {
          const T* wrow = w2.ptr() + k * dout;
          T acc = T(0);
          for (std::int64_t j = 0; j < dout; ++j) acc += grow[j] * wrow[j];
          gin[static_cast<std::size_t>(i * din + k)] = acc;
        }
      }
      sink.input(0, std::move(gin));
    }
  };
  return tape->record(std::move(node), std::move(out));
}

// ------------------------------------------------------ weight standardize

namespace {

// Mean with one correction pass, so constant slices give exact zeros.
template <typename T>
double refined_mean(const T* src, std::int64_t len, double sum) {
  const double mean = sum / static_cast<double>(len);
  double r = 0.0;
  for (std::int64_t i = 0; i < len; ++i) r += src[i] - mean;
  return mean + r / static_cast<double>(len);
}

}  // namespace

template <typename T>
BasicTensor<T> weight_standardize(const BasicTensor<T>& w, double eps) {
  const std::int64_t o = w.dim(0);
  const std::int64_t len = static_cast<std::int64_t>(w.numel()) / o;
  BasicTensor<T> out(w.shape());
  for (std::int64_t c = 0; c < o; ++c) {
    const T* src = w.ptr() + c * len;
    double sum = 0.0;
    for (std::int64_t i = 0; i < len; ++i) sum += src[i];
    const double mean = refined_mean(src, len, sum);
    double sq = 0.0;
    for (std::int64_t i = 0; i < len; ++i) sq += (src[i] - mean) * (src[i] - mean);
    const double inv = 1.0 / std::sqrt(sq / static_cast<double>(len) + eps);
    T* dst = out.ptr() + c * len;
    for (std::int64_t i = 0; i < len; ++i) dst[i] = static_cast<T>((src[i] - mean) * inv);
  }
  return out;
}

template <typename T>
BasicTensor<T> weight_standardize_backward(const BasicTensor<T>& w, const BasicTensor<T>& grad,
                                           double eps) {
  require_same_shape(w, grad, "weight standardization gradient");
  const std::int64_t o = w.dim(0);
  const std::int64_t len = static_cast<std::int64_t>(w.numel()) / o;
  BasicTensor<T> out(w.shape());
  for (std::int64_t c = 0; c < o; ++c) {
    const T* src = w.ptr() + c * len;
    const T* g = grad.ptr() + c * len;
    double sum = 0.0;
    for (std::int64_t i = 0; i < len; ++i) sum += src[i];
    const double mean = refined_mean(src, len, sum);
    double sq = 0.0;
    for (std::int64_t i = 0; i < len; ++i) sq += (src[i] - mean) * (src[i] - mean);
    const double inv = 1.0 / std::sqrt(sq / static_cast<double>(len) + eps);
    double gmean = 0.0;
    double gdot = 0.0;
    for (std::int64_t i = 0; i < len; ++i) {
      gmean += g[i];
      gdot += g[i] * ((src[i] - mean) * inv);
    }
    gmean /= static_cast<double>(len);
    gdot /= static_cast<double>(len);
    T* dst = out.ptr() + c * len;
    for (std::int64_t i = 0; i < len; ++i) {
      const double ws = (src[i] - mean) * inv;
      dst[i] = static_cast<T>(inv * (g[i] - gmean - ws * gdot));
    }
  }
  return out;
}

// ----------------------------------------------------------------- conv2d

namespace {

struct ConvGeom {
  std::int64_t n, c, h, w, o, ho, wo, cg, og, kk;
  int k, stride, pad, groups;
  bool depthwise() const { return cg == 1 && og == 1; }
  bool pointwise() const { return k == 1 && stride == 1; }
};

template <typename T>
void conv_forward_sample(const ConvGeom& g, const T* x, const T* w, T* y, std::vector<T>& col) {
  const std::int64_t plane = g.ho * g.wo;
  if (g.depthwise()) {
    for (std::int64_t c = 0; c < g.c; ++c) {
      const T* xc = x + c * g.h * g.w;
      T* yc = y + c * plane;
      const T* wc = w + c * g.k * g.k;
      for (int kh = 0; kh < g.k; ++kh) {
        std::int64_t oh0, oh1;
        kernels::tap_range(g.h, g.ho, g.stride, kh, g.pad, oh0, oh1);
        for (int kw = 0; kw < g.k; ++kw) {
          const T wv = wc[kh * g.k + kw];
          std::int64_t ow0, ow1;
          kernels::tap_range(g.w, g.wo, g.stride, kw, g.pad, ow0, ow1);
          for (std::int64_t oh = oh0; oh < oh1; ++oh) {
            const T* xrow = xc + (oh * g.stride + kh - g.pad) * g.w + (kw - g.pad);
            T* yrow = yc + oh * g.wo;
            if (g.stride == 1) {
              for (std::int64_t ow = ow0; ow < ow1; ++ow) yrow[ow] += wv * xrow[ow];
            } else {
              for (std::int64_t ow = ow0; ow < ow1; ++ow) yrow[ow] += wv * xrow[ow * g.stride];
            }
          }
        }
      }
    }
    return;
  }
  for (int grp = 0; grp < g.groups; ++grp) {
    const T* xg = x + grp * g.cg * g.h * g.w;
    const T* b = xg;
    if (!g.pointwise()) {
      kernels::im2col(xg, g.cg, g.h, g.w, g.k, g.stride, g.pad, g.ho, g.wo, col.data());
      b = col.data();
    }
    kernels::gemm_nn<T>(g.og, plane, g.kk, w + grp * g.og * g.kk, b, y + grp * g.og * plane);
  }
}

template <typename T>
void conv_weight_grad_sample(const ConvGeom& g, const T* x, const T* gy, T* gw,
                             std::vector<T>& col, std::vector<T>& colt) {
  const std::int64_t plane = g.ho * g.wo;
  if (g.depthwise()) {
    for (std::int64_t c = 0; c < g.c; ++c) {
      const T* xc = x + c * g.h * g.w;
      const T* gc = gy + c * plane;
      T* wc = gw + c * g.k * g.k;
      for (int kh = 0; kh < g.k; ++kh) {
        std::int64_t oh0, oh1;
        kernels::tap_range(g.h, g.ho, g.stride, kh, g.pad, oh0, oh1);
        for (int kw = 0; kw < g.k; ++kw) {
          std::int64_t ow0, ow1;
          kernels::tap_range(g.w, g.wo, g.stride, kw, g.pad, ow0, ow1);
          T acc = T(0);
          for (std::int64_t oh = oh0; oh < oh1; ++oh) {
            const T* xrow = xc + (oh * g.stride + kh - g.pad) * g.w + (kw - g.pad);
            const T* grow = gc + oh * g.wo;
            for (std::int64_t ow = ow0; ow < ow1; ++ow) acc += grow[ow] * xrow[ow * g.stride];
          }
          wc[kh * g.k + kw] += acc;
        }
      }
    }
    return;
  }
  for (int grp = 0; grp < g.groups; ++grp) {
    const T* xg = x + grp * g.cg * g.h * g.w;
    const T* b = xg;
    if (!g.pointwise()) {
      kernels::im2col(xg, g.cg, g.h, g.w, g.k, g.stride, g.pad, g.ho, g.wo, col.data());
      b = col.data();
    }
    kernels::transpose<T>(g.kk, plane, b, colt.data());
    kernels::gemm_nn<T>(g.og, g.kk, plane, gy + grp * g.og * plane, colt.data(),
                        gw + grp * g.og * g.kk);
  }
}

template <typename T>
void conv_input_grad_sample(const ConvGeom& g, const T* w, const T* gy, T* gx,
                            std::vector<T>& col) {
  const std::int64_t plane = g.ho * g.wo;
  if (g.depthwise()) {
    for (std::int64_t c = 0; c < g.c; ++c) {
      T* xc = gx + c * g.h * g.w;
      const T* gc = gy + c * plane;
      const T* wc = w + c * g.k * g.k;
      for (int kh = 0; kh < g.k; ++kh) {
        std::int64_t oh0, oh1;
        kernels::tap_range(g.h, g.ho, g.stride, kh, g.pad, oh0, oh1);
        for (int kw = 0; kw < g.k; ++kw) {
          const T wv = wc[kh * g.k + kw];
          std::int64_t ow0, ow1;
          kernels::tap_range(g.w, g.wo, g.stride, kw, g.pad, ow0, ow1);
          for (std::int64_t oh = oh0; oh < oh1; ++oh) {
            T* xrow = xc + (oh * g.stride + kh - g.pad) * g.w + (kw - g.pad);
            const T* grow = gc + oh * g.wo;
            for (std::int64_t ow = ow0; ow < ow1; ++ow) xrow[ow * g.stride] += wv * grow[ow];
          }
        }
      }
    }
    return;
  }
  for (int grp = 0; grp < g.groups; ++grp) {
    T* xg = gx + grp * g.cg * g.h * g.w;
    const T* wg = w + grp * g.og * g.kk;
    const T* gg = gy + grp * g.og * plane;
    if (g.pointwise()) {
      kernels::gemm_tn<T>(g.kk, plane, g.og, wg, gg, xg);
    } else {
      std::fill(col.begin(), col.end(), T(0));
      kernels::gemm_tn<T>(g.kk, plane, g.og, wg, gg, col.data());
      kernels::col2im(col.data(), g.cg, g.h, g.w, g.k, g.stride, g.pad, g.ho, g.wo, xg);
    }
  }
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& a, const ConvSpec& spec, const ParamRef<T>& weight,
              const ParamRef<T>& bias, TrainMask mask, Tape<T>* tape, std::string label) {
  spec.validate();
  require_rank(a.shape(), 4, "conv2d input");
  if (a.shape()[1] != spec.in_ch) {
    throw DimensionError("conv2d '" + label + "': input " + a.shape().str() + " but in_ch " +
                         std::to_string(spec.in_ch));
  }
  require_param_shape(weight, spec.weight_shape(), "conv2d weight");
  if (spec.has_bias) {
    require_param_shape(bias, Shape{spec.out_ch}, "conv2d bias");
  } else if (bias.valid()) {
    throw StructuralError("conv2d '" + label + "': bias given but spec has no bias");
  }

  ConvGeom g{};
  g.n = a.shape()[0];
  g.c = spec.in_ch;
  g.h = a.shape()[2];
  g.w = a.shape()[3];
  g.o = spec.out_ch;
  g.k = spec.kernel;
  g.stride = spec.stride;
  g.pad = spec.padding();
  g.groups = spec.groups;
  g.ho = spec.out_size(static_cast<int>(g.h));
  g.wo = spec.out_size(static_cast<int>(g.w));
  g.cg = g.c / g.groups;
  g.og = g.o / g.groups;
  g.kk = g.cg * g.k * g.k;

  BasicTensor<T> scratch;
  const BasicTensor<T>& wraw = weight.values(scratch);
  BasicTensor<T> wstd;
  if (spec.standardize_weight) wstd = weight_standardize(wraw);
  const BasicTensor<T>& w = spec.standardize_weight ? wstd : wraw;

  const std::int64_t plane = g.ho * g.wo;
  BasicTensor<T> out(Shape{g.n, g.o, g.ho, g.wo});
  std::vector<T> col(g.depthwise() || g.pointwise() ? 0 : static_cast<std::size_t>(g.kk * plane));
  for (std::int64_t i = 0; i < g.n; ++i) {
    conv_forward_sample(g, a.value.ptr() + i * g.c * g.h * g.w, w.ptr(),
                        out.ptr() + i * g.o * plane, col);
  }
  if (spec.has_bias) {
    BasicTensor<T> bscratch;
    const BasicTensor<T>& b = bias.values(bscratch);
    for (std::int64_t i = 0; i < g.n; ++i) {
      for (std::int64_t o = 0; o < g.o; ++o) {
        T* p = out.ptr() + (i * g.o + o) * plane;
        for (std::int64_t j = 0; j < plane; ++j) p[j] += b[o];
      }
    }
  }
  if (tape == nullptr) return Var<T>::constant(std::move(out));

  TapeNode<T> node = make_node<T>(OpKind::kConv2d, std::move(label), {&a}, *tape);
  node.weight = weight;
  node.bias = bias;
  node.mask = mask;
  if (!bias.valid()) node.mask.bias_trainable = false;
  if (tape->save_all() || node.mask.weight_trainable) node.saved.push_back(save_full(a.value));
  const bool standardize = spec.standardize_weight;
  node.backward = [g, standardize](const TapeNode<T>& nd, const BasicTensor<T>& gy,
                                   BackwardSink<T>& sink) {
    const std::int64_t plane2 = g.ho * g.wo;
    if (nd.mask.bias_trainable) sink.bias(channel_sum(gy));
    const bool want_in = sink.wants_input(0);
    if (!nd.mask.weight_trainable && !want_in) return;
    BasicTensor<T> scratch2;
    const BasicTensor<T>& wraw2 = nd.weight.values(scratch2);
    BasicTensor<T> wstd2;
    if (standardize) wstd2 = weight_standardize(wraw2);
    const BasicTensor<T>& w2 = standardize ? wstd2 : wraw2;
    const bool need_col = !(g.depthwise() || g.pointwise());
    std::vector<T> col2(need_col ? static_cast<std::size_t>(g.kk * plane2) : 0);
    if (nd.mask.weight_trainable) {
      const BasicTensor<T>& x = require_saved(nd, 0);
      std::vector<T> colt(g.depthwise() ? 0 : static_cast<std::size_t>(g.kk * plane2));
      BasicTensor<T> gw(w2.shape());
      for (std::int64_t i = 0; i < g.n; ++i) {
        conv_weight_grad_sample(g, x.ptr() + i * g.c * g.h * g.w, gy.ptr() + i * g.o * plane2,
                                gw.ptr(), col2, colt);
      }
      sink.weight(standardize ? weight_standardize_backward(wraw2, gw) : gw);
    }
    if (want_in) {
      BasicTensor<T> gx(Shape{g.n, g.c, g.h, g.w});
      for (std::int64_t i = 0; i < g.n; ++i) {
        conv_input_grad_sample(g, w2.ptr(), gy.ptr() + i * g.o * plane2,
                               gx.ptr() + i * g.c * g.h * g.w, col2);
      }
      sink.input(0, std::move(gx));
    }
  };
  return tape->record(std::move(node), std::move(out));
}

// ------------------------------------------------------------- group norm

template <typename T>
Var<T> group_norm(const Var<T>& a, const NormSpec& spec, const ParamRef<T>& scale,
                  const ParamRef<T>& shift, TrainMask mask, Tape<T>* tape, std::string label) {
  require_rank(a.shape(), 4, "group_norm input");
  const std::int64_t n = a.shape()[0];
  const std::int64_t c = a.shape()[1];
  const std::int64_t plane = a.shape()[2] * a.shape()[3];
  const int groups = spec.groups(static_cast<int>(c));
  const std::int64_t cpg = c / groups;
  const std::int64_t len = cpg * plane;
  require_param_shape(scale, Shape{c}, "group_norm scale");
  require_param_shape(shift, Shape{c}, "group_norm shift");
  BasicTensor<T> s1, s2;
  const BasicTensor<T>& gamma = scale.values(s1);
  const BasicTensor<T>& beta = shift.values(s2);
  const double eps = spec.eps;

  BasicTensor<T> out(a.shape());
  for (std::int64_t i = 0; i < n; ++i) {
    for (int grp = 0; grp < groups; ++grp) {
      const std::int64_t base = (i * c + grp * cpg) * plane;
      const T* x = a.value.ptr() + base;
      double sum = 0.0;
      for (std::int64_t j = 0; j < len; ++j) sum += x[j];
      const double mean = sum / static_cast<double>(len);
      double sq = 0.0;
      for (std::int64_t j = 0; j < len; ++j) sq += (x[j] - mean) * (x[j] - mean);
      const T mu = static_cast<T>(mean);
      const T rstd = static_cast<T>(1.0 / std::sqrt(sq / static_cast<double>(len) + eps));
      T* y = out.ptr() + base;
      for (std::int64_t ch = 0; ch < cpg; ++ch) {
        const std::int64_t cc = grp * cpg + ch;
        const T ga = gamma[cc];
        const T be = beta[cc];
        for (std::int64_t j = 0; j < plane; ++j) {
          const std::int64_t k = ch * plane + j;
          y[k] = ga * ((x[k] - mu) * rstd) + be;
        }
      }
    }
  }
  if (tape == nullptr) return Var<T>::constant(std::move(out));

  TapeNode<T> node = make_node<T>(OpKind::kGroupNorm, std::move(label), {&a}, *tape);
  node.weight = scale;
  node.bias = shift;
  node.mask = mask;
  // The normalized input is needed both for d(scale) and for the input
  // gradient, so the input is kept when either is required.
  if (tape->save_all() || mask.weight_trainable || node.input_requires_grad[0]) {
    node.saved.push_back(save_full(a.value));
  }
  node.backward = [n, c, plane, groups, cpg, len, eps](
                      const TapeNode<T>& nd, const BasicTensor<T>& g, BackwardSink<T>& sink) {
    if (nd.mask.bias_trainable) sink.bias(channel_sum(g));
    const bool want_in = sink.wants_input(0);
    if (!nd.mask.weight_trainable && !want_in) return;
    const BasicTensor<T>& xin = require_saved(nd, 0);
    BasicTensor<T> s3;
    const BasicTensor<T>& gamma2 = nd.weight.values(s3);
    BasicTensor<T> gscale(Shape{c});
    BasicTensor<T> gx;
    if (want_in) gx = BasicTensor<T>(xin.shape());
    std::vector<T> xhat(static_cast<std::size_t>(len));
    for (std::int64_t i = 0; i < n; ++i) {
      for (int grp = 0; grp < groups; ++grp) {
        const std::int64_t base = (i * c + grp * cpg) * plane;
        const T* x = xin.ptr() + base;
        const T* gy = g.ptr() + base;
        double sum = 0.0;
        for (std::int64_t j = 0; j < len; ++j) sum += x[j];
        const double mean = sum / static_cast<double>(len);
        double sq = 0.0;
        for (std::int64_t j = 0; j < len; ++j) sq += (x[j] - mean) * (x[j] - mean);
        const T mu = static_cast<T>(mean);
        const T rstd = static_cast<T>(1.0 / std::sqrt(sq / static_cast<double>(len) + eps));
        for (std::int64_t j = 0; j < len; ++j) xhat[j] = (x[j] - mu) * rstd;
        for (std::int64_t ch = 0; ch < cpg; ++ch) {
          T acc = T(0);
          for (std::int64_t j = 0; j < plane; ++j) acc += gy[ch * plane + j] * xhat[ch * plane + j];
          gscale[grp * cpg + ch] += acc;
        }
        if (!want_in) continue;
        double m1 = 0.0;
        double m2 = 0.0;
        for (std::int64_t ch = 0; ch < cpg; ++ch) {
          const double ga = gamma2[grp * cpg + ch];
          for (std::int64_t j = 0; j < plane; ++j) {
            const std::int64_t k = ch * plane + j;
            m1 += ga * gy[k];
            m2 += ga * gy[k] * xhat[k];
          }
        }
        m1 /= static_cast<double>(len);
        m2 /= static_cast<double>(len);
        T* dx = gx.ptr() + base;
        for (std::int64_t ch = 0; ch < cpg; ++ch) {
          const double ga = gamma2[grp * cpg + ch];
          for (std::int64_t j = 0; j < plane; ++j) {
            const std::int64_t k = ch * plane + j;
            dx[k] = static_cast<T>(rstd * (ga * gy[k] - m1 - xhat[k] * m2));
          }
        }
      }
    }
    if (nd.mask.weight_trainable) sink.weight(gscale);
    if (want_in) sink.input(0, std::move(gx));
  };
  return tape->record(std::move(node), std::move(out));
}

// ------------------------------------------------------ frozen batch norm

template <typename T>
Var<T> frozen_batch_norm(const Var<T>& a, const BasicTensor<T>& running_mean,
                         const BasicTensor<T>& running_var, const ParamRef<T>& scale,
                         const ParamRef<T>& shift, TrainMask mask, Tape<T>* tape, double eps,
                         std::string label) {
  require_rank(a.shape(), 4, "frozen_batch_norm input");
  const std::int64_t n = a.shape()[0];
  const std::int64_t c = a.shape()[1];
  const std::int64_t plane = a.shape()[2] * a.shape()[3];
  if (!(running_mean.shape() == Shape{c}) || !(running_var.shape() == Shape{c})) {
    throw DimensionError("frozen_batch_norm: statistics must have shape [" + std::to_string(c) +
                         "]");
  }
  require_param_shape(scale, Shape{c}, "frozen_batch_norm scale");
  require_param_shape(shift, Shape{c}, "frozen_batch_norm shift");
  BasicTensor<T> s1, s2;
  const BasicTensor<T>& gamma = scale.values(s1);
  const BasicTensor<T>& beta = shift.values(s2);
  BasicTensor<T> rstd(Shape{c});
  for (std::int64_t k = 0; k < c; ++k) {
    rstd[k] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[k]) + eps));
  }
  BasicTensor<T> out(a.shape());
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t k = 0; k < c; ++k) {
      const T* x = a.value.ptr() + (i * c + k) * plane;
      T* y = out.ptr() + (i * c + k) * plane;
      for (std::int64_t j = 0; j < plane; ++j) {
        y[j] = gamma[k] * ((x[j] - running_mean[k]) * rstd[k]) + beta[k];
      }
    }
  }
  if (tape == nullptr) return Var<T>::constant(std::move(out));

  TapeNode<T> node = make_node<T>(OpKind::kFrozenBatchNorm, std::move(label), {&a}, *tape);
  node.weight = scale;
  node.bias = shift;
  node.mask = mask;
  if (tape->save_all() || mask.weight_trainable) node.saved.push_back(save_full(a.value));
  BasicTensor<T> mean_copy = running_mean;
  node.backward = [n, c, plane, rstd, mean_copy](const TapeNode<T>& nd, const BasicTensor<T>& g,
                                                 BackwardSink<T>& sink) {
    if (nd.mask.bias_trainable) sink.bias(channel_sum(g));
    if (nd.mask.weight_trainable) {
      const BasicTensor<T>& xin = require_saved(nd, 0);
      BasicTensor<T> gs(Shape{c});
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t k = 0; k < c; ++k) {
          const T* x = xin.ptr() + (i * c + k) * plane;
          const T* gy = g.ptr() + (i * c + k) * plane;
          T acc = T(0);
          for (std::int64_t j = 0; j < plane; ++j) acc += gy[j] * ((x[j] - mean_copy[k]) * rstd[k]);
          gs[k] += acc;
        }
      }
      sink.weight(gs);
    }
    if (sink.wants_input(0)) {
      BasicTensor<T> s3;
      const BasicTensor<T>& gamma2 = nd.weight.values(s3);
      BasicTensor<T> gx(g.shape());
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t k = 0; k < c; ++k) {
          const T f = gamma2[k] * rstd[k];
          const T* gy = g.ptr() + (i * c + k) * plane;
          T* dx = gx.ptr() + (i * c + k) * plane;
          for (std::int64_t j = 0; j < plane; ++j) dx[j] = gy[j] * f;
        }
      }
      sink.input(0, std::move(gx));
    }
  };
  return tape->record(std::move(node), std::move(out));
}

// --------------------------------------------------------------- bias add

template <typename T>
Var<T> bias_add(const Var<T>& a, const ParamRef<T>& bias, bool bias_trainable, Tape<T>* tape,
                std::string label) {
  if (a.shape().rank() < 2) throw DimensionError("bias_add: input rank must be >= 2");
  const std::int64_t n = a.shape()[0];
  const std::int64_t c = a.shape()[1];
  const std::int64_t plane = static_cast<std::int64_t>(a.value.numel()) / (n * c);
  require_param_shape(bias, Shape{c}, "bias_add");
  BasicTensor<T> s1;
  const BasicTensor<T>& b = bias.values(s1);
  BasicTensor<T> out = a.value;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t k = 0; k < c; ++k) {
      T* p = out.ptr() + (i * c + k) * plane;
      for (std::int64_t j = 0; j < plane; ++j) p[j] += b[k];
    }
  }
  if (tape == nullptr) return Var<T>::constant(std::move(out));

  TapeNode<T> node = make_node<T>(OpKind::kBiasAdd, std::move(label), {&a}, *tape);
  node.bias = bias;
  node.mask.bias_trainable = bias_trainable;
  if (tape->save_all()) node.saved.push_back(save_full(a.value));
  node.backward = [](const TapeNode<T>& nd, const BasicTensor<T>& g, BackwardSink<T>& sink) {
    if (nd.mask.bias_trainable) sink.bias(channel_sum(g));
    if (sink.wants_input(0)) sink.input(0, g);
  };
  return tape->record(std::move(node), std::move(out));
}

// ------------------------------------------------------------ activations

template <typename T>
Var<T> activation(const Var<T>& a, ActKind kind, Tape<T>* tape, std::string label) {
  if (label.empty()) label = to_string(kind);
  const std::size_t count = a.value.numel();
  BasicTensor<T> out(a.shape());
  const T* x = a.value.ptr();
  T* y = out.ptr();
  switch (kind) {
    case ActKind::kReLU:
      for (std::size_t i = 0; i < count; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    case ActKind::kSigmoid:
      for (std::size_t i = 0; i < count; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
      break;
    case ActKind::kHSwish:
      for (std::size_t i = 0; i < count; ++i) y[i] = x[i] * relu6(x[i] + T(3)) / T(6);
      break;
  }
  if (tape == nullptr) return Var<T>::constant(std::move(out));

  const OpKind op = kind == ActKind::kReLU      ? OpKind::kReLU
                    : kind == ActKind::kSigmoid ? OpKind::kSigmoid
                                                : OpKind::kHSwish;
  TapeNode<T> node = make_node<T>(op, std::move(label), {&a}, *tape);
  if (kind == ActKind::kReLU && !tape->save_all()) {
    node.saved.push_back(save_mask<T>(BitMask::nonnegative<T>(a.value.data())));
  } else {
    node.saved.push_back(save_full(a.value));
  }
  node.backward = [kind, count](const TapeNode<T>& nd, const BasicTensor<T>& g,
                                BackwardSink<T>& sink) {
    if (!sink.wants_input(0)) return;
    BasicTensor<T> gx(g.shape());
    if (kind == ActKind::kReLU) {
      if (const BitMask* m = nd.saved_mask(0)) {
        for (std::size_t i = 0; i < count; ++i) gx[i] = m->test(i) ? g[i] : T(0);
      } else {
        const BasicTensor<T>& x = require_saved(nd, 0);
        for (std::size_t i = 0; i < count; ++i) gx[i] = x[i] >= T(0) ? g[i] : T(0);
      }
    } else if (kind == ActKind::kSigmoid) {
      const BasicTensor<T>& x = require_saved(nd, 0);
      for (std::size_t i = 0; i < count; ++i) {
        const T s = T(1) / (T(1) + std::exp(-x[i]));
        gx[i] = g[i] * (s * (T(1) - s));
      }
    } else {
      const BasicTensor<T>& x = require_saved(nd, 0);
      for (std::size_t i = 0; i < count; ++i) {
        const T v = x[i];
        const T inner = (v >= T(-3) && v <= T(3)) ? v / T(6) : T(0);
        gx[i] = g[i] * (relu6(v + T(3)) / T(6) + inner);
      }
    }
    sink.input(0, std::move(gx));
  };
  return tape->record(std::move(node), std::move(out));
}

// ---------------------------------------------------------------- pooling

template <typename T>
Var<T> avg_pool2(const Var<T>& a, Tape<T>* tape, std::string label) {
  require_rank(a.shape(), 4, "avg_pool2 input");
  const std::int64_t nc = a.shape()[0] * a.shape()[1];
  const std::int64_t h = a.shape()[2];
  const std::int64_t w = a.shape()[3];
  const std::int64_t ho = (h + 1) / 2;
  const std::int64_t wo = (w + 1) / 2;
  BasicTensor<T> out(Shape{a.shape()[0], a.shape()[1], ho, wo});
  for (std::int64_t p = 0; p < nc; ++p) {
    const T* x = a.value.ptr() + p * h * w;
    T* y = out.ptr() + p * ho * wo;
    for (std::int64_t oh = 0; oh < ho; ++oh) {
      const std::int64_t r0 = 2 * oh;
      const std::int64_t r1 = std::min(r0 + 1, h - 1);
      for (std::int64_t ow = 0; ow < wo; ++ow) {
        const std::int64_t c0 = 2 * ow;
        const std::int64_t c1 = std::min(c0 + 1, w - 1);
        y[oh * wo + ow] =
            ((x[r0 * w + c0] + x[r0 * w + c1]) + (x[r1 * w + c0] + x[r1 * w + c1])) * T(0.25);
      }
    }
  }
  if (tape == nullptr) return Var<T>::constant(std::move(out));

  TapeNode<T> node = make_node<T>(OpKind::kAvgPool2, std::move(label), {&a}, *tape);
  if (tape->save_all()) node.saved.push_back(save_full(a.value));
  const Shape in_shape = a.shape();
  node.backward = [in_shape, nc, h, w, ho, wo](const TapeNode<T>&, const BasicTensor<T>& g,
                                               BackwardSink<T>& sink) {
    if (!sink.wants_input(0)) return;
    BasicTensor<T> gx(in_shape);
    for (std::int64_t p = 0; p < nc; ++p) {
      T* dx = gx.ptr() + p * h * w;
      const T* gy = g.ptr() + p * ho * wo;
      for (std::int64_t oh = 0; oh < ho; ++oh) {
        const std::int64_t r0 = 2 * oh;
        const std::int64_t r1 = std::min(r0 + 1, h - 1);
        for (std::int64_t ow = 0; ow < wo; ++ow) {
          const std::int64_t c0 = 2 * ow;
          const std::int64_t c1 = std::min(c0 + 1, w - 1);
          const T v = gy[oh * wo + ow] * T(0.25);
          dx[r0 * w + c0] += v;
          dx[r0 * w + c1] += v;
          dx[r1 * w + c0] += v;
          dx[r1 * w + c1] += v;
        }
      }
    }
    sink.input(0, std::move(gx));
  };
  return tape->record(std::move(node), std::move(out));
}

namespace {

struct LerpAxis {
  std::vector<std::int64_t> i0, i1;
  std::vector<double> l;

  LerpAxis(std::int64_t in, std::int64_t out) : i0(out), i1(out), l(out) {
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::int64_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      if (src < 0.0) src = 0.0;
      std::int64_t lo = static_cast<std::int64_t>(std::floor(src));
      if (lo > in - 1) lo = in - 1;
      i0[o] = lo;
      i1[o] = std::min(lo + 1, in - 1);
      l[o] = src - static_cast<double>(lo);
    }
  }
};

}  // namespace

template <typename T>
Var<T> bilinear_upsample(const Var<T>& a, int target_h, int target_w, Tape<T>* tape,
                         std::string label) {
  require_rank(a.shape(), 4, "bilinear_upsample input");
  const std::int64_t nc = a.shape()[0] * a.shape()[1];
  const std::int64_t h = a.shape()[2];
  const std::int64_t w = a.shape()[3];
  if (target_h < h || target_w < w) {
    throw DimensionError("bilinear_upsample: target " + std::to_string(target_h) + "x" +
                         std::to_string(target_w) + " smaller than source " + a.shape().str());
  }
  const LerpAxis ay(h, target_h);
  const LerpAxis ax(w, target_w);
  BasicTensor<T> out(Shape{a.shape()[0], a.shape()[1], target_h, target_w});
  for (std::int64_t p = 0; p < nc; ++p) {
    const T* x = a.value.ptr() + p * h * w;
    T* y = out.ptr() + p * target_h * target_w;
    for (std::int64_t oy = 0; oy < target_h; ++oy) {
      const T* r0 = x + ay.i0[oy] * w;
      const T* r1 = x + ay.i1[oy] * w;
      const T ly = static_cast<T>(ay.l[oy]);
      for (std::int64_t ox = 0; ox < target_w; ++ox) {
        const std::int64_t c0 = ax.i0[ox];
        const std::int64_t c1 = ax.i1[ox];
        const T lx = static_cast<T>(ax.l[ox]);
        const T top = r0[c0] + lx * (r0[c1] - r0[c0]);
        const T bot = r1[c0] + lx * (r1[c1] - r1[c0]);
        y[oy * target_w + ox] = top + ly * (bot - top);
      }
    }
  }
  if (tape == nullptr) return Var<T>::constant(std::move(out));

  TapeNode<T> node = make_node<T>(OpKind::kUpsample, std::move(label), {&a}, *tape);
  if (tape->save_all()) node.saved.push_back(save_full(a.value));
  const Shape in_shape = a.shape();
  node.backward = [in_shape, nc, h, w, target_h, target_w, ay, ax](
                      const TapeNode<T>&, const BasicTensor<T>& g, BackwardSink<T>& sink) {
    if (!sink.wants_input(0)) return;
    BasicTensor<T> gx(in_shape);
    for (std::int64_t p = 0; p < nc; ++p) {
      T* dx = gx.ptr() + p * h * w;
      const T* gy = g.ptr() + p * target_h * target_w;
      for (std::int64_t oy = 0; oy < target_h; ++oy) {
        T* r0 = dx + ay.i0[oy] * w;
        T* r1 = dx + ay.i1[oy] * w;
        const T ly = static_cast<T>(ay.l[oy]);
        for (std::int64_t ox = 0; ox < target_w; ++ox) {
          const std::int64_t c0 = ax.i0[ox];
          const std::int64_t c1 = ax.i1[ox];
          const T lx = static_cast<T>(ax.l[ox]);
          const T v = gy[oy * target_w + ox];
          const T top = v * (T(1) - ly);
          const T bot = v * ly;
          r0[c0] += top * (T(1) - lx);
          r0[c1] += top * lx;
          r1[c0] += bot * (T(1) - lx);
          r1[c1] += bot * lx;
        }
      }
    }
    sink.input(0, std::move(gx));
  };
  return tape->record(std::move(node), std::move(out));
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& a, Tape<T>* tape, std::string label) {
  require_rank(a.shape(), 4, "global_avg_pool input");
  const std::int64_t n = a.shape()[0];
  const std::int64_t c = a.shape()[1];
  const std::int64_t plane = a.shape()[2] * a.shape()[3];
  BasicTensor<T> out(Shape{n, c});
  for (std::int64_t p = 0; p < n * c; ++p) {
    const T* x = a.value.ptr() + p * plane;
    double sum = 0.0;
    for (std::int64_t j = 0; j < plane; ++j) sum += x[j];
    out[static_cast<std::size_t>(p)] = static_cast<T>(sum / static_cast<double>(plane));
  }
  if (tape == nullptr) return Var<T>::constant(std::move(out));

  TapeNode<T> node = make_node<T>(OpKind::kGlobalAvgPool, std::move(label), {&a}, *tape);
  if (tape->save_all()) node.saved.push_back(save_full(a.value));
  const Shape in_shape = a.shape();
  node.backward = [in_shape, n, c, plane](const TapeNode<T>&, const BasicTensor<T>& g,
                                          BackwardSink<T>& sink) {
    if (!sink.wants_input(0)) return;
    BasicTensor<T> gx(in_shape);
    const T inv = static_cast<T>(1.0 / static_cast<double>(plane));
    for (std::int64_t p = 0; p < n * c; ++p) {
      const T v = g[static_cast<std::size_t>(p)] * inv;
      T* dx = gx.ptr() + p * plane;
      for (std::int64_t j = 0; j < plane; ++j) dx[j] = v;
    }
    sink.input(0, std::move(gx));
  };
  return tape->record(std::move(node), std::move(out));
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b, Tape<T>* tape, std::string label) {
  if (!(a.shape() == b.shape())) {
    throw DimensionError("add: shapes " + a.shape().str() + " and " + b.shape().str());
  }
  BasicTensor<T> out = a.value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value[i];
  if (tape == nullptr) return Var<T>::constant(std::move(out));

  TapeNode<T> node = make_node<T>(OpKind::kAdd, std::move(label), {&a, &b}, *tape);
  if (tape->save_all()) {
    node.saved.push_back(save_full(a.value));
    node.saved.push_back(save_full(b.value));
  }
  node.backward = [](const TapeNode<T>&, const BasicTensor<T>& g, BackwardSink<T>& sink) {
    if (sink.wants_input(0)) sink.input(0, g);
    if (sink.wants_input(1)) sink.input(1, g);
  };
  return tape->record(std::move(node), std::move(out));
}

#define TINYTL_INSTANTIATE_LAYERS(T)                                                          \
  template Var<T> linear_forward(const Var<T>&, const ParamRef<T>&, const ParamRef<T>&,       \
                                 TrainMask, Tape<T>*, std::string);                           \
  template Var<T> conv2d(const Var<T>&, const ConvSpec&, const ParamRef<T>&,                  \
                         const ParamRef<T>&, TrainMask, Tape<T>*, std::string);               \
  template BasicTensor<T> weight_standardize(const BasicTensor<T>&, double);                  \
  template BasicTensor<T> weight_standardize_backward(const BasicTensor<T>&,                  \
                                                      const BasicTensor<T>&, double);         \
  template Var<T> group_norm(const Var<T>&, const NormSpec&, const ParamRef<T>&,              \
                             const ParamRef<T>&, TrainMask, Tape<T>*, std::string);           \
  template Var<T> frozen_batch_norm(const Var<T>&, const BasicTensor<T>&,                     \
                                    const BasicTensor<T>&, const ParamRef<T>&,                \
                                    const ParamRef<T>&, TrainMask, Tape<T>*, double,          \
                                    std::string);                                             \
  template Var<T> bias_add(const Var<T>&, const ParamRef<T>&, bool, Tape<T>*, std::string);   \
  template Var<T> activation(const Var<T>&, ActKind, Tape<T>*, std::string);                  \
  template Var<T> avg_pool2(const Var<T>&, Tape<T>*, std::string);                            \
  template Var<T> bilinear_upsample(const Var<T>&, int, int, Tape<T>*, std::string);          \
  template Var<T> global_avg_pool(const Var<T>&, Tape<T>*, std::string);                      \
  template Var<T> add(const Var<T>&, const Var<T>&, Tape<T>*, std::string);

TINYTL_INSTANTIATE_LAYERS(float)
TINYTL_INSTANTIATE_LAYERS(double)

#undef TINYTL_INSTANTIATE_LAYERS

}  // namespace tinytl
