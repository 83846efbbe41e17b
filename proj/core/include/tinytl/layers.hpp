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

#ifndef TINYTL_LAYERS_HPP_
#define TINYTL_LAYERS_HPP_

#include <string>

#include "tinytl/tape.hpp"
#include "tinytl/tensor.hpp"

namespace tinytl {

// Every op below records onto `tape` when it is non-null and runs in
// inference mode (nothing recorded, nothing saved) otherwise.
//
// Save-for-backward rules in SaveMode::kSelective:
//   linear / conv2d      input as Full32 iff the weight is trainable
//   group_norm           input as Full32 iff the scale is trainable or a
//                        gradient has to flow to the input
//   frozen_batch_norm    input as Full32 iff the scale is trainable
//   relu                 one BitMask of (input >= 0)
//   sigmoid / hswish     input as Full32
//   bias_add, add, pools, upsample: nothing
// SaveMode::kAll stores every op's input as Full32.

// a [N x D_in] * W [D_in x D_out] + b [D_out].
template <typename T>
Var<T> linear_forward(const Var<T>& a, const ParamRef<T>& weight, const ParamRef<T>& bias,
                      TrainMask mask, Tape<T>* tape, std::string label = "linear");

struct ConvSpec {
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 1;
  int stride = 1;
  int groups = 1;
  bool has_bias = false;
  // Standardize each output-channel slice of the kernel before use. The
  // stored parameter stays raw.
  bool standardize_weight = false;

  int padding() const { return kernel / 2; }
  int out_size(int in) const { return (in + 2 * padding() - kernel) / stride + 1; }
  Shape weight_shape() const { return Shape{out_ch, in_ch / groups, kernel, kernel}; }
  void validate() const;
};

// Zero-padded ("same" style) cross-correlation over N x C x H x W.
template <typename T>
Var<T> conv2d(const Var<T>& a, const ConvSpec& spec, const ParamRef<T>& weight,
              const ParamRef<T>& bias, TrainMask mask, Tape<T>* tape,
              std::string label = "conv2d");

inline constexpr double kWeightStandardizeEps = 1e-5;

// Per output channel: (W - mean) / sqrt(var + eps), biased variance.
template <typename T>
BasicTensor<T> weight_standardize(const BasicTensor<T>& w, double eps = kWeightStandardizeEps);

// Chain rule through weight_standardize: gradient w.r.t. the raw kernel.
template <typename T>
BasicTensor<T> weight_standardize_backward(const BasicTensor<T>& w, const BasicTensor<T>& grad,
                                           double eps = kWeightStandardizeEps);

enum class NormKind { kGroupNorm, kFrozenBatchNorm };

struct NormSpec {
  NormKind kind = NormKind::kGroupNorm;
  int channels_per_group = 8;
  double eps = 1e-5;

  int groups(int channels) const;
};

// Per-sample, per-group standardization followed by the per-channel affine
// (scale, shift).
template <typename T>
Var<T> group_norm(const Var<T>& a, const NormSpec& spec, const ParamRef<T>& scale,
                  const ParamRef<T>& shift, TrainMask mask, Tape<T>* tape,
                  std::string label = "group_norm");

// Inference-style batch norm: stored per-channel statistics, trainable
// affine. Linear in its input.
template <typename T>
Var<T> frozen_batch_norm(const Var<T>& a, const BasicTensor<T>& running_mean,
                         const BasicTensor<T>& running_var, const ParamRef<T>& scale,
                         const ParamRef<T>& shift, TrainMask mask, Tape<T>* tape,
                         double eps = 1e-5, std::string label = "frozen_batch_norm");

// Adds a per-channel (dim 1) bias.
template <typename T>
Var<T> bias_add(const Var<T>& a, const ParamRef<T>& bias, bool bias_trainable, Tape<T>* tape,
                std::string label = "bias");

enum class ActKind { kReLU, kSigmoid, kHSwish };

const char* to_string(ActKind kind);

template <typename T>
Var<T> activation(const Var<T>& a, ActKind kind, Tape<T>* tape, std::string label = {});

// 2x2 mean pooling, stride 2. Odd trailing rows/columns are replicated, so
// the output is ceil(H/2) x ceil(W/2).
template <typename T>
Var<T> avg_pool2(const Var<T>& a, Tape<T>* tape, std::string label = "avg_pool2");

// Bilinear resize with align_corners=false. target >= source in both dims.
template <typename T>
Var<T> bilinear_upsample(const Var<T>& a, int target_h, int target_w, Tape<T>* tape,
                         std::string label = "upsample");

// N x C x H x W -> N x C.
template <typename T>
Var<T> global_avg_pool(const Var<T>& a, Tape<T>* tape, std::string label = "global_avg_pool");

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b, Tape<T>* tape, std::string label = "add");

// Scalar activation helpers shared with the oracles.
template <typename T>
inline T relu6(T x) {
  return x < T(0) ? T(0) : (x > T(6) ? T(6) : x);
}

}  // namespace tinytl

#endif  // TINYTL_LAYERS_HPP_
