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


#ifndef TINYTL_TESTS_SUPPORT_ORACLES_HPP_
#define TINYTL_TESTS_SUPPORT_ORACLES_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tinytl/layers.hpp"
#include "tinytl/tape.hpp"
#include "tinytl/tensor.hpp"

namespace tinytl::testing {

template <typename T = float>
ParamPtr<T> param(const std::string& name, Shape shape, std::vector<T> values,
                  bool trainable = false, ParamGroup group = ParamGroup::kWeight) {
  return make_parameter<T>(name, group, BasicTensor<T>(std::move(shape), std::move(values)),
                           trainable);
}

template <typename T = float>
BasicTensor<T> random_tensor(const Shape& shape, std::uint64_t seed, double sd = 1.0,
                             double mean = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(mean, sd);
  BasicTensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(g(rng));
  return t;
}

template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

template <typename T>
bool bit_equal(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (!(a.shape() == b.shape())) return false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

// Scalar loss sum(y * r); its gradient with respect to y is r.
template <typename T>
double dot_loss(const BasicTensor<T>& y, const BasicTensor<T>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) {
    s += static_cast<double>(y[i]) * static_cast<double>(r[i]);
  }
  return s;
}

// Direct cross-correlation with zero padding, in double.
inline Tensor64 naive_conv(const Tensor64& x, const Tensor64& w, const ConvSpec& s) {
  const auto n = x.dim(0), h = x.dim(2), wd = x.dim(3);
  const int oh = s.out_size(static_cast<int>(h));
  const int ow = s.out_size(static_cast<int>(wd));
  const int cin_g = s.in_ch / s.groups;
  const int cout_g = s.out_ch / s.groups;
  const int p = s.padding();
  Tensor64 y(Shape{n, s.out_ch, oh, ow});
  for (std::int64_t b = 0; b < n; ++b) {
    for (int o = 0; o < s.out_ch; ++o) {
      const int g = o / cout_g;
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (int c = 0; c < cin_g; ++c) {
            for (int ki = 0; ki < s.kernel; ++ki) {
              for (int kj = 0; kj < s.kernel; ++kj) {
                const int yi = i * s.stride + ki - p;
                const int xj = j * s.stride + kj - p;
                if (yi < 0 || xj < 0 || yi >= h || xj >= wd) continue;
                acc += x.at(b, g * cin_g + c, yi, xj) * w.at(o, c, ki, kj);
              }
            }
          }
          y.at(b, o, i, j) = acc;
        }
      }
    }
  }
  return y;
}

// Per-sample, per-group standardization followed by the channel affine.
inline Tensor64 naive_group_norm(const Tensor64& x, int cpg, double eps,
                                 const std::vector<double>& gamma,
                                 const std::vector<double>& beta) {
  Tensor64 y(x.shape());
  const auto n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t g0 = 0; g0 < c; g0 += cpg) {
      double mean = 0.0, var = 0.0;
      const double cnt = static_cast<double>(cpg * hw);
      for (std::int64_t ch = g0; ch < g0 + cpg; ++ch) {
        for (std::int64_t k = 0; k < hw; ++k) mean += x[(b * c + ch) * hw + k];
      }
      mean /= cnt;
      for (std::int64_t ch = g0; ch < g0 + cpg; ++ch) {
        for (std::int64_t k = 0; k < hw; ++k) {
          const double d = x[(b * c + ch) * hw + k] - mean;
          var += d * d;
        }
      }
      var /= cnt;
      const double inv = 1.0 / std::sqrt(var + eps);
      for (std::int64_t ch = g0; ch < g0 + cpg; ++ch) {
        for (std::int64_t k = 0; k < hw; ++k) {
          const auto i = static_cast<std::size_t>((b * c + ch) * hw + k);
          y[i] = (x[i] - mean) * inv * gamma[ch] + beta[ch];
        }
      }
    }
  }
  return y;
}

}  // namespace tinytl::testing

#endif  // TINYTL_TESTS_SUPPORT_ORACLES_HPP_
