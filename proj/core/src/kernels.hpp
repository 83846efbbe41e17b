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

// Dense inner loops shared by the layer ops. Loop orders are fixed so every
// op is bit-reproducible for a given input, independent of batch size.

#ifndef TINYTL_SRC_KERNELS_HPP_
#define TINYTL_SRC_KERNELS_HPP_

#include <cstddef>
#include <cstdint>

namespace tinytl::kernels {

// C[M x N] += A[M x K] * B[K x N]
template <typename T>
inline void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c) {
  for (std::int64_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M x N] += A^T * B with A stored [K x M], B [K x N].
template <typename T>
inline void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c) {
  for (std::int64_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::int64_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + i * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// dst[cols x rows] = src[rows x cols]^T
template <typename T>
inline void transpose(std::int64_t rows, std::int64_t cols, const T* src, T* dst) {
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

// Unfolds one [C x H x W] image into [C*k*k x Ho*Wo] patches.
template <typename T>
inline void im2col(const T* x, std::int64_t channels, std::int64_t h, std::int64_t w, int k,
                   int stride, int pad, std::int64_t ho, std::int64_t wo, T* col) {
  const std::int64_t plane = ho * wo;
  for (std::int64_t c = 0; c < channels; ++c) {
    const T* xc = x + c * h * w;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        T* dst = col + ((c * k + kh) * k + kw) * plane;
        for (std::int64_t oh = 0; oh < ho; ++oh) {
          const std::int64_t ih = oh * stride + kh - pad;
          T* drow = dst + oh * wo;
          if (ih < 0 || ih >= h) {
            for (std::int64_t ow = 0; ow < wo; ++ow) drow[ow] = T(0);
            continue;
          }
          const T* srow = xc + ih * w;
          for (std::int64_t ow = 0; ow < wo; ++ow) {
            const std::int64_t iw = ow * stride + kw - pad;
            drow[ow] = (iw >= 0 && iw < w) ? srow[iw] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates patch gradients back into the image.
template <typename T>
inline void col2im(const T* col, std::int64_t channels, std::int64_t h, std::int64_t w, int k,
                   int stride, int pad, std::int64_t ho, std::int64_t wo, T* x) {
  const std::int64_t plane = ho * wo;
  for (std::int64_t c = 0; c < channels; ++c) {
    T* xc = x + c * h * w;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        const T* src = col + ((c * k + kh) * k + kw) * plane;
        for (std::int64_t oh = 0; oh < ho; ++oh) {
          const std::int64_t ih = oh * stride + kh - pad;
          if (ih < 0 || ih >= h) continue;
          const T* srow = src + oh * wo;
          T* xrow = xc + ih * w;
          for (std::int64_t ow = 0; ow < wo; ++ow) {
            const std::int64_t iw = ow * stride + kw - pad;
            if (iw >= 0 && iw < w) xrow[iw] += srow[ow];
          }
        }
      }
    }
  }
}

// Valid output range [lo, hi) along one axis for kernel tap `t`.
inline void tap_range(std::int64_t in, std::int64_t out, int stride, int t, int pad,
                      std::int64_t& lo, std::int64_t& hi) {
  // need 0 <= o*stride + t - pad < in
  const std::int64_t off = t - pad;
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  const std::int64_t lim = in - off;  // o*stride < lim
  hi = lim <= 0 ? 0 : (lim + stride - 1) / stride;
  if (hi > out) hi = out;
  if (lo > hi) lo = hi;
}

}  // namespace tinytl::kernels

#endif  // TINYTL_SRC_KERNELS_HPP_
