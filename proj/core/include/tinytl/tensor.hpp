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

#ifndef TINYTL_TENSOR_HPP_
#define TINYTL_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tinytl/errors.hpp"

namespace tinytl {

// Dimensions of a dense tensor. Every dimension is positive.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::int64_t> dims);
  explicit Shape(std::vector<std::int64_t> dims);

  std::size_t rank() const { return dims_.size(); }
  std::int64_t operator[](std::size_t i) const { return dims_[i]; }
  std::int64_t numel() const;
  const std::vector<std::int64_t>& dims() const { return dims_; }

  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::int64_t> dims_;
};

// Dense row-major tensor. Images are N x C x H x W, matrices N x D.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> data);

  const Shape& shape() const { return shape_; }
  std::int64_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t rank() const { return shape_.rank(); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // NCHW element access; no bounds checks.
  T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return data_[index4(n, c, h, w)];
  }
  const T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return data_[index4(n, c, h, w)];
  }

  BasicTensor reshaped(Shape shape) const&;
  BasicTensor reshaped(Shape shape) &&;

  // Slice of the leading (batch) dimension: rows [begin, end).
  BasicTensor rows(std::int64_t begin, std::int64_t end) const;

  void fill(T value);
  bool all_finite() const;

  template <typename U>
  BasicTensor<U> cast() const {
    BasicTensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  std::size_t index4(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w);
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// One bit per element; bit i is set when the source element is >= 0.
class BitMask {
 public:
  BitMask() = default;
  explicit BitMask(std::size_t numel) : numel_(numel), bits_((numel + 7) / 8, 0) {}

  template <typename T>
  static BitMask nonnegative(std::span<const T> values) {
    BitMask m(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] >= T(0)) m.bits_[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
    }
    return m;
  }

  bool test(std::size_t i) const { return (bits_[i >> 3] >> (i & 7)) & 1u; }
  std::size_t numel() const { return numel_; }
  std::size_t bytes() const { return bits_.size(); }

 private:
  std::size_t numel_ = 0;
  std::vector<std::uint8_t> bits_;
};

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what);

}  // namespace tinytl

#endif  // TINYTL_TENSOR_HPP_
