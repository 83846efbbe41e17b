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

#include "tinytl/tensor.hpp"

#include <cmath>
#include <sstream>

namespace tinytl {

Shape::Shape(std::initializer_list<std::int64_t> dims) : Shape(std::vector<std::int64_t>(dims)) {}

Shape::Shape(std::vector<std::int64_t> dims) : dims_(std::move(dims)) {
  for (std::int64_t d : dims_) {
    if (d <= 0) throw DimensionError("non-positive dimension in shape " + str());
  }
}

std::int64_t Shape::numel() const {
  if (dims_.empty()) return 0;
  std::int64_t n = 1;
  for (std::int64_t d : dims_) n *= d;
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_.numel()), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<std::int64_t>(data_.size()) != shape_.numel()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_.str());
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const& {
  return BasicTensor(*this).reshaped(std::move(shape));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) && {
  if (shape.numel() != shape_.numel()) {
    throw DimensionError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::rows(std::int64_t begin, std::int64_t end) const {
  if (rank() == 0 || begin < 0 || end > shape_[0] || begin >= end) {
    throw DimensionError("row slice out of range for " + shape_.str());
  }
  std::vector<std::int64_t> dims = shape_.dims();
  const std::size_t stride = numel() / static_cast<std::size_t>(dims[0]);
  dims[0] = end - begin;
  std::vector<T> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                     data_.begin() + static_cast<std::ptrdiff_t>(end * stride));
  return BasicTensor(Shape(std::move(dims)), std::move(out));
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  for (T& x : data_) x = value;
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  for (T x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape " + a.shape().str() + " vs " +
                         b.shape().str());
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template void require_same_shape(const BasicTensor<float>&, const BasicTensor<float>&,
                                 const char*);
template void require_same_shape(const BasicTensor<double>&, const BasicTensor<double>&,
                                 const char*);

}  // namespace tinytl
