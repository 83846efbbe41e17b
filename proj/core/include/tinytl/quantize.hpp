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

#ifndef TINYTL_QUANTIZE_HPP_
#define TINYTL_QUANTIZE_HPP_

#include <cstdint>
#include <vector>

#include "tinytl/model.hpp"
#include "tinytl/tensor.hpp"

namespace tinytl {

// Per-tensor affine 8-bit code: value = offset + q * scale. The offset is
// the tensor minimum, so both range endpoints reconstruct exactly.
struct Quantized8 {
  Shape shape;
  std::vector<std::uint8_t> codes;
  double scale = 0.0;   // (max - min) / 255; 0 for a constant tensor
  double offset = 0.0;  // real-valued zero point (tensor minimum)

  Tensor dequantize() const;
};

// Throws NumericError on non-finite input.
Quantized8 quantize8(const Tensor& w);

// Replaces every frozen tensor of the Weight group by its 8-bit
// reconstruction. Returns the number of tensors touched.
int quantize_frozen_weights(const Model& model);

}  // namespace tinytl

#endif  // TINYTL_QUANTIZE_HPP_
