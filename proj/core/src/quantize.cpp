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

#include "tinytl/quantize.hpp"

#include <algorithm>
#include <cmath>

#include "tinytl/errors.hpp"

namespace tinytl {

Quantized8 quantize8(const Tensor& w) {
  if (!w.all_finite()) throw NumericError("quantize8: non-finite weights");
  Quantized8 q;
  q.shape = w.shape();
  q.codes.assign(w.numel(), 0);
  if (w.numel() == 0) return q;
  const auto [lo_it, hi_it] = std::minmax_element(w.data().begin(), w.data().end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  q.offset = lo;
  q.scale = (hi - lo) / 255.0;
  if (q.scale == 0.0) return q;
  for (std::size_t i = 0; i < w.numel(); ++i) {
    const double c = std::nearbyint((static_cast<double>(w[i]) - lo) / q.scale);
    q.codes[i] = static_cast<std::uint8_t>(std::clamp(c, 0.0, 255.0));
  }
  return q;
}

Tensor Quantized8::dequantize() const {
  Tensor out(shape);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    out[i] = static_cast<float>(offset + static_cast<double>(codes[i]) * scale);
  }
  return out;
}

int quantize_frozen_weights(const Model& model) {
  int n = 0;
  for (const auto& p : model.parameters()) {
    if (p->group != ParamGroup::kWeight || p->trainable) continue;
    p->value = quantize8(p->value).dequantize();
    ++n;
  }
  return n;
}

}  // namespace tinytl
