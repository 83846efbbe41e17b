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

#ifndef TINYTL_DATASET_HPP_
#define TINYTL_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "tinytl/tensor.hpp"

namespace tinytl {

// Labelled 8-bit images, N x C x H x W.
struct Dataset {
  int channels = 3;
  int height = 0;
  int width = 0;
  int n_classes = 0;
  std::vector<std::uint8_t> images;
  std::vector<std::uint16_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_numel() const {
    return static_cast<std::size_t>(channels) * height * width;
  }

  // Throws IoError/SpecError when sizes or labels are inconsistent.
  void validate() const;

  Dataset subset(std::span<const std::size_t> indices) const;

  // Pixels mapped to (v / 255 - 0.5) / 0.25.
  template <typename T>
  BasicTensor<T> batch_images(std::span<const std::size_t> indices) const {
    const std::size_t per = image_numel();
    BasicTensor<T> out(Shape{static_cast<std::int64_t>(indices.size()), channels, height, width});
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const std::uint8_t* src = images.data() + indices[b] * per;
      for (std::size_t i = 0; i < per; ++i) {
        out[b * per + i] = static_cast<T>((static_cast<double>(src[i]) / 255.0 - 0.5) / 0.25);
      }
    }
    return out;
  }

  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;

  std::vector<std::size_t> class_histogram() const;
};

// Bilinear (align_corners=false) resize of every image to size x size.
Dataset resize_dataset(const Dataset& data, int size);

// Seeded split; the first part holds round(fraction * N) samples.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction,
                                          std::uint64_t seed);

}  // namespace tinytl

#endif  // TINYTL_DATASET_HPP_
