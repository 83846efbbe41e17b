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

#include "tinytl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "tinytl/errors.hpp"

namespace tinytl {

void Dataset::validate() const {
  if (channels < 1 || height < 1 || width < 1) throw SpecError("dataset: dims must be positive");
  if (n_classes < 1) throw SpecError("dataset: n_classes must be >= 1");
  if (images.size() != labels.size() * image_numel()) {
    throw IoError("dataset: " + std::to_string(images.size()) + " image bytes for " +
                  std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes) {
      throw IoError("dataset: label " + std::to_string(labels[i]) + " at index " +
                    std::to_string(i) + " >= n_classes " + std::to_string(n_classes));
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.channels = channels;
  out.height = height;
  out.width = width;
  out.n_classes = n_classes;
  const std::size_t per = image_numel();
  out.images.reserve(indices.size() * per);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw DimensionError("dataset subset index out of range");
    out.images.insert(out.images.end(), images.begin() + static_cast<std::ptrdiff_t>(i * per),
                      images.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    out.labels.push_back(labels[i]);
  }
  return out;
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels[i]);
  return out;
}

std::vector<std::size_t> Dataset::class_histogram() const {
  std::vector<std::size_t> h(static_cast<std::size_t>(n_classes), 0);
  for (auto l : labels) ++h[l];
  return h;
}

Dataset resize_dataset(const Dataset& data, int size) {
  if (size < 1) throw SpecError("resize_dataset: size must be positive");
  if (size == data.height && size == data.width) return data;
  Dataset out = data;
  out.height = out.width = size;
  out.images.assign(data.size() * out.image_numel(), 0);
  auto axis = [](int in, int o, std::vector<int>& i0, std::vector<int>& i1,
                 std::vector<double>& l) {
    const double scale = static_cast<double>(in) / o;
    for (int k = 0; k < o; ++k) {
      const double src = std::max(0.0, (k + 0.5) * scale - 0.5);
      const int lo = std::min(static_cast<int>(src), in - 1);
      i0.push_back(lo);
      i1.push_back(std::min(lo + 1, in - 1));
      l.push_back(src - lo);
    }
  };
  std::vector<int> y0, y1, x0, x1;
  std::vector<double> ly, lx;
  axis(data.height, size, y0, y1, ly);
  axis(data.width, size, x0, x1, lx);
  const std::size_t planes = data.size() * static_cast<std::size_t>(data.channels);
  for (std::size_t p = 0; p < planes; ++p) {
    const std::uint8_t* src = data.images.data() + p * data.height * data.width;
    std::uint8_t* dst = out.images.data() + p * size * size;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double top = src[y0[y] * data.width + x0[x]] * (1 - lx[x]) +
                           src[y0[y] * data.width + x1[x]] * lx[x];
        const double bot = src[y1[y] * data.width + x0[x]] * (1 - lx[x]) +
                           src[y1[y] * data.width + x1[x]] * lx[x];
        dst[y * size + x] = static_cast<std::uint8_t>(
            std::clamp(std::lround(top * (1 - ly[y]) + bot * ly[y]), 0L, 255L));
      }
    }
  }
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction,
                                          std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw SpecError("split fraction outside [0, 1]");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto cut = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
  std::vector<std::size_t> a(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<std::size_t> b(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {data.subset(a), data.subset(b)};
}

}  // namespace tinytl
