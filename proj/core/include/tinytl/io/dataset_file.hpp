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


#ifndef TINYTL_IO_DATASET_FILE_HPP_
#define TINYTL_IO_DATASET_FILE_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tinytl/dataset.hpp"

namespace tinytl::io {

// Binary dataset layout, little-endian:
//   "TTLD" | u32 version | u32 count | u32 channels | u32 height | u32 width
//   | u32 n_classes | u8 images[count*C*H*W] | u16 labels[count]
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 28;

std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes,
                       const std::string& source = "<buffer>");

void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// Synthetic stripe images with two random colors per image, so the
// globally pooled color carries no class information.
//   kOrientation: class k has angle k * pi / n_classes, random period.
//   kPeriod: class k has period 3 * 1.5^k, random angle.
enum class SynthTask { kOrientation, kPeriod };

struct SynthSpec {
  SynthTask task = SynthTask::kOrientation;
  int n_classes = 4;
  int per_class = 64;
  int size = 32;
  int channels = 3;
  double noise = 0.1;  // Gaussian pixel noise, as a fraction of 255
  std::uint64_t seed = 0;
};

Dataset synth_dataset(const SynthSpec& spec);

}  // namespace tinytl::io

#endif  // TINYTL_IO_DATASET_FILE_HPP_
