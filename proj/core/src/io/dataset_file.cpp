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


#include "tinytl/io/dataset_file.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "tinytl/errors.hpp"

namespace tinytl::io {

namespace {

constexpr char kMagic[4] = {'T', 'T', 'L', 'D'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint32_t checked_u32(long long v, const char* what) {
  if (v < 0 || v > 0xffffffffLL) throw SpecError(std::string("dataset ") + what + " out of range");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
  data.validate();
  std::vector<std::uint8_t> out;
  out.reserve(kDatasetHeaderBytes + data.images.size() + 2 * data.labels.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kDatasetVersion);
  put_u32(out, checked_u32(static_cast<long long>(data.size()), "count"));
  put_u32(out, checked_u32(data.channels, "channels"));
  put_u32(out, checked_u32(data.height, "height"));
  put_u32(out, checked_u32(data.width, "width"));
  put_u32(out, checked_u32(data.n_classes, "n_classes"));
  out.insert(out.end(), data.images.begin(), data.images.end());
  for (std::uint16_t l : data.labels) {
    out.push_back(static_cast<std::uint8_t>(l & 0xff));
    out.push_back(static_cast<std::uint8_t>(l >> 8));
  }
  return out;
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  if (bytes.size() < kDatasetHeaderBytes) {
    throw IoError(source + ": truncated header (" + std::to_string(bytes.size()) + " bytes)");
  }
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw IoError(source + ": bad magic, expected TTLD");
  }
  const std::uint8_t* h = bytes.data() + 4;
  const std::uint32_t version = get_u32(h);
  if (version != kDatasetVersion) {
    throw IoError(source + ": unsupported version " + std::to_string(version));
  }
  const std::uint64_t count = get_u32(h + 4);
  Dataset d;
  d.channels = static_cast<int>(get_u32(h + 8));
  d.height = static_cast<int>(get_u32(h + 12));
  d.width = static_cast<int>(get_u32(h + 16));
  d.n_classes = static_cast<int>(get_u32(h + 20));
  const std::uint64_t pixels = count * static_cast<std::uint64_t>(get_u32(h + 8)) *
                               get_u32(h + 12) * get_u32(h + 16);
  const std::uint64_t expected = kDatasetHeaderBytes + pixels + 2 * count;
  if (bytes.size() != expected) {
    throw IoError(source + ": payload is " + std::to_string(bytes.size()) + " bytes, header implies " +
                  std::to_string(expected));
  }
  const auto img_begin = bytes.begin() + static_cast<std::ptrdiff_t>(kDatasetHeaderBytes);
  d.images.assign(img_begin, img_begin + static_cast<std::ptrdiff_t>(pixels));
  d.labels.resize(count);
  const std::uint8_t* lp = bytes.data() + kDatasetHeaderBytes + pixels;
  for (std::uint64_t i = 0; i < count; ++i) {
    d.labels[i] = static_cast<std::uint16_t>(lp[2 * i] | lp[2 * i + 1] << 8);
    if (d.labels[i] >= d.n_classes) {
      throw IoError(source + ": label " + std::to_string(d.labels[i]) + " at index " +
                    std::to_string(i) + " >= n_classes " + std::to_string(d.n_classes));
    }
  }
  return d;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_dataset(data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_dataset(bytes, path.string());
}

Dataset synth_dataset(const SynthSpec& spec) {
  if (spec.n_classes < 2 || spec.n_classes > 65535) throw SpecError("synth: n_classes out of range");
  if (spec.per_class < 1) throw SpecError("synth: per_class must be >= 1");
  if (spec.size < 16) throw SpecError("synth: size must be >= 16");
  if (spec.channels < 1) throw SpecError("synth: channels must be >= 1");
  if (!(spec.noise >= 0.0)) throw SpecError("synth: noise must be >= 0");

  Dataset d;
  d.channels = spec.channels;
  d.height = spec.size;
  d.width = spec.size;
  d.n_classes = spec.n_classes;
  const std::size_t per = d.image_numel();
  const std::size_t n = static_cast<std::size_t>(spec.n_classes) * spec.per_class;
  d.images.resize(n * per);
  d.labels.resize(n);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, spec.noise * 255.0);
  const double period_lo = 4.0;
  const double period_hi = std::max(6.0, spec.size / 3.0);
  std::vector<double> a(static_cast<std::size_t>(spec.channels));
  std::vector<double> b(a.size());
  // Samples interleave classes so any prefix stays near balanced.
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(spec.n_classes));
    d.labels[i] = static_cast<std::uint16_t>(label);
    double theta = 0.0;
    double period = 0.0;
    if (spec.task == SynthTask::kOrientation) {
      theta = std::numbers::pi * label / spec.n_classes + (unit(rng) - 0.5) * 0.2;
      period = period_lo + (period_hi - period_lo) * unit(rng);
    } else {
      theta = std::numbers::pi * unit(rng);
      period = 3.0 * std::pow(1.5, label) * (0.95 + 0.1 * unit(rng));
    }
    const double phase = unit(rng);
    // Channel contrast of at least a quarter of the range keeps every
    // image's stripes visible.
    for (std::size_t c = 0; c < a.size(); ++c) {
      const double lo = 191.0 * unit(rng);
      const double hi = lo + 64.0 + (191.0 - lo) * unit(rng);
      const bool swap = unit(rng) < 0.5;
      a[c] = swap ? hi : lo;
      b[c] = swap ? lo : hi;
    }
    const double ux = std::cos(theta);
    const double uy = std::sin(theta);
    std::uint8_t* img = d.images.data() + i * per;
    for (int y = 0; y < spec.size; ++y) {
      for (int x = 0; x < spec.size; ++x) {
        const double t = (x * ux + y * uy) / period + phase;
        const bool on = t - std::floor(t) < 0.5;
        for (int c = 0; c < spec.channels; ++c) {
          const double v = (on ? a[c] : b[c]) + gauss(rng);
          img[(static_cast<std::size_t>(c) * spec.size + y) * spec.size + x] =
              static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
      }
    }
  }
  return d;
}

}  // namespace tinytl::io
