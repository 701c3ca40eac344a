// Copyright 2026 The rangeseg Authors
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


#include "rangeseg/preview.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "rangeseg/common.hpp"

namespace rangeseg {

namespace {

void write_text(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string header(const char* magic, int height, int width) {
  return std::string(magic) + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
}

}  // namespace

std::array<std::uint8_t, 3> class_color(std::uint16_t class_id) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 8> kPalette{{
      {0, 0, 0},
      {255, 0, 255},
      {0, 200, 255},
      {100, 150, 245},
      {150, 240, 80},
      {255, 30, 30},
      {255, 200, 0},
      {80, 30, 180},
  }};
  if (class_id < kPalette.size()) return kPalette[class_id];
  const std::uint32_t h = class_id * 2654435761u;
  return {static_cast<std::uint8_t>(h >> 24), static_cast<std::uint8_t>(h >> 16),
          static_cast<std::uint8_t>(h >> 8)};
}

std::string encode_depth_pgm(const RangeImage& image, float max_depth) {
  if (!(max_depth > 0)) throw std::invalid_argument("depth preview: max_depth must be > 0");
  std::string out = header("P5", image.height, image.width);
  for (std::size_t i = 0; i < image.pixels(); ++i) {
    unsigned char v = 0;
    if (image.mask[i]) {
      const float t = std::clamp(image.depth[i] / max_depth, 0.0f, 1.0f);
      v = static_cast<unsigned char>(std::lround(255.0f - 254.0f * t));
    }
    out.push_back(static_cast<char>(v));
  }
  return out;
}

void write_depth_pgm(const RangeImage& image, const std::filesystem::path& path, float max_depth) {
  write_text(path, encode_depth_pgm(image, max_depth));
}

std::string encode_label_ppm(std::span<const std::uint16_t> labels, int height, int width) {
  if (height < 0 || width < 0 ||
      labels.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw ShapeError("label preview: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  std::string out = header("P6", height, width);
  for (auto l : labels) {
    for (auto c : class_color(l)) out.push_back(static_cast<char>(c));
  }
  return out;
}

void write_label_ppm(std::span<const std::uint16_t> labels, int height, int width,
                     const std::filesystem::path& path) {
  write_text(path, encode_label_ppm(labels, height, width));
}

}  // namespace rangeseg
