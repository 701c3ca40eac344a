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

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace rangeseg {

/// H x W projection of one sweep. Planes are row-major. Pixels without a
/// point have mask 0, depth 0 and label 0 (unlabeled).
struct RangeImage {
  int height = 0;
  int width = 0;
  std::vector<float> depth;
  std::vector<float> reflectance;
  std::vector<std::uint16_t> label;
  std::vector<std::uint8_t> mask;

  RangeImage() = default;
  RangeImage(int h, int w)
      : height(h),
        width(w),
        depth(static_cast<std::size_t>(h) * w, 0.f),
        reflectance(static_cast<std::size_t>(h) * w, 0.f),
        label(static_cast<std::size_t>(h) * w, 0),
        mask(static_cast<std::size_t>(h) * w, 0) {}

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width + col;
  }

  std::size_t valid_pixels() const {
    std::size_t n = 0;
    for (auto m : mask) n += m != 0;
    return n;
  }

  friend bool operator==(const RangeImage&, const RangeImage&) = default;
};

}  // namespace rangeseg
