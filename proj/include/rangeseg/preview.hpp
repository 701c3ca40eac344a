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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "rangeseg/range_image.hpp"

namespace rangeseg {

/// Binary 8-bit PGM; nearer is brighter, empty pixels are black.
std::string encode_depth_pgm(const RangeImage& image, float max_depth = 80.0f);
void write_depth_pgm(const RangeImage& image, const std::filesystem::path& path,
                     float max_depth = 80.0f);

/// Binary PPM with one fixed color per class id; unlabeled is black.
std::string encode_label_ppm(std::span<const std::uint16_t> labels, int height, int width);
void write_label_ppm(std::span<const std::uint16_t> labels, int height, int width,
                     const std::filesystem::path& path);

std::array<std::uint8_t, 3> class_color(std::uint16_t class_id);

}  // namespace rangeseg
