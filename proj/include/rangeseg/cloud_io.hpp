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
#include <filesystem>
#include <span>
#include <vector>

#include "rangeseg/point_cloud.hpp"
#include "rangeseg/range_image.hpp"

namespace rangeseg {

// KITTI velodyne .bin: float32 (x, y, z, reflectance) records, little-endian.
// Reflectance is passed through unmodified.
PointCloud read_point_cloud(std::span<const std::byte> bytes);
std::vector<std::byte> encode_point_cloud(const PointCloud& cloud);

// SemanticKITTI .label: one little-endian uint32 per point, semantic id in the
// low 16 bits and instance id in the high 16 bits.
LabelArray read_labels(std::span<const std::byte> bytes);
std::vector<std::byte> encode_labels(const LabelArray& labels);

PointCloud load_point_cloud(const std::filesystem::path& path);
void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path);
LabelArray load_labels(const std::filesystem::path& path);
void save_labels(const LabelArray& labels, const std::filesystem::path& path);

// RIMG container, all integers little-endian:
//
//   char[4] "RIMG" | u32 version (=1) | u32 H | u32 W
//   u32 n_channels | n_channels x char[16] NUL-padded channel name
//   n_channels x (H*W float32) planes, in directory order
//   H*W bytes mask plane
//
// Version 1 writers emit the channels "depth", "reflectance" and "label";
// readers locate them by name and reject files missing any of them.
inline constexpr std::uint32_t kRimgVersion = 1;

std::vector<std::byte> encode_range_image(const RangeImage& img);
RangeImage decode_range_image(std::span<const std::byte> bytes);
void write_range_image(const RangeImage& img, const std::filesystem::path& path);
RangeImage read_range_image(const std::filesystem::path& path);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace rangeseg
