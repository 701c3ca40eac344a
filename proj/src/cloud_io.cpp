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

#include "rangeseg/cloud_io.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "rangeseg/byte_io.hpp"
#include "rangeseg/common.hpp"

namespace rangeseg {

namespace {

constexpr std::size_t kPointRecord = 16;
constexpr std::size_t kChannelNameWidth = 16;
constexpr std::array<const char*, 3> kRimgChannels = {"depth", "reflectance", "label"};

}  // namespace

PointCloud read_point_cloud(std::span<const std::byte> bytes) {
  if (bytes.size() % kPointRecord != 0) {
    throw FormatError("point cloud: byte length " + std::to_string(bytes.size()) +
                      " is not a multiple of 16");
  }
  const std::size_t n = bytes.size() / kPointRecord;
  PointCloud cloud;
  cloud.points.reserve(n);
  cloud.reflectance.reserve(n);
  ByteReader in(bytes, "point cloud");
  for (std::size_t i = 0; i < n; ++i) {
    PointXYZ p;
    p.x = in.f32();
    p.y = in.f32();
    p.z = in.f32();
    const float r = in.f32();
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) || !std::isfinite(r)) {
      throw FormatError("point cloud: non-finite value in point " + std::to_string(i));
    }
    cloud.push_back(p, r);
  }
  return cloud;
}

std::vector<std::byte> encode_point_cloud(const PointCloud& cloud) {
  ByteWriter out;
  out.bytes().reserve(cloud.size() * kPointRecord);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out.f32(cloud.points[i].x);
    out.f32(cloud.points[i].y);
    out.f32(cloud.points[i].z);
    out.f32(cloud.reflectance[i]);
  }
  return out.take();
}

LabelArray read_labels(std::span<const std::byte> bytes) {
  if (bytes.size() % 4 != 0) {
    throw FormatError("labels: byte length " + std::to_string(bytes.size()) +
                      " is not a multiple of 4");
  }
  LabelArray labels;
  labels.semantic.reserve(bytes.size() / 4);
  labels.instance.reserve(bytes.size() / 4);
  ByteReader in(bytes, "labels");
  while (in.remaining() > 0) {
    const std::uint32_t word = in.u32();
    labels.push_back(static_cast<std::uint16_t>(word & 0xFFFFu),
                     static_cast<std::uint16_t>(word >> 16));
  }
  return labels;
}

std::vector<std::byte> encode_labels(const LabelArray& labels) {
  ByteWriter out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint32_t inst = i < labels.instance.size() ? labels.instance[i] : 0u;
    out.u32(static_cast<std::uint32_t>(labels.semantic[i]) | (inst << 16));
  }
  return out.take();
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(buf.size());
  std::memcpy(out.data(), buf.data(), buf.size());
  return out;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  return read_point_cloud(read_file_bytes(path));
}

void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  write_file_bytes(path, encode_point_cloud(cloud));
}

LabelArray load_labels(const std::filesystem::path& path) {
  return read_labels(read_file_bytes(path));
}

void save_labels(const LabelArray& labels, const std::filesystem::path& path) {
  write_file_bytes(path, encode_labels(labels));
}

std::vector<std::byte> encode_range_image(const RangeImage& img) {
  const std::size_t n = img.pixels();
  if (img.depth.size() != n || img.reflectance.size() != n || img.label.size() != n ||
      img.mask.size() != n) {
    throw ShapeError("range image: plane sizes do not match " + std::to_string(img.height) + "x" +
                     std::to_string(img.width));
  }
  ByteWriter out;
  out.raw("RIMG");
  out.u32(kRimgVersion);
  out.u32(static_cast<std::uint32_t>(img.height));
  out.u32(static_cast<std::uint32_t>(img.width));
  out.u32(static_cast<std::uint32_t>(kRimgChannels.size()));
  for (const char* name : kRimgChannels) out.padded(name, kChannelNameWidth);
  for (float v : img.depth) out.f32(v);
  for (float v : img.reflectance) out.f32(v);
  for (auto v : img.label) out.f32(static_cast<float>(v));
  for (auto m : img.mask) out.u8(m);
  return out.take();
}

RangeImage decode_range_image(std::span<const std::byte> bytes) {
  ByteReader in(bytes, "RIMG");
  if (in.raw(4) != "RIMG") in.fail("bad magic");
  const std::uint32_t version = in.u32();
  if (version != kRimgVersion) in.fail("unsupported version " + std::to_string(version));
  const std::uint32_t h = in.u32();
  const std::uint32_t w = in.u32();
  if (h > (1u << 16) || w > (1u << 20)) in.fail("implausible dimensions");
  const std::uint32_t n_channels = in.u32();
  if (n_channels > 64) in.fail("implausible channel count " + std::to_string(n_channels));
  std::vector<std::string> names;
  for (std::uint32_t c = 0; c < n_channels; ++c) names.push_back(in.padded(kChannelNameWidth));

  const std::size_t n = static_cast<std::size_t>(h) * w;
  in.need(n_channels * n * 4 + n);

  RangeImage img(static_cast<int>(h), static_cast<int>(w));
  std::array<bool, kRimgChannels.size()> seen{};
  for (const auto& name : names) {
    std::size_t slot = kRimgChannels.size();
    for (std::size_t k = 0; k < kRimgChannels.size(); ++k) {
      if (name == kRimgChannels[k]) slot = k;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const float v = in.f32();
      switch (slot) {
        case 0: img.depth[i] = v; break;
        case 1: img.reflectance[i] = v; break;
        case 2:
          if (!(v >= 0.f && v <= 65535.f) || v != std::floor(v)) {
            in.fail("label plane holds non-integer value at pixel " + std::to_string(i));
          }
          img.label[i] = static_cast<std::uint16_t>(v);
          break;
        default: break;  // unknown channel, skipped
      }
    }
    if (slot < seen.size()) seen[slot] = true;
  }
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (!seen[k]) in.fail(std::string("missing channel '") + kRimgChannels[k] + "'");
  }
  for (std::size_t i = 0; i < n; ++i) img.mask[i] = in.u8();
  if (in.remaining() != 0) in.fail("trailing bytes after mask plane");
  return img;
}

void write_range_image(const RangeImage& img, const std::filesystem::path& path) {
  write_file_bytes(path, encode_range_image(img));
}

RangeImage read_range_image(const std::filesystem::path& path) {
  return decode_range_image(read_file_bytes(path));
}

}  // namespace rangeseg
