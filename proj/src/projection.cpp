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

#include "rangeseg/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rangeseg/synth_lidar.hpp"

namespace rangeseg {

namespace {

std::vector<double> depths(const PointCloud& cloud) {
  std::vector<double> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const double x = p.x, y = p.y, z = p.z;
    out[i] = std::sqrt(x * x + y * y + z * z);
  }
  return out;
}

void check_grid(int height, int width) {
  if (height < 1 || width < 1) {
    throw ConfigError("projection grid must be at least 1x1, got " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
}

Projection scatter(const PointCloud& cloud, const LabelArray* labels, int height, int width,
                   const std::vector<int>& rows, const std::vector<int>& cols,
                   const std::vector<double>& depth) {
  if (labels && labels->size() != cloud.size()) {
    throw ShapeError("projection: " + std::to_string(labels->size()) + " labels for " +
                     std::to_string(cloud.size()) + " points");
  }
  const std::size_t n = cloud.size();
  Projection out;
  out.image = RangeImage(height, width);
  out.index.height = height;
  out.index.width = width;
  out.index.pixel_to_point.assign(out.image.pixels(), -1);
  out.index.point_to_pixel.assign(n, PixelCoord{});

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return depth[a] > depth[b]; });

  for (std::uint32_t i : order) {
    if (rows[i] < 0 || rows[i] >= height) continue;
    const PixelCoord px{rows[i], cols[i]};
    out.index.point_to_pixel[i] = px;
    const std::size_t k = out.image.index(px.row, px.col);
    if (out.index.pixel_to_point[k] >= 0) {
      out.index.occluded.push_back(static_cast<std::uint32_t>(out.index.pixel_to_point[k]));
    }
    out.index.pixel_to_point[k] = static_cast<std::int32_t>(i);
    out.image.depth[k] = static_cast<float>(depth[i]);
    out.image.reflectance[k] = cloud.reflectance[i];
    out.image.label[k] = labels ? labels->semantic[i] : 0;
    out.image.mask[k] = 1;
  }
  std::sort(out.index.occluded.begin(), out.index.occluded.end());
  return out;
}

}  // namespace

std::vector<int> get_columns(const PointCloud& cloud, int width) {
  if (width < 1) throw ConfigError("get_columns: width must be positive");
  std::vector<int> cols(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double phi = azimuth(cloud.points[i]);
    const auto c = static_cast<long>(std::floor(width * (kPi - phi) / (2 * kPi)));
    cols[i] = static_cast<int>(((c % width) + width) % width);
  }
  return cols;
}

std::vector<int> get_rows(const PointCloud& cloud, double threshold_rad, RowMode mode) {
  std::vector<int> rows(cloud.size());
  if (cloud.empty()) return rows;
  double prev = azimuth(cloud.points[0]);
  double sweep = 0.0;  // unwrapped azimuth covered by the current robust row
  int row = 0;
  rows[0] = 0;
  for (std::size_t i = 1; i < cloud.size(); ++i) {
    const double phi = azimuth(cloud.points[i]);
    const double delta = phi - prev;
    if (mode == RowMode::kLiteral) {
      if (std::abs(delta) > threshold_rad) ++row;
    } else if (delta > kPi && std::abs(sweep) > kPi / 2) {
      ++row;
      sweep = 0.0;
    } else {
      sweep += std::remainder(delta, 2 * kPi);
    }
    rows[i] = row;
    prev = phi;
  }
  return rows;
}

Projection unfold_scan(const PointCloud& cloud, const LabelArray* labels, int height, int width,
                       double threshold_rad, RowMode mode) {
  check_grid(height, width);
  const auto depth = depths(cloud);
  const auto rows = get_rows(cloud, threshold_rad, mode);
  const auto cols = get_columns(cloud, width);
  return scatter(cloud, labels, height, width, rows, cols, depth);
}

Projection project_ego_corrected(const PointCloud& cloud, const LabelArray* labels, int height,
                                 int width, double fov_up_deg, double fov_down_deg) {
  check_grid(height, width);
  if (!(fov_down_deg < fov_up_deg)) throw ConfigError("projection: fov_down must be below fov_up");
  const double up = deg2rad(fov_up_deg);
  const double span = up - deg2rad(fov_down_deg);
  const auto depth = depths(cloud);
  const auto cols = get_columns(cloud, width);
  std::vector<int> rows(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double elevation = std::asin(cloud.points[i].z / depth[i]);
    const double r = std::floor(height * (up - elevation) / span);
    rows[i] = static_cast<int>(std::clamp(r, 0.0, static_cast<double>(height - 1)));
  }
  return scatter(cloud, labels, height, width, rows, cols, depth);
}

OcclusionStats occlusion_stats(const IndexMap& map) {
  OcclusionStats s;
  s.n_points = map.point_to_pixel.size();
  s.n_occluded = map.occluded.size();
  for (const auto& p : map.point_to_pixel) s.n_out_of_range += !p.valid();
  for (auto k : map.pixel_to_point) s.n_projected += k >= 0;
  return s;
}

std::vector<std::uint16_t> backproject_labels(const IndexMap& map,
                                              std::span<const std::uint16_t> label_image,
                                              std::size_t n_points) {
  if (n_points != map.point_to_pixel.size()) {
    throw ShapeError("backproject_labels: index map covers " +
                     std::to_string(map.point_to_pixel.size()) + " points, asked for " +
                     std::to_string(n_points));
  }
  if (label_image.size() != static_cast<std::size_t>(map.height) * map.width) {
    throw ShapeError("backproject_labels: label image size does not match the index map");
  }
  std::vector<std::uint16_t> out(n_points, 0);
  for (std::size_t i = 0; i < n_points; ++i) {
    const auto& px = map.point_to_pixel[i];
    if (px.valid()) out[i] = label_image[static_cast<std::size_t>(px.row) * map.width + px.col];
  }
  return out;
}

}  // namespace rangeseg
