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
#include <span>
#include <vector>

#include "rangeseg/common.hpp"
#include "rangeseg/point_cloud.hpp"
#include "rangeseg/range_image.hpp"

namespace rangeseg {

struct PixelCoord {
  int row = -1;
  int col = -1;

  bool valid() const { return row >= 0 && col >= 0; }
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Links pixels and source points of one projection.
///
/// Every point with a valid point_to_pixel entry landed in that pixel; it is
/// either the pixel's winner (pixel_to_point points back at it) or listed in
/// `occluded`. Points with an invalid entry fell outside the grid.
struct IndexMap {
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> pixel_to_point;  // H*W, -1 for empty pixels
  std::vector<PixelCoord> point_to_pixel;    // N
  std::vector<std::uint32_t> occluded;       // ascending point indices
};

struct Projection {
  RangeImage image;
  IndexMap index;
};

struct OcclusionStats {
  std::size_t n_points = 0;
  std::size_t n_projected = 0;
  std::size_t n_occluded = 0;
  std::size_t n_out_of_range = 0;

  friend bool operator==(const OcclusionStats&, const OcclusionStats&) = default;
};

enum class RowMode {
  kLiteral,  // new row on every |delta azimuth| > threshold
  kRobust,   // new row only where the azimuth wraps forward (delta > pi) after
             // the current row has swept more than a quarter turn
};

inline constexpr double kDefaultUnfoldThreshold = deg2rad(0.3);

/// col = floor(W * (pi - atan2(y, x)) / (2 pi)) mod W.
std::vector<int> get_columns(const PointCloud& cloud, int width);

/// Recovers the scan line of every point from the azimuth sequence: the
/// cumulative count of azimuth jumps. `cloud` must be in acquisition order.
std::vector<int> get_rows(const PointCloud& cloud, double threshold_rad,
                          RowMode mode = RowMode::kLiteral);

/// Scan unfolding of an uncorrected sweep. Points are scattered in order of
/// decreasing depth (ties by index) so the nearest point wins its pixel.
/// Rows >= height are out of range. `labels` may be null.
Projection unfold_scan(const PointCloud& cloud, const LabelArray* labels, int height, int width,
                       double threshold_rad = kDefaultUnfoldThreshold,
                       RowMode mode = RowMode::kLiteral);

/// Spherical projection over a fixed vertical field of view, as used for
/// ego-motion corrected sweeps. Rows are clamped into [0, height).
Projection project_ego_corrected(const PointCloud& cloud, const LabelArray* labels, int height,
                                 int width, double fov_up_deg, double fov_down_deg);

OcclusionStats occlusion_stats(const IndexMap& map);

/// Per-point labels read back from a label image. Occluded points take the
/// label of the pixel they fell into; out-of-range points get 0.
std::vector<std::uint16_t> backproject_labels(const IndexMap& map,
                                              std::span<const std::uint16_t> label_image,
                                              std::size_t n_points);

}  // namespace rangeseg
