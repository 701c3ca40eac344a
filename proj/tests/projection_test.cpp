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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "rangeseg/synth_lidar.hpp"

namespace rangeseg {
namespace {

PointCloud cloud_from_azimuths_deg(const std::vector<double>& az_deg, double r = 10.0) {
  PointCloud c;
  for (double a : az_deg) {
    const double t = deg2rad(a);
    c.push_back({static_cast<float>(r * std::cos(t)), static_cast<float>(r * std::sin(t)), 0.f}, 0.f);
  }
  return c;
}

// Independent oracle: the winner per pixel is the minimum depth, computed in
// double precision, with the highest index on ties.
std::map<std::size_t, std::size_t> brute_force_winners(const PointCloud& c, const std::vector<int>& rows,
                                                        const std::vector<int>& cols, int h, int w) {
  std::map<std::size_t, std::size_t> best;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= h) continue;
    const std::size_t px = static_cast<std::size_t>(rows[i]) * w + cols[i];
    const auto& p = c.points[i];
    const double d = std::sqrt(double(p.x) * p.x + double(p.y) * p.y + double(p.z) * p.z);
    auto it = best.find(px);
    if (it == best.end()) {
      best[px] = i;
      continue;
    }
    const auto& q = c.points[it->second];
    const double dq = std::sqrt(double(q.x) * q.x + double(q.y) * q.y + double(q.z) * q.z);
    if (d <= dq) it->second = i;
  }
  return best;
}

TEST(GetColumns, CardinalDirections) {
  PointCloud c;
  c.push_back({-1, 0, 0}, 0);
  c.push_back({0, 1, 0}, 0);
  c.push_back({1, 0, 0}, 0);
  c.push_back({0, -1, 0}, 0);
  EXPECT_EQ(get_columns(c, 2048), (std::vector<int>{0, 512, 1024, 1536}));
}

TEST(GetColumns, NegativeZeroSideWrapsIntoRange) {
  PointCloud c;
  c.push_back({-1, -1e-7f, 0}, 0);  // azimuth just above -pi
  const auto cols = get_columns(c, 2048);
  EXPECT_EQ(cols[0], 2047);
}

TEST(GetColumns, OriginIsAnError) {
  PointCloud c;
  c.push_back({0, 0, 1}, 0);
  EXPECT_THROW(get_columns(c, 16), GeometryError);
}

TEST(GetColumns, TotalityOnRandomPoints) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> u(-50, 50);
  PointCloud c;
  for (int i = 0; i < 5000; ++i) c.push_back({u(rng), u(rng), u(rng)}, 0);
  for (int w : {1, 7, 512, 2048}) {
    for (int col : get_columns(c, w)) {
      EXPECT_GE(col, 0);
      EXPECT_LT(col, w);
    }
  }
}

TEST(GetRows, HandTraceOfTheRecurrence) {
  const auto c = cloud_from_azimuths_deg({170.0, 169.8, 169.6, 170.0, 169.8, 169.6});
  EXPECT_EQ(get_rows(c, deg2rad(0.3)), (std::vector<int>{0, 0, 0, 1, 1, 1}));
}

TEST(GetRows, SinglePointAndEmpty) {
  EXPECT_EQ(get_rows(cloud_from_azimuths_deg({12.0}), deg2rad(0.3)), (std::vector<int>{0}));
  EXPECT_TRUE(get_rows(PointCloud{}, deg2rad(0.3)).empty());
}

TEST(GetRows, RobustModeIgnoresGapsInsideALine) {
  // Dropped returns widen the step inside both lines; line 1 starts at the wrap.
  const auto c = cloud_from_azimuths_deg({-60.0, -178.8, -179.0, -179.8, 179.9, 179.7, 178.9, 178.7});
  EXPECT_EQ(get_rows(c, deg2rad(0.3), RowMode::kLiteral), (std::vector<int>{0, 1, 1, 2, 3, 3, 4, 4}));
  EXPECT_EQ(get_rows(c, deg2rad(0.3), RowMode::kRobust), (std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1}));
}

TEST(GetRows, RobustModeAbsorbsPointsJitteredAcrossTheWrap) {
  // The last return of line 0 lands past +180 and the first of line 1 past
  // -180; only one row starts.
  const auto seam = cloud_from_azimuths_deg({-60.0, -179.9, 179.95, -179.98, 179.6, 179.4});
  EXPECT_EQ(get_rows(seam, deg2rad(0.3), RowMode::kRobust), (std::vector<int>{0, 0, 1, 1, 1, 1}));
  // The very first return of the scan wraps to -180.
  const auto start = cloud_from_azimuths_deg({-179.95, 179.8, 179.6, 0.0, -179.8, 179.9});
  EXPECT_EQ(get_rows(start, deg2rad(0.3), RowMode::kRobust), (std::vector<int>{0, 0, 0, 0, 0, 1}));
}

TEST(GetRows, NoiseFreeSyntheticScanMatchesTrueRowsInBothModes) {
  const SynthScan scan = generate_scan(SensorModel::kitti_like(), random_scene(21, 6));
  ASSERT_GT(scan.size(), 100000u);
  EXPECT_EQ(get_rows(scan.cloud, kDefaultUnfoldThreshold, RowMode::kLiteral), scan.true_rows);
  EXPECT_EQ(get_rows(scan.cloud, kDefaultUnfoldThreshold, RowMode::kRobust), scan.true_rows);
}

TEST(UnfoldScan, NearerPointWinsAndFartherIsOccluded) {
  PointCloud c;
  c.push_back({10, 0, 0}, 0.1f);
  c.push_back({5, 0, 0}, 0.9f);
  LabelArray l;
  l.push_back(3);
  l.push_back(7);
  const Projection p = unfold_scan(c, &l, 4, 8);
  const std::size_t px = p.image.index(0, 4);
  EXPECT_FLOAT_EQ(p.image.depth[px], 5.f);
  EXPECT_FLOAT_EQ(p.image.reflectance[px], 0.9f);
  EXPECT_EQ(p.image.label[px], 7);
  EXPECT_EQ(p.index.occluded, (std::vector<std::uint32_t>{0}));
  EXPECT_EQ(p.index.pixel_to_point[px], 1);
  EXPECT_EQ(p.index.point_to_pixel[0], (PixelCoord{0, 4}));
  EXPECT_EQ(occlusion_stats(p.index), (OcclusionStats{2, 1, 1, 0}));
}

TEST(UnfoldScan, EqualDepthTieGoesToTheLaterPoint) {
  // Equal depths keep their listing order in the stable sort, so the later
  // point is written last.
  PointCloud c;
  c.push_back({5, 0, 0}, 0.1f);
  c.push_back({5, 0, 0}, 0.9f);
  const Projection p = unfold_scan(c, nullptr, 1, 8);
  EXPECT_EQ(p.index.pixel_to_point[p.image.index(0, 4)], 1);
  EXPECT_EQ(p.index.occluded, (std::vector<std::uint32_t>{0}));
}

TEST(UnfoldScan, EmptyCloud) {
  const Projection p = unfold_scan(PointCloud{}, nullptr, 4, 8);
  EXPECT_EQ(p.image.valid_pixels(), 0u);
  EXPECT_EQ(occlusion_stats(p.index), (OcclusionStats{}));
}

TEST(UnfoldScan, RowsBeyondHeightAreOutOfRange) {
  const auto c = cloud_from_azimuths_deg({170.0, 169.8, 170.5, 170.3, 171.0});
  const Projection p = unfold_scan(c, nullptr, 2, 16);
  EXPECT_EQ(occlusion_stats(p.index), (OcclusionStats{5, 2, 2, 1}));
  EXPECT_FALSE(p.index.point_to_pixel[4].valid());
}

TEST(UnfoldScan, NoiseFreeScanHasNoOcclusionsAndFullDensity) {
  const SynthScan scan = generate_scan(SensorModel::kitti_like(), random_scene(4, 6));
  const Projection p = unfold_scan(scan.cloud, &scan.labels, 64, 2048);
  EXPECT_TRUE(p.index.occluded.empty());
  EXPECT_EQ(p.image.valid_pixels(), scan.size());
  for (std::size_t i = 0; i < scan.size(); ++i) {
    ASSERT_EQ(p.index.point_to_pixel[i], (PixelCoord{scan.true_rows[i], scan.true_cols[i]})) << i;
  }
}

TEST(ProjectEgoCorrected, FieldOfViewEndpoints) {
  PointCloud c;
  const double up = deg2rad(3.0), down = deg2rad(-25.0);
  c.push_back({static_cast<float>(std::cos(up)), 0, static_cast<float>(std::sin(up))}, 0);
  c.push_back({0, static_cast<float>(std::cos(down)), static_cast<float>(std::sin(down))}, 0);
  c.push_back({1, 1, 50}, 0);    // above the field of view: clamped
  c.push_back({1, -1, -50}, 0);  // below: clamped
  const Projection p = project_ego_corrected(c, nullptr, 64, 2048, 3.0, -25.0);
  EXPECT_EQ(p.index.point_to_pixel[0].row, 0);
  EXPECT_EQ(p.index.point_to_pixel[1].row, 63);
  EXPECT_EQ(p.index.point_to_pixel[2].row, 0);
  EXPECT_EQ(p.index.point_to_pixel[3].row, 63);
}

TEST(ProjectEgoCorrected, StaticScanRowsMatchBeams) {
  const SynthScan scan = generate_scan(SensorModel::kitti_like(), random_scene(8, 6));
  const Projection p = project_ego_corrected(scan.cloud_ego_corrected, &scan.labels, 64, 2048, 3.0, -25.0);
  for (std::size_t i = 0; i < scan.size(); ++i) {
    ASSERT_EQ(p.index.point_to_pixel[i].row, scan.true_rows[i]) << i;
  }
}

TEST(ProjectEgoCorrected, MovingScanHasOcclusions) {
  const SynthScan scan = generate_scan(SensorModel::kitti_like(), random_scene(8, 6, 10.0));
  const Projection ego =
      project_ego_corrected(scan.cloud_ego_corrected, &scan.labels, 64, 2048, 3.0, -25.0);
  const Projection unfold = unfold_scan(scan.cloud, &scan.labels, 64, 2048);
  EXPECT_GT(ego.index.occluded.size(), 0u);
  EXPECT_GT(occlusion_stats(ego.index).n_occluded, occlusion_stats(unfold.index).n_occluded);
}

class ScatterProperties : public ::testing::TestWithParam<int> {};

TEST_P(ScatterProperties, WinnersAreNearestAndIndexMapIsConsistent) {
  const int seed = GetParam();
  const SynthScan scan = generate_scan(SensorModel::uniform(32, 512), random_scene(seed, 6, 12.0));
  const int h = 32, w = 512;
  const Projection p = project_ego_corrected(scan.cloud_ego_corrected, &scan.labels, h, w, 3.0, -25.0);
  const auto& m = p.index;

  std::vector<int> rows(scan.size()), cols(scan.size());
  for (std::size_t i = 0; i < scan.size(); ++i) {
    rows[i] = m.point_to_pixel[i].row;
    cols[i] = m.point_to_pixel[i].col;
  }
  const auto winners = brute_force_winners(scan.cloud_ego_corrected, rows, cols, h, w);
  std::size_t masked = 0;
  for (std::size_t px = 0; px < p.image.pixels(); ++px) {
    const bool has = p.image.mask[px] != 0;
    masked += has;
    ASSERT_EQ(has, winners.count(px) == 1) << px;
    if (!has) {
      EXPECT_EQ(p.image.depth[px], 0.f);
      EXPECT_EQ(p.image.label[px], 0);
      EXPECT_EQ(m.pixel_to_point[px], -1);
      continue;
    }
    const auto i = winners.at(px);
    ASSERT_EQ(m.pixel_to_point[px], static_cast<std::int32_t>(i));
    EXPECT_GT(p.image.depth[px], 0.f);
    EXPECT_EQ(p.image.label[px], scan.labels.semantic[i]);
  }
  // Winners, occluded and out-of-range partition the points.
  const auto s = occlusion_stats(m);
  EXPECT_EQ(s.n_projected, masked);
  EXPECT_EQ(s.n_points, s.n_projected + s.n_occluded + s.n_out_of_range);
  for (auto i : m.occluded) {
    const auto px = m.point_to_pixel[i];
    ASSERT_TRUE(px.valid());
    EXPECT_NE(m.pixel_to_point[static_cast<std::size_t>(px.row) * w + px.col], static_cast<std::int32_t>(i));
  }
  EXPECT_TRUE(std::is_sorted(m.occluded.begin(), m.occluded.end()));
}

INSTANTIATE_TEST_SUITE_P(Seeds, ScatterProperties, ::testing::Values(1, 2, 3, 4));

TEST(BackprojectLabels, RoundTripRestoresVisiblePointLabels) {
  const SynthScan scan = generate_scan(SensorModel::uniform(32, 512), random_scene(3, 6, 12.0));
  const Projection p =
      project_ego_corrected(scan.cloud_ego_corrected, &scan.labels, 32, 512, 3.0, -25.0);
  const auto back = backproject_labels(p.index, p.image.label, scan.size());
  ASSERT_EQ(back.size(), scan.size());
  std::vector<bool> occluded(scan.size(), false);
  for (auto i : p.index.occluded) occluded[i] = true;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const auto px = p.index.point_to_pixel[i];
    if (!px.valid()) {
      EXPECT_EQ(back[i], 0);
      continue;
    }
    const auto label_at_pixel = p.image.label[static_cast<std::size_t>(px.row) * 512 + px.col];
    EXPECT_EQ(back[i], label_at_pixel);
    if (!occluded[i]) {
      EXPECT_EQ(back[i], scan.labels.semantic[i]);
      ++checked;
    }
  }
  EXPECT_GT(checked, 0u);
}

TEST(BackprojectLabels, OccludedPointTakesOccluderLabel) {
  PointCloud c;
  c.push_back({10, 0, 0}, 0);
  c.push_back({5, 0, 0}, 0);
  LabelArray l;
  l.push_back(3);
  l.push_back(7);
  const Projection p = unfold_scan(c, &l, 1, 8);
  EXPECT_EQ(backproject_labels(p.index, p.image.label, 2), (std::vector<std::uint16_t>{7, 7}));
}

TEST(BackprojectLabels, AllOutOfRangeGivesZeros) {
  IndexMap m;
  m.height = 2;
  m.width = 4;
  m.pixel_to_point.assign(8, -1);
  m.point_to_pixel.assign(6, PixelCoord{});
  const std::vector<std::uint16_t> img(8, 5);
  EXPECT_EQ(backproject_labels(m, img, 6), std::vector<std::uint16_t>(6, 0));
  EXPECT_EQ(occlusion_stats(m), (OcclusionStats{6, 0, 0, 6}));
}

TEST(BackprojectLabels, SizeMismatchesAreErrors) {
  PointCloud c;
  c.push_back({1, 0, 0}, 0);
  const Projection p = unfold_scan(c, nullptr, 2, 4);
  EXPECT_THROW(backproject_labels(p.index, p.image.label, 2), ShapeError);
  const std::vector<std::uint16_t> wrong(3);
  EXPECT_THROW(backproject_labels(p.index, wrong, 1), ShapeError);
}

}  // namespace
}  // namespace rangeseg
