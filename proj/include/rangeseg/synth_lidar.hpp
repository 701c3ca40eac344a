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

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "rangeseg/point_cloud.hpp"

namespace rangeseg {

/// Rotating multi-beam scanner. Beam 0 is the topmost module.
struct SensorModel {
  int n_beams = 64;
  double fov_up_deg = 3.0;
  double fov_down_deg = -25.0;
  double azimuth_step_deg = 0.17578125;  // 2048 firings per revolution
  std::vector<double> elevations_deg;    // one per beam, top to bottom
  double min_range = 0.5;
  double max_range = 1000.0;
  double revolution_s = 0.1;

  /// 64 beams over [-25, +3] degrees, 2048 firings, each beam centred in
  /// its row of a 64-row spherical grid spanning the same field of view.
  static SensorModel kitti_like();
  /// Same geometry with n_beams beams and `firings` firings per revolution.
  static SensorModel uniform(int n_beams, int firings, double fov_up_deg = 3.0,
                             double fov_down_deg = -25.0);

  int firings_per_rev() const;
  /// Throws ConfigError.
  void validate() const;
};

struct Box {
  Eigen::Vector3d min;
  Eigen::Vector3d max;
  std::uint16_t class_id = 0;
};

/// Vertical open tube; rays from inside hit the inner wall.
struct Cylinder {
  double cx = 0, cy = 0, radius = 1;
  double z_min = -2, z_max = 2;
  std::uint16_t class_id = 0;
};

struct Sphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1;
  std::uint16_t class_id = 0;
};

/// Static world expressed in the sensor frame at the start of the sweep.
struct SceneConfig {
  bool has_ground = true;
  double ground_z = -1.73;
  std::uint16_t ground_class = 1;
  std::vector<Box> boxes;
  std::vector<Cylinder> cylinders;
  std::vector<Sphere> spheres;
  std::uint64_t seed = 0;
  double noise_deg = 0.0;   // azimuth jitter stddev per ray, truncated at 2 stddev
  double ego_velocity = 0;  // m/s along +x

  /// Throws ConfigError.
  void validate(int n_classes_limit = 65536) const;
};

/// Ground truth for one simulated sweep. Points are listed beam-major in
/// acquisition order: beam 0 over a full revolution, then beam 1, and so on.
/// The revolution starts and ends at the rear cut (azimuth +pi / -pi).
struct SynthScan {
  PointCloud cloud;                // each point relative to its firing pose
  PointCloud cloud_ego_corrected;  // every point in the last firing's pose
  std::vector<int> true_rows;      // beam index
  std::vector<int> true_cols;      // firing index
  LabelArray labels;               // instance = primitive index + 1, ground 0

  std::size_t size() const { return cloud.size(); }
};

/// Ray-casts every (beam, firing) pair against the scene. Misses are dropped;
/// a scene with no hits yields an empty scan. Firing f happens at
/// t_f = revolution_s * f / (F - 1) with the sensor at (v * t_f, 0, 0).
SynthScan generate_scan(const SensorModel& sensor, const SceneConfig& scene);

/// Azimuth of the firing that starts the revolution; firing f points at
/// first_azimuth - f * step, clockwise seen from above.
double firing_azimuth(const SensorModel& sensor, int firing);

/// atan2(y, x) in (-pi, pi]. Throws GeometryError for points on the z axis.
double azimuth(const PointXYZ& p);
std::vector<double> azimuths(const PointCloud& cloud);
std::vector<double> azimuth_trace(const SynthScan& scan);

/// Enclosed street-like scene: ground (class 1), a surrounding wall (class 2)
/// tall enough that every beam returns, and boxes, poles and round objects
/// for classes 3..n_classes. n_classes is the number of semantic classes
/// excluding unlabeled, in [2, 6].
SceneConfig random_scene(std::uint64_t seed, int n_classes, double ego_velocity = 0.0,
                         double noise_deg = 0.0);

/// Class-dependent base reflectance used by the simulator.
float class_reflectance(std::uint16_t class_id);

}  // namespace rangeseg
