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

#include "rangeseg/synth_lidar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>

#include "rangeseg/common.hpp"

namespace rangeseg {

namespace {

using Eigen::Vector3d;

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  std::uint16_t class_id = 0;
  std::uint16_t instance = 0;
};

// Smallest root of a*t^2 + b*t + c above t_min that also passes `accept`.
template <typename Accept>
std::optional<double> first_root(double a, double b, double c, double t_min, Accept accept) {
  if (a <= 0) return std::nullopt;
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = (-b - sq) / (2 * a);
  const double t1 = (-b + sq) / (2 * a);
  for (double t : {t0, t1}) {
    if (t > t_min && accept(t)) return t;
  }
  return std::nullopt;
}

std::optional<double> intersect(const Box& box, const Vector3d& o, const Vector3d& d, double t_min) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < box.min[a] || o[a] > box.max[a]) return std::nullopt;
      continue;
    }
    double t0 = (box.min[a] - o[a]) / d[a];
    double t1 = (box.max[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far) return std::nullopt;
  if (t_near > t_min) return t_near;
  if (t_far > t_min) return t_far;
  return std::nullopt;
}

std::optional<double> intersect(const Cylinder& cyl, const Vector3d& o, const Vector3d& d,
                                double t_min) {
  const double ox = o.x() - cyl.cx;
  const double oy = o.y() - cyl.cy;
  const double a = d.x() * d.x() + d.y() * d.y();
  const double b = 2 * (ox * d.x() + oy * d.y());
  const double c = ox * ox + oy * oy - cyl.radius * cyl.radius;
  return first_root(a, b, c, t_min, [&](double t) {
    const double z = o.z() + t * d.z();
    return z >= cyl.z_min && z <= cyl.z_max;
  });
}

std::optional<double> intersect(const Sphere& s, const Vector3d& o, const Vector3d& d, double t_min) {
  const Vector3d oc = o - s.center;
  return first_root(d.squaredNorm(), 2 * oc.dot(d), oc.squaredNorm() - s.radius * s.radius, t_min,
                    [](double) { return true; });
}

Hit cast(const SceneConfig& scene, const Vector3d& o, const Vector3d& d, double t_min) {
  Hit best;
  auto consider = [&](std::optional<double> t, std::uint16_t cls, std::uint16_t inst) {
    if (t && *t < best.t) best = Hit{*t, cls, inst};
  };
  if (scene.has_ground && d.z() < 0) {
    consider((scene.ground_z - o.z()) / d.z(), scene.ground_class, 0);
  }
  std::uint16_t inst = 1;
  for (const auto& b : scene.boxes) consider(intersect(b, o, d, t_min), b.class_id, inst++);
  for (const auto& c : scene.cylinders) consider(intersect(c, o, d, t_min), c.class_id, inst++);
  for (const auto& s : scene.spheres) consider(intersect(s, o, d, t_min), s.class_id, inst++);
  return best;
}

}  // namespace

SensorModel SensorModel::uniform(int n_beams, int firings, double fov_up_deg, double fov_down_deg) {
  SensorModel s;
  s.n_beams = n_beams;
  s.fov_up_deg = fov_up_deg;
  s.fov_down_deg = fov_down_deg;
  s.azimuth_step_deg = 360.0 / firings;
  const double row = (fov_up_deg - fov_down_deg) / n_beams;
  s.elevations_deg.resize(n_beams);
  for (int b = 0; b < n_beams; ++b) s.elevations_deg[b] = fov_up_deg - (b + 0.5) * row;
  return s;
}

SensorModel SensorModel::kitti_like() { return uniform(64, 2048); }

int SensorModel::firings_per_rev() const {
  return static_cast<int>(std::lround(360.0 / azimuth_step_deg));
}

void SensorModel::validate() const {
  if (!(fov_down_deg < fov_up_deg)) throw ConfigError("sensor: fov_down must be below fov_up");
  if (!(azimuth_step_deg > 0)) throw ConfigError("sensor: azimuth_step must be positive");
  if (n_beams < 1) throw ConfigError("sensor: need at least one beam");
  if (static_cast<int>(elevations_deg.size()) != n_beams) {
    throw ConfigError("sensor: " + std::to_string(elevations_deg.size()) +
                      " elevations listed for " + std::to_string(n_beams) + " beams");
  }
  if (firings_per_rev() < 2) throw ConfigError("sensor: fewer than two firings per revolution");
  if (!(min_range >= 0 && max_range > min_range)) throw ConfigError("sensor: bad range limits");
  if (!(revolution_s > 0)) throw ConfigError("sensor: revolution time must be positive");
}

void SceneConfig::validate(int n_classes_limit) const {
  auto check_class = [&](std::uint16_t c) {
    if (c < 1 || c >= n_classes_limit) {
      throw ConfigError("scene: class id " + std::to_string(c) + " outside [1, " +
                        std::to_string(n_classes_limit) + ")");
    }
  };
  if (has_ground) check_class(ground_class);
  for (const auto& b : boxes) {
    if (!((b.max - b.min).array() > 0).all()) throw ConfigError("scene: box with non-positive extent");
    check_class(b.class_id);
  }
  for (const auto& c : cylinders) {
    if (!(c.radius > 0 && c.z_max > c.z_min)) throw ConfigError("scene: degenerate cylinder");
    check_class(c.class_id);
  }
  for (const auto& s : spheres) {
    if (!(s.radius > 0)) throw ConfigError("scene: sphere with non-positive radius");
    check_class(s.class_id);
  }
  if (!(noise_deg >= 0)) throw ConfigError("scene: negative noise");
}

double firing_azimuth(const SensorModel& sensor, int firing) {
  return kPi - (firing + 0.5) * deg2rad(sensor.azimuth_step_deg);
}

float class_reflectance(std::uint16_t class_id) {
  return 0.1f + 0.8f * static_cast<float>((class_id * 37u) % 11u) / 10.f;
}

SynthScan generate_scan(const SensorModel& sensor, const SceneConfig& scene) {
  sensor.validate();
  scene.validate();

  const int n_firings = sensor.firings_per_rev();
  const double sigma = deg2rad(scene.noise_deg);
  std::mt19937_64 rng(scene.seed);
  std::normal_distribution<double> jitter(0.0, sigma > 0 ? sigma : 1.0);
  std::uniform_real_distribution<float> refl_jitter(-0.05f, 0.05f);

  const double end_x = scene.ego_velocity * sensor.revolution_s;

  SynthScan scan;
  for (int beam = 0; beam < sensor.n_beams; ++beam) {
    const double elev = deg2rad(sensor.elevations_deg[beam]);
    const double ce = std::cos(elev);
    const double se = std::sin(elev);
    for (int f = 0; f < n_firings; ++f) {
      double phi = firing_azimuth(sensor, f);
      if (sigma > 0) phi += std::clamp(jitter(rng), -2 * sigma, 2 * sigma);
      const double t_f = sensor.revolution_s * f / (n_firings - 1);
      const Vector3d origin(scene.ego_velocity * t_f, 0, 0);
      const Vector3d dir(ce * std::cos(phi), ce * std::sin(phi), se);
      const Hit hit = cast(scene, origin, dir, sensor.min_range);
      if (!std::isfinite(hit.t) || hit.t > sensor.max_range) continue;

      const Vector3d rel = hit.t * dir;
      const Vector3d corrected = rel + Vector3d(origin.x() - end_x, 0, 0);
      const float refl =
          std::clamp(class_reflectance(hit.class_id) + refl_jitter(rng), 0.f, 1.f);
      scan.cloud.push_back({static_cast<float>(rel.x()), static_cast<float>(rel.y()),
                            static_cast<float>(rel.z())},
                           refl);
      scan.cloud_ego_corrected.push_back(
          {static_cast<float>(corrected.x()), static_cast<float>(corrected.y()),
           static_cast<float>(corrected.z())},
          refl);
      scan.true_rows.push_back(beam);
      scan.true_cols.push_back(f);
      scan.labels.push_back(hit.class_id, hit.instance);
    }
  }
  return scan;
}

double azimuth(const PointXYZ& p) {
  if (p.x == 0.f && p.y == 0.f) {
    throw GeometryError("azimuth undefined for a point on the sensor axis");
  }
  return std::atan2(static_cast<double>(p.y), static_cast<double>(p.x));
}

std::vector<double> azimuths(const PointCloud& cloud) {
  std::vector<double> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points) out.push_back(azimuth(p));
  return out;
}

std::vector<double> azimuth_trace(const SynthScan& scan) { return azimuths(scan.cloud); }

SceneConfig random_scene(std::uint64_t seed, int n_classes, double ego_velocity, double noise_deg) {
  if (n_classes < 2 || n_classes > 6) throw ConfigError("random_scene: n_classes must be in [2, 6]");
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SceneConfig scene;
  scene.seed = seed;
  scene.noise_deg = noise_deg;
  scene.ego_velocity = ego_velocity;
  scene.ground_z = uniform(-1.9, -1.6);
  scene.ground_class = 1;

  const double wall_radius = uniform(28.0, 42.0);
  scene.cylinders.push_back({0.0, 0.0, wall_radius, scene.ground_z - 1.0, 25.0, 2});

  // Objects keep clear of the strip the sensor drives through.
  const double path_end = std::max(0.0, ego_velocity) * 0.2 + 1.0;
  auto clear_of_path = [&](double x, double y, double r) {
    const double px = std::clamp(x, -1.0, path_end);
    return std::hypot(x - px, y) > r + 2.5;
  };

  for (int cls = 3; cls <= n_classes; ++cls) {
    const int count = cls == 3 ? 8 : 5;
    for (int k = 0; k < count; ++k) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        const double dist = uniform(4.0, wall_radius - 6.0);
        const double az = uniform(-kPi, kPi);
        const double x = dist * std::cos(az);
        const double y = dist * std::sin(az);
        if (cls == 3) {
          const bool along_x = unit(rng) < 0.5;
          const double hl = uniform(1.8, 2.4), hw = uniform(0.8, 1.0), h = uniform(1.4, 1.9);
          const double ex = along_x ? hl : hw, ey = along_x ? hw : hl;
          if (!clear_of_path(x, y, std::hypot(ex, ey))) continue;
          scene.boxes.push_back({Vector3d(x - ex, y - ey, scene.ground_z),
                                 Vector3d(x + ex, y + ey, scene.ground_z + h), 3});
        } else if (cls == 4 || cls == 5) {
          const double r = cls == 4 ? uniform(0.1, 0.25) : uniform(0.25, 0.4);
          const double h = cls == 4 ? uniform(4.0, 7.0) : uniform(1.5, 1.9);
          if (!clear_of_path(x, y, r)) continue;
          scene.cylinders.push_back({x, y, r, scene.ground_z, scene.ground_z + h,
                                     static_cast<std::uint16_t>(cls)});
        } else {
          const double r = uniform(1.0, 2.5);
          if (!clear_of_path(x, y, r)) continue;
          scene.spheres.push_back(
              {Vector3d(x, y, scene.ground_z + r * 0.8), r, static_cast<std::uint16_t>(cls)});
        }
        break;
      }
    }
  }
  return scene;
}

}  // namespace rangeseg
