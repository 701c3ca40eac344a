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

struct PointXYZ {
  float x = 0.f;
  float y = 0.f;
  float z = 0.f;

  friend bool operator==(const PointXYZ&, const PointXYZ&) = default;
};

/// Points of one sweep in the sensor frame, kept in acquisition order.
/// Scan unfolding relies on that order, so nothing in this library ever
/// reorders a cloud.
struct PointCloud {
  std::vector<PointXYZ> points;
  std::vector<float> reflectance;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void push_back(const PointXYZ& p, float r) {
    points.push_back(p);
    reflectance.push_back(r);
  }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

/// Per-point semantic and instance ids (SemanticKITTI layout: low and high
/// 16 bits of one word).
struct LabelArray {
  std::vector<std::uint16_t> semantic;
  std::vector<std::uint16_t> instance;

  std::size_t size() const { return semantic.size(); }

  void push_back(std::uint16_t sem, std::uint16_t inst = 0) {
    semantic.push_back(sem);
    instance.push_back(inst);
  }

  friend bool operator==(const LabelArray&, const LabelArray&) = default;
};

}  // namespace rangeseg
