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
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rangeseg/nn/network.hpp"
#include "rangeseg/nn/optimizer.hpp"
#include "rangeseg/objectives.hpp"
#include "rangeseg/projection.hpp"
#include "rangeseg/range_image.hpp"

namespace rangeseg {

enum class ProjectionMode { kUnfold, kEgo };
enum class LossKind { kCrossEntropy, kDice, kSum };
enum class OptimizerKind { kAdam, kSgd };

/// Synthetic scene set. Scene seeds are seed, seed + 1, ...; even seeds go
/// to the training split and odd seeds to validation.
struct DatasetConfig {
  int n_scans = 40;
  int height = 64;
  int width = 512;
  int n_classes = 3;  // semantic classes besides unlabeled, 2..6
  ProjectionMode projection = ProjectionMode::kUnfold;
  double ego_velocity = 0.0;  // m/s
  double noise_deg = 0.0;
  std::uint64_t seed = 1000;

  /// Throws ConfigError.
  void validate() const;
};

struct Sample {
  RangeImage image;
  IndexMap index;                          // empty when the points are unknown
  std::vector<std::uint16_t> point_labels;  // ground truth per original point
  std::uint64_t seed = 0;
};

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> val;
  int n_classes = 0;  // logits, including unlabeled
};

Dataset make_synthetic_dataset(const DatasetConfig& cfg);

struct TrainConfig {
  LossKind loss = LossKind::kCrossEntropy;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  nn::AdamOptions adam;  // learning_rate is shared with plain descent
  int steps = 200;
  int batch_size = 1;
  std::uint64_t seed = 7;
  std::string preset = "A";
  nn::NetworkConfig network = nn::NetworkConfig::preset("A");
  nn::WidthPadding padding = nn::WidthPadding::kCyclic;
  DatasetConfig dataset;

  /// Throws ConfigError. A learning rate of zero is accepted and freezes
  /// the parameters.
  void validate() const;
  /// Network description with padding, seed and class count filled in.
  nn::NetworkConfig network_config(int n_logits) const;
};

/// Network input planes: depth / 50, reflectance, mask.
nn::Tensor make_input(std::span<const Sample* const> batch);
std::vector<std::uint16_t> make_targets(std::span<const Sample* const> batch);

/// Argmax over every class except unlabeled.
std::vector<std::uint16_t> predict_labels(const nn::Tensor& logits);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int step, double loss);
  int step() const { return step_; }

 private:
  int step_;
};

struct Metrics {
  ConfusionMatrix confusion;
  IouReport iou;
  std::uint64_t scored = 0;
};

struct RunReport {
  std::vector<double> loss_trace;
  Metrics pixel;
  std::optional<Metrics> point;  // back-projected onto the original points
  std::size_t param_count = 0;
  double forward_ms = 0.0;  // mean inference forward pass, one sample
  int n_samples = 0;
  std::string config_echo;  // JSON text of the configuration used

  /// Every field except timing.
  bool same_metrics(const RunReport& other) const;
};

std::pair<nn::Network, RunReport> train(const TrainConfig& cfg, const Dataset& data);

/// Scores the network on `samples`. Per-point metrics are added when
/// `backproject` is set and every sample carries its index map.
RunReport evaluate(nn::Network& net, const std::vector<Sample>& samples, bool backproject);

/// Scores given per-pixel predictions, one vector per sample.
RunReport evaluate_predictions(const std::vector<Sample>& samples,
                               const std::vector<std::vector<std::uint16_t>>& predictions,
                               int n_classes, bool backproject);

struct BenchResult {
  std::string preset;
  std::size_t param_count = 0;
  double forward_ms = 0.0;  // median over repeats
};

/// Inference forward-pass timing of each preset on a random [1, H, W, 3] input.
std::vector<BenchResult> bench(const std::vector<std::string>& presets, int height, int width,
                               int repeats, int n_classes = 20);

}  // namespace rangeseg
