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

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "rangeseg/nn/network.hpp"
#include "rangeseg/synth_lidar.hpp"
#include "rangeseg/trainer.hpp"

// JSON config files. Every reader rejects unknown keys and wrong types with
// ConfigError; absent keys keep their defaults. See README.md for the schema.

namespace rangeseg {

using Json = nlohmann::ordered_json;

Json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const Json& value);

Json to_json(const SensorModel& sensor);
SensorModel sensor_from_json(const Json& j);

Json to_json(const SceneConfig& scene);
SceneConfig scene_from_json(const Json& j);

Json to_json(const nn::NetworkConfig& cfg);
/// Accepts {"preset": "C", ...}; explicit keys override the preset.
nn::NetworkConfig network_from_json(const Json& j);

Json to_json(const DatasetConfig& cfg);
DatasetConfig dataset_from_json(const Json& j);

Json to_json(const TrainConfig& cfg);
TrainConfig train_from_json(const Json& j);

Json to_json(const Metrics& m);
Json to_json(const RunReport& report);

std::string_view to_string(ProjectionMode m);
std::string_view to_string(LossKind k);
std::string_view to_string(OptimizerKind k);
std::string_view to_string(nn::WidthPadding p);
ProjectionMode parse_projection_mode(std::string_view s);
LossKind parse_loss(std::string_view s);
OptimizerKind parse_optimizer(std::string_view s);
nn::WidthPadding parse_padding(std::string_view s);

}  // namespace rangeseg
