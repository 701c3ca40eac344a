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


#include "rangeseg/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rangeseg/common.hpp"

namespace rangeseg {

namespace {

class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string what) : j_(j), what_(std::move(what)) {
    if (!j.is_object()) throw ConfigError(what_ + ": expected an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (const Json* v = find(key)) out = convert<T>(*v, key);
  }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  T convert(const Json& v, const std::string& key) const {
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(what_ + "." + key + ": " + e.what());
    }
  }

  const std::string& what() const { return what_; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError(what_ + ": unknown key '" + item.key() + "'");
      }
    }
  }

 private:
  const Json& j_;
  std::string what_;
  std::set<std::string> seen_;
};

Json vec3(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(what + ": expected [x, y, z]");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

template <typename E>
E parse_enum(std::string_view s, std::initializer_list<std::pair<std::string_view, E>> table,
             const char* what) {
  std::string options;
  for (const auto& [name, value] : table) {
    if (name == s) return value;
    options += (options.empty() ? "" : ", ") + std::string(name);
  }
  throw ConfigError(std::string(what) + ": '" + std::string(s) + "' is not one of " + options);
}

template <typename E>
E enum_field(ObjectReader& r, const std::string& key, E fallback, E (*parse)(std::string_view)) {
  if (const Json* v = r.find(key)) return parse(r.convert<std::string>(*v, key));
  return fallback;
}

}  // namespace

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_json(const std::filesystem::path& path, const Json& value) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << value.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string_view to_string(ProjectionMode m) { return m == ProjectionMode::kUnfold ? "unfold" : "ego"; }

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::kCrossEntropy: return "ce";
    case LossKind::kDice: return "dice";
    case LossKind::kSum: return "sum";
  }
  return "?";
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "sgd"; }

std::string_view to_string(nn::WidthPadding p) { return p == nn::WidthPadding::kCyclic ? "cyclic" : "zeros"; }

ProjectionMode parse_projection_mode(std::string_view s) {
  return parse_enum<ProjectionMode>(
      s, {{"unfold", ProjectionMode::kUnfold}, {"ego", ProjectionMode::kEgo}}, "projection");
}

LossKind parse_loss(std::string_view s) {
  return parse_enum<LossKind>(
      s, {{"ce", LossKind::kCrossEntropy}, {"dice", LossKind::kDice}, {"sum", LossKind::kSum}},
      "loss");
}

OptimizerKind parse_optimizer(std::string_view s) {
  return parse_enum<OptimizerKind>(s, {{"adam", OptimizerKind::kAdam}, {"sgd", OptimizerKind::kSgd}},
                                   "optimizer");
}

nn::WidthPadding parse_padding(std::string_view s) {
  return parse_enum<nn::WidthPadding>(
      s, {{"cyclic", nn::WidthPadding::kCyclic}, {"zeros", nn::WidthPadding::kZeros}}, "padding");
}

// --- sensor -----------------------------------------------------------------

Json to_json(const SensorModel& s) {
  Json j;
  j["n_beams"] = s.n_beams;
  j["fov_up_deg"] = s.fov_up_deg;
  j["fov_down_deg"] = s.fov_down_deg;
  j["azimuth_step_deg"] = s.azimuth_step_deg;
  j["elevations_deg"] = s.elevations_deg;
  j["min_range"] = s.min_range;
  j["max_range"] = s.max_range;
  j["revolution_s"] = s.revolution_s;
  return j;
}

SensorModel sensor_from_json(const Json& j) {
  ObjectReader r(j, "sensor");
  SensorModel s = SensorModel::kitti_like();
  int firings = -1;
  r.get("n_beams", s.n_beams);
  r.get("fov_up_deg", s.fov_up_deg);
  r.get("fov_down_deg", s.fov_down_deg);
  r.get("azimuth_step_deg", s.azimuth_step_deg);
  r.get("firings", firings);
  const bool explicit_elev = r.find("elevations_deg") != nullptr;
  r.get("elevations_deg", s.elevations_deg);
  r.get("min_range", s.min_range);
  r.get("max_range", s.max_range);
  r.get("revolution_s", s.revolution_s);
  r.finish();
  if (firings > 0) s.azimuth_step_deg = 360.0 / firings;
  if (!explicit_elev) {
    if (s.n_beams < 1) throw ConfigError("sensor: n_beams must be positive");
    const SensorModel grid = SensorModel::uniform(s.n_beams, 1, s.fov_up_deg, s.fov_down_deg);
    s.elevations_deg = grid.elevations_deg;
  }
  s.validate();
  return s;
}

// --- scene ------------------------------------------------------------------

Json to_json(const SceneConfig& s) {
  Json j;
  j["has_ground"] = s.has_ground;
  j["ground_z"] = s.ground_z;
  j["ground_class"] = s.ground_class;
  j["seed"] = s.seed;
  j["noise_deg"] = s.noise_deg;
  j["ego_velocity"] = s.ego_velocity;
  j["boxes"] = Json::array();
  for (const auto& b : s.boxes) {
    j["boxes"].push_back({{"min", vec3(b.min)}, {"max", vec3(b.max)}, {"class", b.class_id}});
  }
  j["cylinders"] = Json::array();
  for (const auto& c : s.cylinders) {
    j["cylinders"].push_back({{"center", Json::array({c.cx, c.cy})},
                              {"radius", c.radius},
                              {"z_min", c.z_min},
                              {"z_max", c.z_max},
                              {"class", c.class_id}});
  }
  j["spheres"] = Json::array();
  for (const auto& sp : s.spheres) {
    j["spheres"].push_back({{"center", vec3(sp.center)}, {"radius", sp.radius}, {"class", sp.class_id}});
  }
  return j;
}

SceneConfig scene_from_json(const Json& j) {
  ObjectReader r(j, "scene");
  SceneConfig s;
  r.get("has_ground", s.has_ground);
  r.get("ground_z", s.ground_z);
  r.get("ground_class", s.ground_class);
  r.get("seed", s.seed);
  r.get("noise_deg", s.noise_deg);
  r.get("ego_velocity", s.ego_velocity);
  auto list = [&](const char* key) -> const Json& {
    static const Json empty = Json::array();
    const Json* v = r.find(key);
    if (!v) return empty;
    if (!v->is_array()) throw ConfigError(std::string("scene.") + key + ": expected a list");
    return *v;
  };
  for (const auto& e : list("boxes")) {
    ObjectReader br(e, "scene.boxes[]");
    Box b;
    if (const Json* v = br.find("min")) b.min = vec3_from(*v, "box.min");
    if (const Json* v = br.find("max")) b.max = vec3_from(*v, "box.max");
    br.get("class", b.class_id);
    br.finish();
    s.boxes.push_back(b);
  }
  for (const auto& e : list("cylinders")) {
    ObjectReader cr(e, "scene.cylinders[]");
    Cylinder c;
    if (const Json* v = cr.find("center")) {
      if (!v->is_array() || v->size() != 2) throw ConfigError("cylinder.center: expected [x, y]");
      c.cx = cr.convert<double>((*v)[0], "center");
      c.cy = cr.convert<double>((*v)[1], "center");
    }
    cr.get("radius", c.radius);
    cr.get("z_min", c.z_min);
    cr.get("z_max", c.z_max);
    cr.get("class", c.class_id);
    cr.finish();
    s.cylinders.push_back(c);
  }
  for (const auto& e : list("spheres")) {
    ObjectReader sr(e, "scene.spheres[]");
    Sphere sp;
    if (const Json* v = sr.find("center")) sp.center = vec3_from(*v, "sphere.center");
    sr.get("radius", sp.radius);
    sr.get("class", sp.class_id);
    sr.finish();
    s.spheres.push_back(sp);
  }
  r.finish();
  s.validate();
  return s;
}

// --- network ----------------------------------------------------------------

Json to_json(const nn::NetworkConfig& c) {
  Json j;
  j["filters"] = c.filters;
  j["blocks"] = c.blocks;
  j["default_alpha"] = c.default_alpha;
  j["alpha"] = Json::object();
  for (const auto& [name, a] : c.alpha) j["alpha"][name] = a;
  j["padding"] = to_string(c.padding);
  j["in_channels"] = c.in_channels;
  j["n_classes"] = c.n_classes;
  j["width_strides"] = c.width_strides;
  j["seed"] = c.seed;
  return j;
}

nn::NetworkConfig network_from_json(const Json& j) {
  ObjectReader r(j, "network");
  nn::NetworkConfig c;
  if (const Json* p = r.find("preset")) c = nn::NetworkConfig::preset(r.convert<std::string>(*p, "preset"));
  r.get("filters", c.filters);
  r.get("blocks", c.blocks);
  r.get("default_alpha", c.default_alpha);
  r.get("alpha", c.alpha);
  c.padding = enum_field(r, "padding", c.padding, &parse_padding);
  r.get("in_channels", c.in_channels);
  r.get("n_classes", c.n_classes);
  r.get("width_strides", c.width_strides);
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

// --- dataset / training -----------------------------------------------------

Json to_json(const DatasetConfig& c) {
  Json j;
  j["n_scans"] = c.n_scans;
  j["height"] = c.height;
  j["width"] = c.width;
  j["n_classes"] = c.n_classes;
  j["projection"] = to_string(c.projection);
  j["ego_velocity"] = c.ego_velocity;
  j["noise_deg"] = c.noise_deg;
  j["seed"] = c.seed;
  return j;
}

DatasetConfig dataset_from_json(const Json& j) {
  ObjectReader r(j, "dataset");
  DatasetConfig c;
  r.get("n_scans", c.n_scans);
  r.get("height", c.height);
  r.get("width", c.width);
  r.get("n_classes", c.n_classes);
  c.projection = enum_field(r, "projection", c.projection, &parse_projection_mode);
  r.get("ego_velocity", c.ego_velocity);
  r.get("noise_deg", c.noise_deg);
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

Json to_json(const TrainConfig& c) {
  Json j;
  j["loss"] = to_string(c.loss);
  j["optimizer"] = to_string(c.optimizer);
  j["learning_rate"] = c.adam.learning_rate;
  j["beta1"] = c.adam.beta1;
  j["beta2"] = c.adam.beta2;
  j["epsilon"] = c.adam.epsilon;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["preset"] = c.preset;
  j["network"] = to_json(c.network);
  j["padding"] = to_string(c.padding);
  j["dataset"] = to_json(c.dataset);
  return j;
}

TrainConfig train_from_json(const Json& j) {
  ObjectReader r(j, "train");
  TrainConfig c;
  c.loss = enum_field(r, "loss", c.loss, &parse_loss);
  c.optimizer = enum_field(r, "optimizer", c.optimizer, &parse_optimizer);
  r.get("learning_rate", c.adam.learning_rate);
  r.get("beta1", c.adam.beta1);
  r.get("beta2", c.adam.beta2);
  r.get("epsilon", c.adam.epsilon);
  r.get("steps", c.steps);
  r.get("batch_size", c.batch_size);
  r.get("seed", c.seed);
  r.get("preset", c.preset);
  c.network = nn::NetworkConfig::preset(c.preset);
  if (const Json* n = r.find("network")) {
    if (!n->is_object()) throw ConfigError("train.network: expected an object");
    Json merged = n->contains("preset") ? Json::object() : to_json(c.network);
    for (const auto& item : n->items()) merged[item.key()] = item.value();
    c.network = network_from_json(merged);
  }
  c.padding = enum_field(r, "padding", c.padding, &parse_padding);
  if (const Json* d = r.find("dataset")) c.dataset = dataset_from_json(*d);
  r.finish();
  c.validate();
  return c;
}

// --- reports ----------------------------------------------------------------

Json to_json(const Metrics& m) {
  Json j;
  j["miou"] = m.iou.mean ? Json(*m.iou.mean) : Json(nullptr);
  j["per_class_iou"] = Json::array();
  for (const auto& v : m.iou.per_class) j["per_class_iou"].push_back(v ? Json(*v) : Json(nullptr));
  const int n = m.confusion.n_classes();
  j["class_counts"] = Json::array();
  j["confusion"] = Json::array();
  for (int t = 0; t < n; ++t) {
    std::uint64_t row = 0;
    Json cells = Json::array();
    for (int p = 0; p < n; ++p) {
      row += m.confusion.at(t, p);
      cells.push_back(m.confusion.at(t, p));
    }
    j["class_counts"].push_back(row);
    j["confusion"].push_back(std::move(cells));
  }
  j["scored"] = m.scored;
  return j;
}

Json to_json(const RunReport& r) {
  Json j;
  j["config"] = r.config_echo.empty() ? Json(nullptr) : Json::parse(r.config_echo);
  j["param_count"] = r.param_count;
  j["n_samples"] = r.n_samples;
  j["forward_ms"] = r.forward_ms;
  j["steps"] = r.loss_trace.size();
  j["final_loss"] = r.loss_trace.empty() ? Json(nullptr) : Json(r.loss_trace.back());
  j["loss_trace"] = r.loss_trace;
  j["pixel"] = to_json(r.pixel);
  j["point"] = r.point ? to_json(*r.point) : Json(nullptr);
  return j;
}

}  // namespace rangeseg
