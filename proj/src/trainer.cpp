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


#include "rangeseg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>

#include "rangeseg/config_io.hpp"
#include "rangeseg/synth_lidar.hpp"

namespace rangeseg {

namespace {

constexpr float kDepthScale = 1.0f / 50.0f;

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

Metrics make_metrics(ConfusionMatrix cm) {
  Metrics m;
  m.iou = miou(cm);
  m.scored = cm.total();
  m.confusion = std::move(cm);
  return m;
}

bool same_metrics(const Metrics& a, const Metrics& b) {
  return a.confusion == b.confusion && a.scored == b.scored && a.iou.mean == b.iou.mean &&
         a.iou.per_class == b.iou.per_class;
}

}  // namespace

void DatasetConfig::validate() const {
  if (n_scans < 1) throw ConfigError("dataset: n_scans must be >= 1");
  if (height < 1 || width < 1) throw ConfigError("dataset: image size must be positive");
  if (n_classes < 2 || n_classes > 6) throw ConfigError("dataset: n_classes must be in [2, 6]");
  if (!std::isfinite(ego_velocity) || !std::isfinite(noise_deg) || noise_deg < 0) {
    throw ConfigError("dataset: velocity and noise must be finite, noise >= 0");
  }
}

Dataset make_synthetic_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  const SensorModel sensor = SensorModel::uniform(cfg.height, cfg.width);
  const double threshold = deg2rad(1.5 * sensor.azimuth_step_deg);
  const RowMode rows = cfg.noise_deg > 0 ? RowMode::kRobust : RowMode::kLiteral;
  Dataset data;
  data.n_classes = cfg.n_classes + 1;
  for (int i = 0; i < cfg.n_scans; ++i) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    const SceneConfig scene = random_scene(seed, cfg.n_classes, cfg.ego_velocity, cfg.noise_deg);
    SynthScan scan = generate_scan(sensor, scene);
    Projection proj =
        cfg.projection == ProjectionMode::kUnfold
            ? unfold_scan(scan.cloud, &scan.labels, cfg.height, cfg.width, threshold, rows)
            : project_ego_corrected(scan.cloud_ego_corrected, &scan.labels, cfg.height, cfg.width,
                                    sensor.fov_up_deg, sensor.fov_down_deg);
    Sample s{std::move(proj.image), std::move(proj.index), scan.labels.semantic, seed};
    (seed % 2 == 0 ? data.train : data.val).push_back(std::move(s));
  }
  return data;
}

void TrainConfig::validate() const {
  if (!(adam.learning_rate >= 0) || !std::isfinite(adam.learning_rate)) {
    throw ConfigError("train: learning rate must be finite and >= 0");
  }
  if (!(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1)) {
    throw ConfigError("train: betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0)) throw ConfigError("train: epsilon must be > 0");
  if (steps < 1) throw ConfigError("train: steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  network.validate();
  dataset.validate();
}

nn::NetworkConfig TrainConfig::network_config(int n_logits) const {
  nn::NetworkConfig c = network;
  c.padding = padding;
  c.seed = seed;
  c.n_classes = n_logits;
  c.in_channels = 3;
  return c;
}

nn::Tensor make_input(std::span<const Sample* const> batch) {
  if (batch.empty()) throw ShapeError("make_input: empty batch");
  const int h = batch[0]->image.height, w = batch[0]->image.width;
  nn::Tensor x(static_cast<int>(batch.size()), h, w, 3);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const RangeImage& img = batch[b]->image;
    if (img.height != h || img.width != w) throw ShapeError("make_input: mixed image sizes");
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const std::size_t i = img.index(r, c);
        float* px = x.pixel(static_cast<int>(b), r, c);
        px[0] = img.depth[i] * kDepthScale;
        px[1] = img.reflectance[i];
        px[2] = img.mask[i] ? 1.0f : 0.0f;
      }
    }
  }
  return x;
}

std::vector<std::uint16_t> make_targets(std::span<const Sample* const> batch) {
  std::vector<std::uint16_t> t;
  for (const Sample* s : batch) t.insert(t.end(), s->image.label.begin(), s->image.label.end());
  return t;
}

std::vector<std::uint16_t> predict_labels(const nn::Tensor& logits) {
  const int c = logits.channels();
  const std::size_t n = logits.size() / std::max(c, 1);
  std::vector<std::uint16_t> out(n, kUnlabeled);
  if (c < 2) return out;
  for (std::size_t i = 0; i < n; ++i) {
    const float* z = logits.data().data() + i * c;
    out[i] = static_cast<std::uint16_t>(std::max_element(z + 1, z + c) - z);
  }
  return out;
}

TrainingDiverged::TrainingDiverged(int step, double loss)
    : std::runtime_error("training diverged at step " + std::to_string(step) + " (loss " +
                         std::to_string(loss) + ")"),
      step_(step) {}

bool RunReport::same_metrics(const RunReport& o) const {
  if (loss_trace != o.loss_trace || param_count != o.param_count || n_samples != o.n_samples ||
      config_echo != o.config_echo || point.has_value() != o.point.has_value()) {
    return false;
  }
  if (!rangeseg::same_metrics(pixel, o.pixel)) return false;
  return !point || rangeseg::same_metrics(*point, *o.point);
}

std::pair<nn::Network, RunReport> train(const TrainConfig& cfg, const Dataset& data) {
  cfg.validate();
  if (data.train.empty()) throw ConfigError("train: the training split is empty");
  nn::Network net(cfg.network_config(data.n_classes));
  net.check_input({cfg.batch_size, data.train[0].image.height, data.train[0].image.width, 3});

  nn::Adam adam(cfg.adam);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.train.size());
  std::size_t cursor = order.size();

  RunReport report;
  nn::LossOptions loss_opts;
  std::vector<const Sample*> batch;
  for (int step = 0; step < cfg.steps; ++step) {
    batch.clear();
    while (static_cast<int>(batch.size()) < cfg.batch_size) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        cursor = 0;
      }
      batch.push_back(&data.train[order[cursor++]]);
    }
    const nn::Tensor x = make_input(batch);
    const std::vector<std::uint16_t> targets = make_targets(batch);
    const nn::Tensor probs = nn::softmax(net.forward(x, nn::Mode::kTrain));

    double loss = 0.0;
    nn::Tensor grad;
    if (cfg.loss != LossKind::kDice) {
      auto ce = nn::cross_entropy(probs, targets, loss_opts);
      loss += ce.value;
      grad = std::move(ce.grad_logits);
    }
    if (cfg.loss != LossKind::kCrossEntropy) {
      auto dice = nn::dice_loss(probs, targets, loss_opts);
      loss += dice.value;
      grad = grad.size() ? nn::add(grad, dice.grad_logits) : std::move(dice.grad_logits);
    }
    if (!std::isfinite(loss)) throw TrainingDiverged(step, loss);
    report.loss_trace.push_back(loss);

    net.backward(grad);
    auto params = net.parameters();
    if (cfg.optimizer == OptimizerKind::kAdam) {
      adam.step(params);
    } else {
      nn::sgd_step(params, cfg.adam.learning_rate);
    }
  }

  const auto& eval_set = data.val.empty() ? data.train : data.val;
  RunReport eval = evaluate(net, eval_set, true);
  report.pixel = std::move(eval.pixel);
  report.point = std::move(eval.point);
  report.param_count = eval.param_count;
  report.forward_ms = eval.forward_ms;
  report.n_samples = eval.n_samples;
  Json echo = to_json(cfg);
  echo["network"] = to_json(net.config());
  report.config_echo = echo.dump();
  return {std::move(net), std::move(report)};
}

RunReport evaluate_predictions(const std::vector<Sample>& samples,
                               const std::vector<std::vector<std::uint16_t>>& predictions,
                               int n_classes, bool backproject) {
  if (predictions.size() != samples.size()) {
    throw ShapeError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(samples.size()) + " samples");
  }
  bool points = backproject;
  for (const auto& s : samples) points = points && s.index.height > 0;
  ConfusionMatrix pixel_cm(n_classes), point_cm(n_classes);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    pixel_cm.accumulate(predictions[i], s.image.label);
    if (points) {
      const auto per_point = backproject_labels(s.index, predictions[i], s.point_labels.size());
      point_cm.accumulate(per_point, s.point_labels);
    }
  }
  RunReport r;
  r.pixel = make_metrics(std::move(pixel_cm));
  if (points) r.point = make_metrics(std::move(point_cm));
  r.n_samples = static_cast<int>(samples.size());
  return r;
}

RunReport evaluate(nn::Network& net, const std::vector<Sample>& samples, bool backproject) {
  std::vector<std::vector<std::uint16_t>> predictions;
  double total_ms = 0.0;
  for (const Sample& s : samples) {
    const Sample* one[] = {&s};
    const nn::Tensor x = make_input(one);
    const auto start = std::chrono::steady_clock::now();
    const nn::Tensor logits = net.forward(x, nn::Mode::kInfer);
    total_ms += elapsed_ms(start);
    predictions.push_back(predict_labels(logits));
  }
  RunReport r = evaluate_predictions(samples, predictions, net.config().n_classes, backproject);
  r.param_count = nn::count_params(net);
  r.forward_ms = samples.empty() ? 0.0 : total_ms / static_cast<double>(samples.size());
  r.config_echo = to_json(net.config()).dump();
  return r;
}

std::vector<BenchResult> bench(const std::vector<std::string>& presets, int height, int width,
                               int repeats, int n_classes) {
  if (repeats < 1) throw ConfigError("bench: repeats must be >= 1");
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  nn::Tensor x(1, height, width, 3);
  for (auto& v : x.data()) v = unit(rng);

  std::vector<BenchResult> out;
  for (const auto& name : presets) {
    nn::NetworkConfig cfg = nn::NetworkConfig::preset(name);
    cfg.n_classes = n_classes;
    nn::Network net(cfg);
    net.check_input(x.shape());
    net.forward(x, nn::Mode::kInfer);  // warm-up
    std::vector<double> times;
    for (int r = 0; r < repeats; ++r) {
      const auto start = std::chrono::steady_clock::now();
      net.forward(x, nn::Mode::kInfer);
      times.push_back(elapsed_ms(start));
    }
    std::sort(times.begin(), times.end());
    out.push_back({name, nn::count_params(net), times[times.size() / 2]});
  }
  return out;
}

}  // namespace rangeseg
