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


#include "rangeseg/cli.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rangeseg/cloud_io.hpp"
#include "rangeseg/config_io.hpp"
#include "rangeseg/preview.hpp"
#include "rangeseg/projection.hpp"
#include "rangeseg/synth_lidar.hpp"
#include "rangeseg/trainer.hpp"

namespace rangeseg {

namespace {

struct GridFlags {
  int height = 64;
  int width = 2048;
  double threshold_deg = rad2deg(kDefaultUnfoldThreshold);
  double fov_up = 3.0;
  double fov_down = -25.0;
  bool robust = false;

  void add(CLI::App* app) {
    app->add_option("--height", height, "Image rows")->check(CLI::PositiveNumber);
    app->add_option("--width", width, "Image columns")->check(CLI::PositiveNumber);
    app->add_option("--threshold-deg", threshold_deg, "Unfold azimuth-jump threshold (degrees)");
    app->add_option("--fov-up", fov_up, "Upper field-of-view bound (degrees), ego mode");
    app->add_option("--fov-down", fov_down, "Lower field-of-view bound (degrees), ego mode");
    app->add_flag("--robust", robust, "Unfold: start a new row only where the azimuth wraps");
  }

  Projection project(const PointCloud& cloud, const LabelArray* labels, ProjectionMode mode) const {
    if (mode == ProjectionMode::kUnfold) {
      return unfold_scan(cloud, labels, height, width, deg2rad(threshold_deg),
                         robust ? RowMode::kRobust : RowMode::kLiteral);
    }
    return project_ego_corrected(cloud, labels, height, width, fov_up, fov_down);
  }
};

void print_stats(std::ostream& out, std::string_view tag, const OcclusionStats& s) {
  out << tag << ": points " << s.n_points << " projected " << s.n_projected << " occluded "
      << s.n_occluded << " out_of_range " << s.n_out_of_range << '\n';
}

struct DatasetFlags {
  std::optional<int> scans, height, width, classes;
  std::optional<std::string> projection;
  std::optional<double> velocity, noise;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("--scans", scans, "Number of synthetic scans")->check(CLI::PositiveNumber);
    app->add_option("--height", height, "Image rows")->check(CLI::PositiveNumber);
    app->add_option("--width", width, "Image columns")->check(CLI::PositiveNumber);
    app->add_option("--classes", classes, "Semantic classes besides unlabeled (2-6)");
    app->add_option("--projection", projection, "unfold or ego")
        ->check(CLI::IsMember({"unfold", "ego"}));
    app->add_option("--velocity", velocity, "Ego velocity (m/s)");
    app->add_option("--noise-deg", noise, "Azimuth noise stddev (degrees)");
    app->add_option("--data-seed", seed, "First scene seed");
  }

  void apply(DatasetConfig& d) const {
    if (scans) d.n_scans = *scans;
    if (height) d.height = *height;
    if (width) d.width = *width;
    if (classes) d.n_classes = *classes;
    if (projection) d.projection = parse_projection_mode(*projection);
    if (velocity) d.ego_velocity = *velocity;
    if (noise) d.noise_deg = *noise;
    if (seed) d.seed = *seed;
    d.validate();
  }
};

void print_metrics(std::ostream& out, std::string_view tag, const Metrics& m) {
  out << tag << " mIoU ";
  if (m.iou.mean) {
    out << std::fixed << std::setprecision(4) << *m.iou.mean;
  } else {
    out << "n/a";
  }
  out << " (scored " << m.scored << ")";
  for (std::size_t c = 0; c < m.iou.per_class.size(); ++c) {
    if (m.iou.per_class[c]) out << " c" << c << "=" << std::setprecision(4) << *m.iou.per_class[c];
  }
  out << std::defaultfloat << '\n';
}

void print_report(std::ostream& out, const RunReport& r) {
  out << "params " << r.param_count << " samples " << r.n_samples << " forward_ms " << std::fixed
      << std::setprecision(2) << r.forward_ms << std::defaultfloat << '\n';
  print_metrics(out, "pixel", r.pixel);
  if (r.point) print_metrics(out, "point", *r.point);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Range-image LiDAR semantic segmentation toolkit", "rangeseg"};
  app.require_subcommand(1);

  // project
  auto* project = app.add_subcommand("project", "Project a point cloud into an RIMG range image");
  std::string proj_input, proj_labels, proj_output, proj_preview, proj_label_preview;
  std::string proj_mode = "unfold";
  GridFlags proj_grid;
  project->add_option("input", proj_input, "Point cloud (.bin)")->required();
  project->add_option("--labels", proj_labels, "Per-point labels (.label)");
  project->add_option("-o,--output", proj_output, "Output range image (.rimg)")->required();
  project->add_option("--preview", proj_preview, "Depth preview (.pgm)");
  project->add_option("--label-preview", proj_label_preview, "Class preview (.ppm)");
  project->add_option("--mode", proj_mode, "unfold or ego")->check(CLI::IsMember({"unfold", "ego"}));
  proj_grid.add(project);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scan");
  std::string synth_sensor, synth_scene, synth_output, synth_save_scene;
  std::uint64_t synth_seed = 1;
  int synth_classes = 6;
  double synth_velocity = 0.0, synth_noise = 0.0;
  synth->add_option("--sensor", synth_sensor, "Sensor config (.json); default 64x2048");
  synth->add_option("--scene", synth_scene, "Scene config (.json); default random scene");
  synth->add_option("--seed", synth_seed, "Random scene seed");
  synth->add_option("--classes", synth_classes, "Random scene classes (2-6)");
  synth->add_option("--velocity", synth_velocity, "Random scene ego velocity (m/s)");
  synth->add_option("--noise-deg", synth_noise, "Random scene azimuth noise (degrees)");
  synth->add_option("--save-scene", synth_save_scene, "Write the scene config used (.json)");
  synth->add_option("-o,--output", synth_output,
                    "Output prefix: writes PREFIX.bin, PREFIX.label, PREFIX.ego.bin")
      ->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Compare occlusions of both projection modes");
  std::string stats_input, stats_ego;
  GridFlags stats_grid;
  stats->add_option("input", stats_input, "Point cloud in sensor order (.bin)")->required();
  stats->add_option("--ego-cloud", stats_ego, "Ego-corrected cloud (.bin); default: input");
  stats_grid.add(stats);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train on a synthetic scene set");
  std::string train_config, train_report, train_weights;
  std::optional<int> train_steps, train_batch;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::string> train_loss, train_optimizer, train_preset, train_padding;
  std::optional<double> train_lr;
  DatasetFlags train_data;
  bool train_quiet = false;
  train_cmd->add_option("--config", train_config, "Training config (.json)");
  train_cmd->add_option("--steps", train_steps, "Optimizer steps")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch-size", train_batch, "Scans per step")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train_seed, "Initialization and shuffling seed");
  train_cmd->add_option("--loss", train_loss, "ce, dice or sum")
      ->check(CLI::IsMember({"ce", "dice", "sum"}));
  train_cmd->add_option("--optimizer", train_optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}));
  train_cmd->add_option("--lr", train_lr, "Learning rate");
  train_cmd->add_option("--preset", train_preset, "Network preset: A, B, C, D or R*");
  train_cmd->add_option("--padding", train_padding, "cyclic or zeros")
      ->check(CLI::IsMember({"cyclic", "zeros"}));
  train_cmd->add_option("--report", train_report, "Write the run report (.json)");
  train_cmd->add_option("--weights", train_weights, "Write trained weights (.rswt)");
  train_cmd->add_flag("-q,--quiet", train_quiet, "Do not print the loss trace");
  train_data.add(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate trained weights");
  std::string eval_config, eval_weights, eval_report, eval_split = "val";
  std::vector<std::string> eval_rimg;
  std::optional<std::string> eval_preset, eval_padding;
  bool eval_no_backproject = false;
  DatasetFlags eval_data;
  eval_cmd->add_option("--weights", eval_weights, "Trained weights (.rswt)")->required();
  eval_cmd->add_option("--config", eval_config, "Training config used for the weights (.json)");
  eval_cmd->add_option("--preset", eval_preset, "Network preset: A, B, C, D or R*");
  eval_cmd->add_option("--padding", eval_padding, "cyclic or zeros")
      ->check(CLI::IsMember({"cyclic", "zeros"}));
  eval_cmd->add_option("--split", eval_split, "train, val or all")
      ->check(CLI::IsMember({"train", "val", "all"}));
  eval_cmd->add_option("--rimg", eval_rimg, "Score these range images instead of synthetic scans");
  eval_cmd->add_flag("--no-backproject", eval_no_backproject, "Skip per-point scoring");
  eval_cmd->add_option("--report", eval_report, "Write the metric report (.json)");
  eval_data.add(eval_cmd);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Time inference forward passes across presets");
  int bench_height = 64, bench_width = 2048, bench_repeats = 3;
  std::vector<std::string> bench_presets = nn::NetworkConfig::preset_names();
  std::string bench_report;
  bench_cmd->add_option("--height", bench_height, "Input rows")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--width", bench_width, "Input columns")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--repeats", bench_repeats, "Timed passes per preset")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--configs", bench_presets, "Presets to time")->delimiter(',');
  bench_cmd->add_option("--report", bench_report, "Write timings (.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* shown = &app;
    for (const auto* sub : app.get_subcommands()) shown = sub;
    out << shown->help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    const CLI::App* shown = &app;
    for (const auto* sub : app.get_subcommands()) shown = sub;
    err << "error: " << e.what() << "\n\n" << shown->help();
    return 2;
  }

  try {
    if (project->parsed()) {
      const ProjectionMode mode = parse_projection_mode(proj_mode);
      const PointCloud cloud = load_point_cloud(proj_input);
      std::optional<LabelArray> labels;
      if (!proj_labels.empty()) labels = load_labels(proj_labels);
      if (labels && labels->semantic.size() != cloud.size()) {
        throw ShapeError(proj_labels + ": " + std::to_string(labels->semantic.size()) +
                         " labels for " + std::to_string(cloud.size()) + " points");
      }
      const Projection p = proj_grid.project(cloud, labels ? &*labels : nullptr, mode);
      write_range_image(p.image, proj_output);
      if (!proj_preview.empty()) write_depth_pgm(p.image, proj_preview);
      if (!proj_label_preview.empty()) {
        write_label_ppm(p.image.label, p.image.height, p.image.width, proj_label_preview);
      }
      print_stats(out, to_string(mode), occlusion_stats(p.index));
    } else if (synth->parsed()) {
      const SensorModel sensor =
          synth_sensor.empty() ? SensorModel::kitti_like() : sensor_from_json(load_json(synth_sensor));
      const SceneConfig scene =
          synth_scene.empty() ? random_scene(synth_seed, synth_classes, synth_velocity, synth_noise)
                              : scene_from_json(load_json(synth_scene));
      const SynthScan scan = generate_scan(sensor, scene);
      save_point_cloud(scan.cloud, synth_output + ".bin");
      save_labels(scan.labels, synth_output + ".label");
      save_point_cloud(scan.cloud_ego_corrected, synth_output + ".ego.bin");
      if (!synth_save_scene.empty()) save_json(synth_save_scene, to_json(scene));
      out << "points " << scan.size() << " beams " << sensor.n_beams << " firings "
          << sensor.firings_per_rev() << '\n';
    } else if (stats->parsed()) {
      const PointCloud raw = load_point_cloud(stats_input);
      const PointCloud ego = stats_ego.empty() ? raw : load_point_cloud(stats_ego);
      const auto unfold = occlusion_stats(stats_grid.project(raw, nullptr, ProjectionMode::kUnfold).index);
      const auto corrected = occlusion_stats(stats_grid.project(ego, nullptr, ProjectionMode::kEgo).index);
      print_stats(out, "unfold", unfold);
      print_stats(out, "ego", corrected);
      out << "occluded(ego) - occluded(unfold) = "
          << static_cast<long long>(corrected.n_occluded) - static_cast<long long>(unfold.n_occluded)
          << '\n';
    } else if (train_cmd->parsed()) {
      TrainConfig cfg = train_config.empty() ? TrainConfig{} : train_from_json(load_json(train_config));
      if (train_steps) cfg.steps = *train_steps;
      if (train_batch) cfg.batch_size = *train_batch;
      if (train_seed) cfg.seed = *train_seed;
      if (train_loss) cfg.loss = parse_loss(*train_loss);
      if (train_optimizer) cfg.optimizer = parse_optimizer(*train_optimizer);
      if (train_lr) cfg.adam.learning_rate = *train_lr;
      if (train_preset) {
        cfg.preset = *train_preset;
        cfg.network = nn::NetworkConfig::preset(*train_preset);
      }
      if (train_padding) cfg.padding = parse_padding(*train_padding);
      train_data.apply(cfg.dataset);
      cfg.validate();
      const Dataset data = make_synthetic_dataset(cfg.dataset);
      auto [net, report] = train(cfg, data);
      if (!train_quiet) {
        for (std::size_t s = 0; s < report.loss_trace.size(); ++s) {
          if (s % 10 == 0 || s + 1 == report.loss_trace.size()) {
            out << "step " << s << " loss " << std::setprecision(6) << report.loss_trace[s] << '\n';
          }
        }
      }
      print_report(out, report);
      if (!train_report.empty()) save_json(train_report, to_json(report));
      if (!train_weights.empty()) nn::save_weights(net, train_weights);
    } else if (eval_cmd->parsed()) {
      TrainConfig cfg = eval_config.empty() ? TrainConfig{} : train_from_json(load_json(eval_config));
      if (eval_preset) cfg.network = nn::NetworkConfig::preset(*eval_preset);
      if (eval_padding) cfg.padding = parse_padding(*eval_padding);
      eval_data.apply(cfg.dataset);
      std::vector<Sample> samples;
      int n_logits = cfg.dataset.n_classes + 1;
      if (!eval_rimg.empty()) {
        for (const auto& path : eval_rimg) samples.push_back({read_range_image(path), {}, {}, 0});
      } else {
        Dataset data = make_synthetic_dataset(cfg.dataset);
        n_logits = data.n_classes;
        if (eval_split != "val") samples = std::move(data.train);
        if (eval_split != "train") {
          for (auto& s : data.val) samples.push_back(std::move(s));
        }
      }
      nn::Network net(cfg.network_config(n_logits));
      nn::load_weights(net, eval_weights);
      const RunReport report = evaluate(net, samples, !eval_no_backproject);
      print_report(out, report);
      if (!eval_report.empty()) save_json(eval_report, to_json(report));
    } else if (bench_cmd->parsed()) {
      const auto results = bench(bench_presets, bench_height, bench_width, bench_repeats);
      Json report = Json::array();
      std::map<std::string, double> times;
      for (const auto& r : results) {
        out << std::left << std::setw(4) << r.preset << std::right << " params " << std::setw(10)
            << r.param_count << "  forward_ms " << std::fixed << std::setprecision(2)
            << r.forward_ms << std::defaultfloat << '\n';
        times[r.preset] = r.forward_ms;
        report.push_back({{"preset", r.preset}, {"param_count", r.param_count}, {"forward_ms", r.forward_ms}});
      }
      if (times.count("D") && times.count("R*") && times["R*"] > 0) {
        out << "ratio D/R* " << std::setprecision(3) << times["D"] / times["R*"] << '\n';
      }
      if (!bench_report.empty()) save_json(bench_report, report);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace rangeseg
