// Copyright 2026 The Hexpaint Authors
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

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hexpaint/experiments.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out_dir = "out";
  std::string csv_path;
  bool dump_frames = false;
};

void add_common(CLI::App* cmd, CommonArgs* args, bool with_dump = true) {
  cmd->add_option("--config", args->config_path,
                  "Config file (key = value, schema 1)");
  cmd->add_option("--seed", args->seed, "Override the run seed");
  cmd->add_option("--out", args->out_dir, "Output directory");
  cmd->add_option("--csv", args->csv_path,
                  "Telemetry CSV path (default <out>/telemetry.csv)");
  if (with_dump)
    cmd->add_flag("--dump-frames", args->dump_frames,
                  "Write every processed camera frame to <out>/frames");
}

// Loads the file over the preset when given; prints anchored errors.
bool resolve_config(const CommonArgs& args, const hexpaint::ScenarioConfig& preset,
                    hexpaint::ScenarioConfig* out) {
  if (args.config_path.empty()) {
    *out = preset;
  } else {
    const hexpaint::ConfigParse parsed =
        hexpaint::load_config(args.config_path, preset);
    if (!parsed.ok()) {
      for (const hexpaint::ConfigError& e : parsed.errors) {
        if (e.line > 0)
          std::fprintf(stderr, "%s:%d: %s\n", args.config_path.c_str(), e.line,
                       e.message.c_str());
        else
          std::fprintf(stderr, "%s: %s\n", args.config_path.c_str(),
                       e.message.c_str());
      }
      return false;
    }
    *out = parsed.config;
  }
  if (args.seed) out->seed = *args.seed;
  const std::vector<hexpaint::ConfigError> errs = hexpaint::validate_config(*out);
  for (const hexpaint::ConfigError& e : errs)
    std::fprintf(stderr, "config: %s\n", e.message.c_str());
  return errs.empty();
}

hexpaint::RunOptions make_options(const CommonArgs& args) {
  hexpaint::RunOptions opt;
  fs::create_directories(args.out_dir);
  if (args.dump_frames) {
    opt.dump_frames_dir = args.out_dir + "/frames";
    fs::create_directories(opt.dump_frames_dir);
  }
  return opt;
}

std::string telemetry_path(const CommonArgs& args) {
  return args.csv_path.empty() ? args.out_dir + "/telemetry.csv"
                               : args.csv_path;
}

void print_run_summary(const hexpaint::ExperimentResult& r,
                       const std::string& csv) {
  std::printf("final phase:   %s\n", hexpaint::phase_name(r.final_phase));
  if (r.fault) std::printf("fault reason:  %s\n", r.fault_reason.c_str());
  std::printf("sim time:      %.2f s (%.1f s wall)\n", r.sim_seconds,
              r.wall_seconds);
  std::printf("switches:      %d, reversals: %d, passes done: %d\n",
              r.switch_count, r.reversal_count, r.passes_done);
  std::printf("band coverage: %.1f%%\n", 100.0 * r.final_coverage);
  if (r.contact_samples > 0)
    std::printf("contact force: %.3f N mean abs error over %d ticks\n",
                r.true_force_mae, r.contact_samples);
  std::printf("telemetry:     %s (%zu records)\n", csv.c_str(),
              r.log.size());
}

// Orthographic snapshot of the painted wall.
void write_surface_snapshot(const hexpaint::SurfaceModel& surface,
                            const std::string& path) {
  const double px_per_m = 200.0;
  const int w = std::max(1, static_cast<int>(surface.width() * px_per_m));
  const int h = std::max(1, static_cast<int>(surface.height() * px_per_m));
  hexpaint::GrayImage img(w, h);
  const double footprint = 1.0 / px_per_m;
  for (int y = 0; y < h; ++y) {
    const double v = (y + 0.5) / px_per_m - surface.height() / 2.0;
    for (int x = 0; x < w; ++x) {
      const double s = (x + 0.5) / px_per_m - surface.width() / 2.0;
      img.at(x, y) = surface.intensity_at(s, v, footprint);
    }
  }
  hexpaint::write_pgm(path, img);
}

int run_force_track(const CommonArgs& args, bool pure_force) {
  hexpaint::ScenarioConfig cfg;
  if (!resolve_config(args, hexpaint::force_track_config(), &cfg)) return 2;
  const hexpaint::RunOptions opt = make_options(args);
  const hexpaint::ExperimentResult r =
      hexpaint::run_force_tracking(cfg, pure_force, opt);
  const std::string csv = telemetry_path(args);
  r.log.write_csv(csv);
  print_run_summary(r, csv);
  return r.fault ? 1 : 0;
}

int run_paint(const CommonArgs& args) {
  hexpaint::ScenarioConfig cfg;
  if (!resolve_config(args, hexpaint::paint_demo_config(), &cfg)) return 2;
  const hexpaint::RunOptions opt = make_options(args);
  const hexpaint::ExperimentResult r = hexpaint::run_paint_demo(cfg, opt);
  const std::string csv = telemetry_path(args);
  r.log.write_csv(csv);
  const std::string snapshot = args.out_dir + "/painted.pgm";
  write_surface_snapshot(r.surface, snapshot);
  print_run_summary(r, csv);
  std::printf("wall snapshot: %s\n", snapshot.c_str());
  return r.fault ? 1 : 0;
}

int run_sweep(const CommonArgs& args) {
  hexpaint::ScenarioConfig cfg;
  if (!resolve_config(args, hexpaint::paint_demo_config(), &cfg)) return 2;
  make_options(args);
  const hexpaint::SweepResult r = hexpaint::run_noise_sweep(cfg);
  const std::string csv = args.csv_path.empty() ? args.out_dir + "/sweep.csv"
                                                : args.csv_path;
  {
    std::ofstream f(csv, std::ios::binary);
    if (!f) {
      std::fprintf(stderr, "cannot open %s\n", csv.c_str());
      return 2;
    }
    const std::string text = hexpaint::sweep_csv(r);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
  }
  std::printf("profile sigma_vs sigma_f median_err min_err max_err faults\n");
  for (const hexpaint::SweepSummary& s : r.summaries)
    std::printf("%7d %8.3f %7.2f %10.3f %7.3f %7.3f %6d\n", s.profile,
                s.sigma_vs, s.sigma_f, s.median_force_mae, s.min_force_mae,
                s.max_force_mae, s.faults);
  std::printf("rows: %s\n", csv.c_str());
  return 0;
}

int run_detect(const CommonArgs& args, const std::string& image_dir) {
  hexpaint::ScenarioConfig cfg;
  if (!resolve_config(args, hexpaint::ScenarioConfig{}, &cfg)) return 2;

  std::vector<std::string> gray_files;
  if (!fs::is_directory(image_dir)) {
    std::fprintf(stderr, "%s is not a directory\n", image_dir.c_str());
    return 2;
  }
  for (const fs::directory_entry& e : fs::directory_iterator(image_dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 9 && name.substr(name.size() - 9) == "_gray.pgm")
      gray_files.push_back(e.path().string());
  }
  std::sort(gray_files.begin(), gray_files.end());
  if (gray_files.empty()) {
    std::fprintf(stderr, "no *_gray.pgm images in %s\n", image_dir.c_str());
    return 2;
  }

  hexpaint::CameraIntrinsics intr = cfg.camera;
  intr.sigma_d = cfg.noise.sigma_d;
  hexpaint::VisionPipeline pipeline(intr, hexpaint::DetectParams{}, cfg.seed);
  for (const std::string& gray_path : gray_files) {
    const std::string depth_path =
        gray_path.substr(0, gray_path.size() - 9) + "_depth.pgm";
    hexpaint::GrayImage gray;
    hexpaint::DepthImage depth;
    try {
      gray = hexpaint::read_pgm(gray_path);
      depth = hexpaint::read_pgm16(depth_path);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "%s\n", e.what());
      return 2;
    }
    if (gray.width() != intr.width || gray.height() != intr.height ||
        depth.width() != intr.width || depth.height() != intr.height) {
      std::fprintf(stderr, "%s: image size does not match camera config\n",
                   gray_path.c_str());
      return 2;
    }
    const hexpaint::FrameAnalysis fa = pipeline.process(gray, depth);
    std::printf("# %s\n", fs::path(gray_path).filename().string().c_str());
    for (const hexpaint::ScoredLine& s : fa.lines.horizontal)
      std::printf("H %.10g %.10g %d\n", s.line.rho, s.line.theta, s.support);
    for (const hexpaint::ScoredLine& s : fa.lines.vertical)
      std::printf("V %.10g %.10g %d\n", s.line.rho, s.line.theta, s.support);
  }
  return 0;
}

int run_validate(const CommonArgs& args) {
  if (args.config_path.empty()) {
    std::fprintf(stderr, "validate-config requires --config\n");
    return 2;
  }
  hexpaint::ScenarioConfig cfg;
  if (!resolve_config(args, hexpaint::ScenarioConfig{}, &cfg)) return 2;
  std::printf("%s: ok (seed %llu)\n", args.config_path.c_str(),
              static_cast<unsigned long long>(cfg.seed));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contact painting simulator: visual servoing plus hybrid "
               "force control on a tilted-rotor hexarotor"};
  app.require_subcommand(1);

  CommonArgs ft_args, paint_args, sweep_args, detect_args, validate_args;
  bool pure_force = false;
  std::string image_dir;

  CLI::App* ft = app.add_subcommand(
      "force-track", "Hold a pushing force against the wall for the "
                     "configured duration");
  add_common(ft, &ft_args);
  ft->add_flag("--pure-force", pure_force,
               "Disable the camera-side spring and damper");

  CLI::App* paint = app.add_subcommand(
      "paint-demo", "Paint the configured stripe band and write a wall "
                    "snapshot");
  add_common(paint, &paint_args);

  CLI::App* sweep = app.add_subcommand(
      "noise-sweep", "Paint demo matrix across noise profiles and seeds");
  add_common(sweep, &sweep_args, /*with_dump=*/false);

  CLI::App* detect = app.add_subcommand(
      "detect", "Run the detection pipeline over *_gray.pgm/*_depth.pgm "
                "pairs and print the lines");
  detect->add_option("image-dir", image_dir, "Directory with image pairs")
      ->required();
  add_common(detect, &detect_args, /*with_dump=*/false);

  CLI::App* validate =
      app.add_subcommand("validate-config", "Parse and check a config file");
  validate->add_option("--config", validate_args.config_path,
                       "Config file to check")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // help output
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }

  try {
    if (ft->parsed()) return run_force_track(ft_args, pure_force);
    if (paint->parsed()) return run_paint(paint_args);
    if (sweep->parsed()) return run_sweep(sweep_args);
    if (detect->parsed()) return run_detect(detect_args, image_dir);
    if (validate->parsed()) return run_validate(validate_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
