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

#ifndef HEXPAINT_EXPERIMENTS_HPP_
#define HEXPAINT_EXPERIMENTS_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "hexpaint/camera.hpp"
#include "hexpaint/control.hpp"
#include "hexpaint/image.hpp"
#include "hexpaint/mission.hpp"
#include "hexpaint/optical_flow.hpp"
#include "hexpaint/scenario.hpp"
#include "hexpaint/surface.hpp"
#include "hexpaint/telemetry.hpp"
#include "hexpaint/vehicle.hpp"
#include "hexpaint/vision.hpp"

namespace hexpaint {

// Decorrelated per-purpose rng seeds from the run seed (splitmix64 step).
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct RunOptions {
  std::string dump_frames_dir;  // when nonempty, processed frames as PGM
  bool keep_log = true;         // sweeps drop per-tick records, metrics only
};

struct ExperimentResult {
  TelemetryLog log;
  MissionPhase final_phase = MissionPhase::kApproach;
  bool fault = false;
  std::string fault_reason;
  int switch_count = 0;
  int reversal_count = 0;
  int passes_done = 0;
  double final_coverage = 0.0;
  double sim_seconds = 0.0;
  double wall_seconds = 0.0;
  // True (pre sensor noise) pushing force error over firm-contact lateral
  // ticks, and guide line offset error over tracked lateral ticks.
  double true_force_mae = 0.0;
  int contact_samples = 0;
  double feature_mae = 0.0;
  int feature_samples = 0;
  SurfaceModel surface;
};

namespace internal {

// Camera axes in body coordinates: optical axis along body x, image x along
// body y, image y along body z.
inline Mat3 camera_to_body() {
  Mat3 r;
  r.col(0) = Vec3(0, 1, 0);
  r.col(1) = Vec3(0, 0, 1);
  r.col(2) = Vec3(1, 0, 0);
  return r;
}

inline void perturb_lines(std::vector<ScoredLine>* lines, double sigma,
                          std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  for (ScoredLine& s : *lines) {
    s.line.rho += noise(rng);
    s.line.theta += noise(rng);
    s.line = normalize_hough(s.line);
  }
}

// Cubic ease between the start and handoff clearances; velocity is zero at
// both ends so the controller takes over a resting vehicle.
inline void approach_pose(const ScenarioConfig& cfg, double t, double* x,
                          double* vx) {
  const double T = cfg.mission.approach_duration_s;
  const double u = std::clamp(t / T, 0.0, 1.0);
  const double s = u * u * (3.0 - 2.0 * u);
  const double ds = 6.0 * u * (1.0 - u) / T;
  const double x0 = -cfg.mission.start_distance;
  const double x1 = -cfg.mission.handoff_distance;
  *x = x0 + (x1 - x0) * s;
  *vx = (x1 - x0) * ds;
}

}  // namespace internal

// Runs one scenario end to end: scripted approach, force engagement,
// lateral painting passes with upward switches, telemetry at the controller
// rate. Physics runs at 1 kHz, control at 250 Hz, the camera at 31.25 Hz,
// optical flow on every second frame.
inline ExperimentResult run_mission(const ScenarioConfig& cfg,
                                    const RunOptions& opt = {}) {
  const auto wall_start = std::chrono::steady_clock::now();

  constexpr double kDtPhys = 0.001;
  constexpr int kPhysPerCtrl = 4;
  constexpr int kCtrlPerFrame = 8;
  constexpr double kDtCtrl = kDtPhys * kPhysPerCtrl;
  constexpr double kFrameDt = kDtCtrl * kCtrlPerFrame;
  constexpr double kRampTime = 1.0;       // s, lateral speed ramp
  constexpr double kSettleBand = 1.0;     // N, force band arming the sweep
  constexpr double kSettleHold = 0.5;     // s

  ExperimentResult result;
  result.surface = SurfaceModel(Vec3::Zero(), Vec3(-1, 0, 0),
                                cfg.surface_width, cfg.surface_height);
  SurfaceModel& surface = result.surface;
  // Pre-painted guide stripe the first pass keys on.
  surface.deposit_paint(
      surface.to_world(
          0.5 * (cfg.mission.primer_s_min + cfg.mission.primer_s_max),
          cfg.mission.primer_v),
      cfg.mission.brush_half_width,
      0.5 * (cfg.mission.primer_s_max - cfg.mission.primer_s_min));
  // Thousands of frames get rendered against this one wall; paying the
  // texture octaves once up front keeps the per-pixel cost to a lookup.
  surface.build_texture_cache();

  CameraIntrinsics intr = cfg.camera;
  intr.sigma_d = cfg.noise.sigma_d;
  intr.sigma_vs = cfg.noise.sigma_vs;

  std::mt19937_64 render_rng(mix_seed(cfg.seed, 0));
  std::mt19937_64 ft_rng(mix_seed(cfg.seed, 1));
  std::mt19937_64 vs_rng(mix_seed(cfg.seed, 2));

  VisionPipeline pipeline(intr, DetectParams{}, mix_seed(cfg.seed, 3));
  FeatureTracker tracker(intr);
  MissionMachine mission(mission_params(cfg));

  const Mat3 r_c_b = internal::camera_to_body();
  const Rotation r_e_to_b(r_c_b);  // pushing axis selection, body x is E's z
  const TwistTransform t_c_b =
      twist_transform(Rotation(Mat3(r_c_b.transpose())), cfg.camera_offset);

  const double d_c = contact_depth(cfg);
  const double rho_ref = pass_rho_ref(cfg);
  const HoughLine h_ref{rho_ref, M_PI / 2.0};
  const double v_guide0 = cfg.mission.primer_v - cfg.mission.brush_half_width;

  VehicleParams vehicle = cfg.vehicle;
  HybridGains gains = cfg.gains;
  FtSensorModel ft_model;
  ft_model.sigma_f = cfg.noise.sigma_f;

  RigidState state;
  {
    double x, vx;
    internal::approach_pose(cfg, 0.0, &x, &vx);
    const double v_cam_end =
        v_guide0 -
        rho_ref * (cfg.mission.handoff_distance - cfg.camera_offset.x());
    state.position =
        Vec3(x, cfg.mission.start_s, v_cam_end - cfg.camera_offset.z());
    state.V = Vec3(vx, 0, 0);
  }

  ControllerState cst;
  cst.contact_ref_depth = d_c;

  // Frame-held sensor data.
  FeatureVector held;  // slot wiring published to the controller
  double wall_distance = 0.0;
  bool wall_distance_valid = false;
  Vec3 surface_n_body(-1, 0, 0);
  bool surface_n_valid = false;
  FlowVelocity flow;
  double coverage = 0.0;
  TrackedFeatures tracked;

  GrayImage flow_prev_gray;
  DepthImage flow_prev_depth;
  bool flow_have_prev = false;

  // Frozen vertical reference for the current switch.
  bool have_frozen_v = false;
  HoughLine frozen_v;

  double ramp = 0.0;
  double settle_time = 0.0;
  double f_lp = 0.0;
  double lambda_prev = 0.0;
  double v_ref = 0.0;

  const double band_vmin = band_v_min(cfg);
  const double band_vmax = band_v_max(cfg);

  const int total_ticks =
      static_cast<int>(std::llround(cfg.duration_s / kDtCtrl));
  int frame_index = 0;

  for (int tick = 0; tick < total_ticks; ++tick) {
    const double t = tick * kDtCtrl;
    const MissionPhase phase_before = mission.phase();

    if (tick % kCtrlPerFrame == 0) {
      // Vision frame at the current state.
      CameraPose pose;
      pose.R = Rotation(Mat3(state.R.matrix() * r_c_b));
      pose.position = state.position + state.R * cfg.camera_offset;

      RenderResult frame;
      try {
        frame = render(pose, surface, intr, render_rng);
      } catch (const NoSurfaceInView& e) {
        mission.fault();
        result.fault_reason = e.what();
        break;
      }
      if (!opt.dump_frames_dir.empty()) {
        char name[64];
        std::snprintf(name, sizeof(name), "/frame_%05d.pgm", frame_index);
        write_pgm(opt.dump_frames_dir + name, frame.gray);
      }

      FrameAnalysis fa = pipeline.process(frame.gray, frame.depth);
      if (cfg.noise.sigma_vs > 0.0) {
        internal::perturb_lines(&fa.lines.horizontal, cfg.noise.sigma_vs,
                                vs_rng);
        internal::perturb_lines(&fa.lines.vertical, cfg.noise.sigma_vs,
                                vs_rng);
      }
      wall_distance = fa.wall_distance;
      wall_distance_valid = fa.wall_distance_valid;
      if (fa.surface_normal_valid) {
        surface_n_body = -(r_c_b * fa.surface_normal_cam);
        surface_n_valid = true;
      } else {
        surface_n_valid = false;
      }

      const bool climb_before = phase_before == MissionPhase::kSwitchUp;
      tracked = tracker.track(fa.lines, climb_before ? TrackMode::kClimb
                                                     : TrackMode::kLateral);

      double rho_h = 0.0;
      if (tracked.has_horizontal)
        rho_h = closest_representation(tracked.horizontal, h_ref).rho;

      coverage = surface.coverage(band_vmin, band_vmax, cfg.mission.band_s_min,
                                  cfg.mission.band_s_max);
      mission.update(t, kFrameDt, tracked, rho_h, coverage);
      if (mission.consume_tracker_reset()) tracker.reset();

      // Optical flow on every second frame, downsampled grid, central crop.
      if (frame_index % 2 == 0) {
        GrayImage gray_ds = downsample2(frame.gray);
        DepthImage depth_ds = downsample2_depth(frame.depth);
        if (flow_have_prev) {
          const CameraIntrinsics& ds = pipeline.grid();
          BoundingBox roi;
          roi.u_min = ds.width / 8;
          roi.u_max = ds.width - ds.width / 8 - 1;
          roi.v_min = ds.height / 12;
          roi.v_max = ds.height - ds.height / 12 - 1;
          const Vec3 omega_cam = r_c_b.transpose() * state.Omega;
          flow = estimate_lateral_velocity(flow_prev_gray, gray_ds,
                                           flow_prev_depth, ds, omega_cam,
                                           2.0 * kFrameDt, FlowParams{}, roi);
        }
        flow_prev_gray = std::move(gray_ds);
        flow_prev_depth = std::move(depth_ds);
        flow_have_prev = true;
      }

      // Publish the feature slots for the ticks until the next frame. In
      // lateral phases only the guide line drives the servo; the boundary
      // line is the supervisor's business. During a switch the re-acquired
      // guide steers the climb and the frozen boundary reference holds the
      // lateral position.
      const MissionPhase phase = mission.phase();
      held = FeatureVector{};
      if (phase == MissionPhase::kSwitchUp) {
        if (tracked.has_vertical && !have_frozen_v) {
          frozen_v = normalize_hough(tracked.vertical);
          have_frozen_v = true;
        }
        int slot = 0;
        if (tracked.has_horizontal) {
          const HoughLine m = closest_representation(tracked.horizontal, h_ref);
          held.q[2 * slot] = m.rho;
          held.q[2 * slot + 1] = m.theta;
          held.q_ref[2 * slot] = h_ref.rho;
          held.q_ref[2 * slot + 1] = h_ref.theta;
          held.line_class[slot] = LineClass::kHorizontal;
          held.line_offset[slot] = rho_ref * d_c;
          held.line_depth[slot] = d_c;
          ++slot;
        }
        if (tracked.has_vertical && have_frozen_v) {
          const HoughLine m =
              closest_representation(tracked.vertical, frozen_v);
          held.q[2 * slot] = m.rho;
          held.q[2 * slot + 1] = m.theta;
          held.q_ref[2 * slot] = frozen_v.rho;
          held.q_ref[2 * slot + 1] = frozen_v.theta;
          held.line_class[slot] = LineClass::kVertical;
          held.line_offset[slot] = frozen_v.rho * d_c;
          held.line_depth[slot] = d_c;
          ++slot;
        }
        held.n = slot;
      } else {
        have_frozen_v = false;
        if (tracked.has_horizontal) {
          const HoughLine m = closest_representation(tracked.horizontal, h_ref);
          held.n = 1;
          held.q[0] = m.rho;
          held.q[1] = m.theta;
          held.q_ref[0] = h_ref.rho;
          held.q_ref[1] = h_ref.theta;
          held.line_class[0] = LineClass::kHorizontal;
          held.line_offset[0] = rho_ref * d_c;
          held.line_depth[0] = d_c;
        }
      }
      ++frame_index;
    }

    const MissionPhase phase = mission.phase();
    if (mission.consume_phase_change()) {
      // References moved discontinuously; feature memory restarts.
      cst.features.de.setZero();
      cst.features.integral.setZero();
      cst.have_prev_error = false;
      ramp = 0.0;
      settle_time = 0.0;
      v_ref = 0.0;
    }
    if (phase == MissionPhase::kFault) break;

    const ContactResult contact =
        contact_wrench(state, cfg.tool_offset, surface, cfg.contact);

    SensorBundle sensors;
    sensors.features_fresh = tick % kCtrlPerFrame == 0;
    sensors.frame_dt = kFrameDt;
    sensors.n = held.n;
    sensors.q = held.q;
    sensors.wall_distance = wall_distance;
    sensors.wall_distance_valid = wall_distance_valid;
    sensors.ft = read_ft(contact.wrench, ft_model, ft_rng);
    sensors.attitude = state.R;
    sensors.omega = state.Omega;
    sensors.surface_n_body = surface_n_body;
    sensors.surface_n_valid = surface_n_valid;
    sensors.flow = flow;

    // During the scripted approach the controller runs with zeroed feature
    // error so its filters stay warm without steering anything.
    if (phase == MissionPhase::kApproach) {
      cst.features.q_ref = held.q;
      cst.features.integral.setZero();
    } else {
      cst.features.q_ref = held.q_ref;
    }
    cst.features.line_class = held.line_class;
    cst.features.line_offset = held.line_offset;
    cst.features.line_depth = held.line_depth;

    // Lateral sweep starts once the pushing force has settled in contact
    // and ramps up over a second.
    const double f_true = -contact.wrench.force.x();
    f_lp += 0.2 * (f_true - f_lp);
    if (is_lateral(phase) && lambda_prev >= 0.999) {
      settle_time = std::abs(f_lp - gains.f_ref) < kSettleBand
                        ? settle_time + kDtCtrl
                        : 0.0;
      if (settle_time >= kSettleHold || ramp > 0.0)
        ramp = std::min(1.0, ramp + kDtCtrl / kRampTime);
    }
    v_ref = is_lateral(phase)
                ? mission.direction() * cfg.mission.v_d * ramp
                : 0.0;
    cst.v_d = v_ref;

    const ControlOutput out =
        control_step(sensors, cst, gains, vehicle, r_e_to_b, t_c_b, kDtCtrl);
    lambda_prev = out.lambda;

    // Error metrics against the reference force use the true contact force,
    // not the noisy reading the controller sees.
    if (is_lateral(phase) && out.lambda >= 0.999) {
      result.true_force_mae += std::abs(f_true - gains.f_ref);
      ++result.contact_samples;
    }
    if (is_lateral(phase) && cst.features.n > 0) {
      result.feature_mae += std::abs(cst.features.error()[0]);
      ++result.feature_samples;
    }

    {
      TelemetryRecord rec;
      rec.time = t;
      rec.phase = phase;
      rec.position = state.position;
      rec.velocity = state.R * state.V;
      const Vec3 rpy = state.R.to_rpy();
      rec.roll = rpy.x();
      rec.pitch = rpy.y();
      rec.yaw = rpy.z();
      rec.n_features = cst.features.n;
      rec.feature_error = cst.features.error();
      for (int i = 2 * cst.features.n; i < 4; ++i) rec.feature_error[i] = 0.0;
      rec.f_meas = -sensors.ft.force.x();
      rec.f_cmd = out.f_f;
      rec.lambda = out.lambda;
      rec.v_flow = sensors.flow.v_lateral;
      rec.flow_valid = sensors.flow.valid;
      rec.v_ref = v_ref;
      rec.saturated = out.saturated;
      rec.coverage = coverage;
      result.log.append(rec);
    }

    if (phase == MissionPhase::kDone) break;

    if (phase == MissionPhase::kApproach) {
      double x, vx;
      internal::approach_pose(cfg, t + kDtCtrl, &x, &vx);
      state.position.x() = x;
      state.V = Vec3(vx, 0, 0);
      state.time = t + kDtCtrl;
      continue;
    }

    try {
      for (int i = 0; i < kPhysPerCtrl; ++i) {
        const ContactResult c =
            contact_wrench(state, cfg.tool_offset, surface, cfg.contact);
        state = step(state, out.thrusts, c.wrench, vehicle, kDtPhys);
      }
    } catch (const std::exception& e) {
      mission.fault();
      result.fault_reason = e.what();
      break;
    }

    // Deposits land on the nominal stripe height of the running pass and
    // only while the tip actually is within the overlap tolerance of it, so
    // tracking faults show up as coverage gaps instead of phantom stripes.
    if (is_lateral(mission.phase()) && std::abs(v_ref) > 1e-9) {
      const ContactResult c =
          contact_wrench(state, cfg.tool_offset, surface, cfg.contact);
      if (c.penetration > 0.0) {
        const Vec3 tip = state.position + state.R * cfg.tool_offset;
        const Vec2 sv = surface.to_plane(tip);
        const double v_pass = pass_center_v(cfg, mission.passes_done());
        if (std::abs(sv.y() - v_pass) <= 0.5 * cfg.mission.stripe_overlap)
          surface.deposit_paint(surface.to_world(sv.x(), v_pass),
                                cfg.mission.brush_half_width);
      }
    }
  }

  result.final_phase = mission.phase();
  result.fault = result.final_phase == MissionPhase::kFault;
  result.switch_count = mission.switch_count();
  result.reversal_count = mission.reversal_count();
  result.passes_done = mission.passes_done();
  result.final_coverage = coverage;
  result.sim_seconds =
      result.log.empty() ? 0.0 : result.log.records().back().time + kDtCtrl;
  if (result.contact_samples > 0)
    result.true_force_mae /= result.contact_samples;
  if (result.feature_samples > 0) result.feature_mae /= result.feature_samples;
  if (!opt.keep_log) result.log = TelemetryLog{};

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    wall_start)
          .count();
  return result;
}

// Stationary force-hold run; the pure-force arm drops the camera-side
// spring and damper and keeps everything else identical.
inline ExperimentResult run_force_tracking(ScenarioConfig cfg, bool pure_force,
                                           const RunOptions& opt = {}) {
  cfg.mission.v_d = 0.0;
  if (pure_force) {
    cfg.gains.k_sp = 0.0;
    cfg.gains.k_sd = 0.0;
  }
  return run_mission(cfg, opt);
}

inline ExperimentResult run_paint_demo(const ScenarioConfig& cfg,
                                       const RunOptions& opt = {}) {
  return run_mission(cfg, opt);
}

struct SweepProfile {
  double sigma_vs = 0.0;
  double sigma_f = 0.0;
};

inline std::vector<SweepProfile> sweep_profiles() {
  return {{0.02, 1.0}, {0.08, 2.0}, {0.12, 3.0}};
}

struct SweepRow {
  int profile = 0;
  double sigma_vs = 0.0;
  double sigma_f = 0.0;
  uint64_t seed = 0;
  bool fault = false;
  double force_mae = 0.0;
  double feature_mae = 0.0;
  double coverage = 0.0;
  int switches = 0;
  int reversals = 0;
  double sim_seconds = 0.0;
};

struct SweepSummary {
  int profile = 0;
  double sigma_vs = 0.0;
  double sigma_f = 0.0;
  double median_force_mae = 0.0;
  double min_force_mae = 0.0;
  double max_force_mae = 0.0;
  int faults = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepSummary> summaries;
};

inline std::string sweep_csv(const SweepResult& r) {
  std::string out =
      "profile,sigma_vs,sigma_f,seed,fault,force_mae,feature_mae,"
      "coverage,switches,reversals,sim_seconds\n";
  char buf[256];
  for (const SweepRow& row : r.rows) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%.10g,%.10g,%llu,%d,%.10g,%.10g,%.10g,%d,%d,%.10g\n",
                  row.profile, row.sigma_vs, row.sigma_f,
                  static_cast<unsigned long long>(row.seed),
                  row.fault ? 1 : 0, row.force_mae, row.feature_mae,
                  row.coverage, row.switches, row.reversals, row.sim_seconds);
    out += buf;
  }
  return out;
}

// Paint-demo matrix across noise profiles and seeds. Runs are independent
// worlds, so they execute on a small task pool; assembly order is fixed by
// the row index, which keeps the output identical to a sequential sweep.
inline SweepResult run_noise_sweep(const ScenarioConfig& base,
                                   int seeds_per_profile = 10) {
  const std::vector<SweepProfile> profiles = sweep_profiles();
  SweepResult result;
  const int total = static_cast<int>(profiles.size()) * seeds_per_profile;
  result.rows.resize(total);

  const unsigned workers =
      std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::future<void>> inflight;
  inflight.reserve(workers);

  const auto launch = [&](int index) {
    return std::async(std::launch::async, [&result, &profiles, &base,
                                           seeds_per_profile, index] {
      const int p = index / seeds_per_profile;
      const int i = index % seeds_per_profile;
      ScenarioConfig cfg = base;
      cfg.noise.sigma_vs = profiles[p].sigma_vs;
      cfg.noise.sigma_f = profiles[p].sigma_f;
      cfg.seed = mix_seed(base.seed, 64 * p + i);
      RunOptions opt;
      opt.keep_log = false;
      const ExperimentResult run = run_mission(cfg, opt);
      SweepRow row;
      row.profile = p;
      row.sigma_vs = cfg.noise.sigma_vs;
      row.sigma_f = cfg.noise.sigma_f;
      row.seed = cfg.seed;
      row.fault = run.fault;
      row.force_mae = run.true_force_mae;
      row.feature_mae = run.feature_mae;
      row.coverage = run.final_coverage;
      row.switches = run.switch_count;
      row.reversals = run.reversal_count;
      row.sim_seconds = run.sim_seconds;
      result.rows[index] = row;
    });
  };

  int next = 0;
  while (next < total || !inflight.empty()) {
    while (next < total && inflight.size() < workers)
      inflight.push_back(launch(next++));
    inflight.front().get();
    inflight.erase(inflight.begin());
  }

  for (int p = 0; p < static_cast<int>(profiles.size()); ++p) {
    SweepSummary s;
    s.profile = p;
    s.sigma_vs = profiles[p].sigma_vs;
    s.sigma_f = profiles[p].sigma_f;
    std::vector<double> errs;
    for (const SweepRow& row : result.rows) {
      if (row.profile != p) continue;
      if (row.fault) {
        ++s.faults;
        continue;
      }
      errs.push_back(row.force_mae);
    }
    if (!errs.empty()) {
      std::sort(errs.begin(), errs.end());
      const size_t n = errs.size();
      s.median_force_mae = n % 2 == 1
                               ? errs[n / 2]
                               : 0.5 * (errs[n / 2 - 1] + errs[n / 2]);
      s.min_force_mae = errs.front();
      s.max_force_mae = errs.back();
    }
    result.summaries.push_back(s);
  }
  return result;
}

}  // namespace hexpaint

#endif  // HEXPAINT_EXPERIMENTS_HPP_
