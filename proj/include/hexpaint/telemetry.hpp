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

#ifndef HEXPAINT_TELEMETRY_HPP_
#define HEXPAINT_TELEMETRY_HPP_

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hexpaint/geometry.hpp"
#include "hexpaint/mission.hpp"

namespace hexpaint {

// One controller tick. Positions and velocities are world frame, angles are
// ZYX Euler in radians, feature errors are normalized units stacked
// (rho, theta) per slot with unused entries zero.
struct TelemetryRecord {
  double time = 0.0;
  MissionPhase phase = MissionPhase::kApproach;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
  int n_features = 0;
  Eigen::Vector4d feature_error = Eigen::Vector4d::Zero();
  double f_meas = 0.0;   // measured pushing force, N
  double f_cmd = 0.0;    // impedance branch force command, N
  double lambda = 0.0;   // contact blend
  double v_flow = 0.0;   // lateral velocity estimate, m/s
  bool flow_valid = false;
  double v_ref = 0.0;    // lateral velocity reference, m/s
  bool saturated = false;
  double coverage = 0.0;
};

// Append-only log; timestamps must be strictly increasing, one record per
// controller tick. Serialization is locale independent and stable so runs
// with the same seed produce byte-identical files.
class TelemetryLog {
 public:
  void append(const TelemetryRecord& r) {
    if (!records_.empty() && r.time <= records_.back().time)
      throw std::logic_error("telemetry time must be strictly increasing");
    records_.push_back(r);
  }

  const std::vector<TelemetryRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  size_t size() const { return records_.size(); }

  static const char* csv_header() {
    return "time,phase,pos_x,pos_y,pos_z,vel_x,vel_y,vel_z,"
           "roll,pitch,yaw,n,e_rho1,e_theta1,e_rho2,e_theta2,"
           "f_meas,f_cmd,lambda,flow_valid,v_flow,v_ref,saturated,coverage";
  }

  std::string to_csv() const {
    std::string out;
    out.reserve(records_.size() * 220 + 256);
    out += csv_header();
    out += '\n';
    char buf[512];
    for (const TelemetryRecord& r : records_) {
      std::snprintf(
          buf, sizeof(buf),
          "%.6f,%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,"
          "%.10g,%.10g,%.10g,%d,%.10g,%.10g,%.10g,%.10g,"
          "%.10g,%.10g,%.10g,%d,%.10g,%.10g,%d,%.10g",
          r.time, phase_name(r.phase), r.position.x(), r.position.y(),
          r.position.z(), r.velocity.x(), r.velocity.y(), r.velocity.z(),
          r.roll, r.pitch, r.yaw, r.n_features, r.feature_error[0],
          r.feature_error[1], r.feature_error[2], r.feature_error[3],
          r.f_meas, r.f_cmd, r.lambda, r.flow_valid ? 1 : 0, r.v_flow,
          r.v_ref, r.saturated ? 1 : 0, r.coverage);
      out += buf;
      out += '\n';
    }
    return out;
  }

  void write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    const std::string csv = to_csv();
    f.write(csv.data(), static_cast<std::streamsize>(csv.size()));
  }

 private:
  std::vector<TelemetryRecord> records_;
};

}  // namespace hexpaint

#endif  // HEXPAINT_TELEMETRY_HPP_
