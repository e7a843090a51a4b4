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

#ifndef HEXPAINT_CAMERA_HPP_
#define HEXPAINT_CAMERA_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "hexpaint/geometry.hpp"
#include "hexpaint/image.hpp"
#include "hexpaint/surface.hpp"

namespace hexpaint {

struct CameraIntrinsics {
  double fx = 460.0;  // px
  double fy = 460.0;  // px
  double cx = 320.0;  // px
  double cy = 240.0;  // px
  int width = 640;
  int height = 480;
  double sigma_d = 0.002;   // m, depth noise
  double sigma_vs = 0.0;    // normalized units, feature noise for sweeps

  Vec2 to_normalized(double u, double v) const {
    return Vec2((u - cx) / fx, (v - cy) / fy);
  }
  Vec2 to_pixel(double xn, double yn) const {
    return Vec2(fx * xn + cx, fy * yn + cy);
  }
};

// Camera pose in the inertial frame; R maps camera-frame vectors to NED.
struct CameraPose {
  Vec3 position = Vec3::Zero();
  Rotation R;
};

// Line in the image in Hough form x cos(theta) + y sin(theta) = rho, with
// (x, y) NORMALIZED image coordinates (pixels from the principal point
// divided by focal length). rho is therefore dimensionless and theta is
// measured from the image x-axis, theta in [0, pi). Everything downstream
// (references, interaction matrices, detection tolerances) uses this
// convention.
struct HoughLine {
  double rho = 0.0;
  double theta = 0.0;
};

// Canonical representative with theta in [0, pi): (rho, theta) and
// (-rho, theta + pi) denote the same line.
inline HoughLine normalize_hough(HoughLine line) {
  while (line.theta < 0.0) {
    line.theta += M_PI;
    line.rho = -line.rho;
  }
  while (line.theta >= M_PI) {
    line.theta -= M_PI;
    line.rho = -line.rho;
  }
  return line;
}

// Representation of the same line whose theta is closest to ref.theta; keeps
// feature errors continuous when a tracked line crosses the theta = 0 wrap.
inline HoughLine closest_representation(HoughLine line,
                                        const HoughLine& ref) {
  while (line.theta - ref.theta > M_PI / 2) {
    line.theta -= M_PI;
    line.rho = -line.rho;
  }
  while (line.theta - ref.theta < -M_PI / 2) {
    line.theta += M_PI;
    line.rho = -line.rho;
  }
  return line;
}

// Lateral velocity estimate from sparse optical flow, camera x-axis.
struct FlowVelocity {
  double v_lateral = 0.0;  // m/s along the camera x-axis
  bool valid = false;
  int features_used = 0;
};

struct NoSurfaceInView : std::runtime_error {
  NoSurfaceInView() : std::runtime_error("camera sees less than 1% surface") {}
};

struct DegenerateProjection : std::runtime_error {
  DegenerateProjection()
      : std::runtime_error("line projects through the optical center") {}
};

struct RenderResult {
  GrayImage gray;
  DepthImage depth;
};

// Analytic ray/plane renderer for the rectangular work surface. Depth is the
// distance along the optical axis, zeroed where the ray misses the wall.
inline RenderResult render(const CameraPose& pose, const SurfaceModel& surface,
                           const CameraIntrinsics& intr, std::mt19937_64& rng) {
  RenderResult out;
  out.gray = GrayImage(intr.width, intr.height, surface.sky_intensity);
  out.depth = DepthImage(intr.width, intr.height, 0.0);

  const Vec3 n = surface.normal();
  const Mat3 r = pose.R.matrix();
  const double plane_offset = n.dot(surface.center() - pose.position);

  // Per-pixel Gaussian draws dominate the render cost, so the noise comes
  // from a pre-drawn pool indexed by a cheap per-frame LCG stream instead.
  std::array<double, 4096> noise_pool;
  uint64_t noise_state = 0;
  if (intr.sigma_d > 0.0) {
    std::normal_distribution<double> depth_noise(0.0, intr.sigma_d);
    for (double& x : noise_pool) x = depth_noise(rng);
    noise_state = rng();
  }

  // The ray direction is linear in the normalized pixel coordinate, so every
  // dot product against it is too. Reducing the inner loop to scalar affine
  // forms of xn keeps the per-pixel work to a few multiply-adds and one
  // divide.
  const Vec3 rel = pose.position - surface.center();
  const double n_col = n.dot(r.col(0));
  const double l_col = surface.lateral_axis().dot(r.col(0));
  const double d_col = surface.down_axis().dot(r.col(0));
  const double p_l = surface.lateral_axis().dot(rel);
  const double p_d = surface.down_axis().dot(rel);

  int hits = 0;
  for (int v = 0; v < intr.height; ++v) {
    const double yn = (v - intr.cy) / intr.fy;
    const Vec3 dir_row = r.col(1) * yn + r.col(2);
    const double n_row = n.dot(dir_row);
    const double l_row = surface.lateral_axis().dot(dir_row);
    const double d_row = surface.down_axis().dot(dir_row);
    for (int u = 0; u < intr.width; ++u) {
      const double xn = (u - intr.cx) / intr.fx;
      const double denom = n_row + n_col * xn;
      if (std::abs(denom) < 1e-12) continue;
      const double t = plane_offset / denom;
      if (t <= 0.0) continue;
      const double s = p_l + t * (l_row + l_col * xn);
      const double vv = p_d + t * (d_row + d_col * xn);
      if (!surface.contains(s, vv)) continue;
      ++hits;
      double d = t;
      if (intr.sigma_d > 0.0) {
        noise_state = noise_state * 6364136223846793005ULL +
                      1442695040888963407ULL;
        d = std::max(1e-3, d + noise_pool[(noise_state >> 33) & 4095]);
      }
      out.depth.at(u, v) = d;
      out.gray.at(u, v) = surface.intensity_at(s, vv, t / intr.fx);
    }
  }
  if (hits * 100 < intr.width * intr.height) throw NoSurfaceInView();
  return out;
}

// Exact Hough parameters of the image of a 3D line (point p plus direction
// u, inertial frame). Ground-truth oracle for the detector and for
// interaction-matrix derivative checks.
inline HoughLine project_line(const Vec3& p_world, const Vec3& u_world,
                              const CameraPose& pose,
                              const CameraIntrinsics&) {
  const Vec3 p = pose.R.transpose() * (p_world - pose.position);
  const Vec3 u = pose.R.transpose() * u_world;
  // Plane through the optical center containing the line; its normal gives
  // the image line a x + b y + c = 0 in normalized coordinates.
  const Vec3 nrm = p.cross(u);
  double a = nrm.x();
  double b = nrm.y();
  double c = nrm.z();
  const double h = std::hypot(a, b);
  if (h < 1e-12) throw DegenerateProjection();
  if (b < 0.0 || (b == 0.0 && a < 0.0)) {
    a = -a;
    b = -b;
    c = -c;
  }
  HoughLine line;
  line.theta = std::atan2(b, a);
  if (line.theta >= M_PI) line.theta = 0.0;
  line.rho = -c / h;
  return line;
}

// Additive Gaussian measurement noise in feature space; theta noise is
// scaled 1 rad per normalized-rho unit.
inline void perturb_features(std::vector<HoughLine>& lines, double sigma_vs,
                             std::mt19937_64& rng) {
  if (sigma_vs <= 0.0) return;
  std::normal_distribution<double> noise(0.0, sigma_vs);
  for (HoughLine& line : lines) {
    line.rho += noise(rng);
    line.theta += noise(rng);
  }
}

}  // namespace hexpaint

#endif  // HEXPAINT_CAMERA_HPP_
