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
//
// Sparse pyramidal Lucas-Kanade optical flow and the lateral velocity
// estimate built on it: corner flow is de-rotated with the gyro rates and
// scaled by per-feature depth, then reduced by a median.

#ifndef HEXPAINT_OPTICAL_FLOW_HPP_
#define HEXPAINT_OPTICAL_FLOW_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "hexpaint/camera.hpp"
#include "hexpaint/geometry.hpp"
#include "hexpaint/image.hpp"
#include "hexpaint/vision.hpp"

namespace hexpaint {

struct FlowParams {
  int max_features = 50;
  int min_features = 5;        // fewer tracked features invalidates the output
  int levels = 3;              // pyramid levels including full resolution
  int window_half = 3;         // (2k+1)^2 tracking window
  int iterations = 10;
  double min_eig_ratio = 0.01; // corner quality relative to the strongest
  double min_distance_px = 12.0;
  double max_flow_px = 60.0;   // reject implausible tracks
};

namespace internal {

struct Corner {
  float response;
  int u;
  int v;
};

// Shi-Tomasi corners: smaller eigenvalue of the 5x5-summed structure tensor,
// thresholded relative to the strongest response, greedily thinned by a
// minimum distance.
inline std::vector<Corner> shi_tomasi(const GrayImage& img,
                                      const FlowParams& params,
                                      std::optional<BoundingBox> roi = {}) {
  const int w = img.width();
  const int h = img.height();
  const BoundingBox r = roi.value_or(BoundingBox::full(w, h));
  std::vector<float> ixx(static_cast<size_t>(w) * h, 0.0f);
  std::vector<float> iyy(static_cast<size_t>(w) * h, 0.0f);
  std::vector<float> ixy(static_cast<size_t>(w) * h, 0.0f);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      const float gx = 0.5f * (img.at(x + 1, y) - img.at(x - 1, y));
      const float gy = 0.5f * (img.at(x, y + 1) - img.at(x, y - 1));
      const size_t i = static_cast<size_t>(y) * w + x;
      ixx[i] = gx * gx;
      iyy[i] = gy * gy;
      ixy[i] = gx * gy;
    }
  // Separable 5x5 box sum, horizontal then vertical, in place via a copy.
  const auto box5 = [&](std::vector<float>& a) {
    std::vector<float> tmp(a.size(), 0.0f);
    for (int y = 0; y < h; ++y)
      for (int x = 2; x < w - 2; ++x) {
        const size_t i = static_cast<size_t>(y) * w + x;
        tmp[i] = a[i - 2] + a[i - 1] + a[i] + a[i + 1] + a[i + 2];
      }
    for (int y = 2; y < h - 2; ++y)
      for (int x = 0; x < w; ++x) {
        const size_t i = static_cast<size_t>(y) * w + x;
        a[i] = tmp[i - 2 * w] + tmp[i - w] + tmp[i] + tmp[i + w] +
               tmp[i + 2 * w];
      }
  };
  box5(ixx);
  box5(iyy);
  box5(ixy);

  std::vector<Corner> cands;
  float best = 0.0f;
  const int border = 4;
  for (int y = std::max(border, r.v_min); y <= std::min(h - 1 - border, r.v_max);
       ++y)
    for (int x = std::max(border, r.u_min);
         x <= std::min(w - 1 - border, r.u_max); ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      const float a = ixx[i];
      const float c = iyy[i];
      const float b = ixy[i];
      const float min_eig =
          0.5f * (a + c - std::sqrt((a - c) * (a - c) + 4.0f * b * b));
      if (min_eig <= 0.0f) continue;
      best = std::max(best, min_eig);
      cands.push_back({min_eig, x, y});
    }
  const float gate = best * static_cast<float>(params.min_eig_ratio);
  cands.erase(std::remove_if(cands.begin(), cands.end(),
                             [&](const Corner& c) { return c.response < gate; }),
              cands.end());
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Corner& a, const Corner& b) {
                     if (a.response != b.response)
                       return a.response > b.response;
                     if (a.v != b.v) return a.v < b.v;
                     return a.u < b.u;
                   });
  std::vector<Corner> out;
  const double min_d2 = params.min_distance_px * params.min_distance_px;
  for (const Corner& c : cands) {
    bool ok = true;
    for (const Corner& k : out) {
      const double du = c.u - k.u;
      const double dv = c.v - k.v;
      if (du * du + dv * dv < min_d2) {
        ok = false;
        break;
      }
    }
    if (ok) {
      out.push_back(c);
      if (static_cast<int>(out.size()) >= params.max_features) break;
    }
  }
  return out;
}

inline float sample_bilinear(const GrayImage& img, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const float i00 = img.at(x0, y0);
  const float i10 = img.at(x0 + 1, y0);
  const float i01 = img.at(x0, y0 + 1);
  const float i11 = img.at(x0 + 1, y0 + 1);
  return static_cast<float>((1 - fx) * (1 - fy) * i00 + fx * (1 - fy) * i10 +
                            (1 - fx) * fy * i01 + fx * fy * i11);
}

// One feature tracked coarse-to-fine. Returns the full-resolution
// displacement or nullopt when the track dies (flat window, divergence,
// leaving the frame).
inline std::optional<Vec2> track_lk(const std::vector<GrayImage>& prev_pyr,
                                    const std::vector<GrayImage>& cur_pyr,
                                    double u, double v,
                                    const FlowParams& params) {
  const int k = params.window_half;
  Vec2 g = Vec2::Zero();  // accumulated guess at the current level
  for (int lev = static_cast<int>(prev_pyr.size()) - 1; lev >= 0; --lev) {
    const GrayImage& prev = prev_pyr[lev];
    const GrayImage& cur = cur_pyr[lev];
    const double scale = static_cast<double>(1 << lev);
    const double pu = u / scale;
    const double pv = v / scale;
    if (pu - k - 1 < 0 || pv - k - 1 < 0 || pu + k + 2 >= prev.width() ||
        pv + k + 2 >= prev.height())
      return std::nullopt;

    // Spatial gradient matrix of the previous frame's window.
    double gxx = 0.0, gyy = 0.0, gxy = 0.0;
    std::vector<float> ix((2 * k + 1) * (2 * k + 1));
    std::vector<float> iy(ix.size());
    std::vector<float> ip(ix.size());
    int idx = 0;
    for (int dy = -k; dy <= k; ++dy)
      for (int dx = -k; dx <= k; ++dx, ++idx) {
        const double x = pu + dx;
        const double y = pv + dy;
        const float gx =
            0.5f * (sample_bilinear(prev, x + 1, y) -
                    sample_bilinear(prev, x - 1, y));
        const float gy =
            0.5f * (sample_bilinear(prev, x, y + 1) -
                    sample_bilinear(prev, x, y - 1));
        ix[idx] = gx;
        iy[idx] = gy;
        ip[idx] = sample_bilinear(prev, x, y);
        gxx += gx * gx;
        gyy += gy * gy;
        gxy += gx * gy;
      }
    const double det = gxx * gyy - gxy * gxy;
    const double min_eig =
        0.5 * (gxx + gyy - std::sqrt((gxx - gyy) * (gxx - gyy) +
                                     4.0 * gxy * gxy));
    if (det < 1e-6 || min_eig < 1.0) return std::nullopt;

    Vec2 nu = Vec2::Zero();
    for (int it = 0; it < params.iterations; ++it) {
      double bx = 0.0, by = 0.0;
      idx = 0;
      for (int dy = -k; dy <= k; ++dy)
        for (int dx = -k; dx <= k; ++dx, ++idx) {
          const double x = pu + g.x() + nu.x() + dx;
          const double y = pv + g.y() + nu.y() + dy;
          if (x < 1 || y < 1 || x + 2 >= cur.width() || y + 2 >= cur.height())
            return std::nullopt;
          const float di = ip[idx] - sample_bilinear(cur, x, y);
          bx += di * ix[idx];
          by += di * iy[idx];
        }
      const double du = (gyy * bx - gxy * by) / det;
      const double dv = (gxx * by - gxy * bx) / det;
      nu.x() += du;
      nu.y() += dv;
      if (du * du + dv * dv < 1e-4) break;
    }
    g = lev > 0 ? Vec2(2.0 * (g + nu)) : Vec2(g + nu);
  }
  if (g.norm() > params.max_flow_px) return std::nullopt;
  return g;
}

}  // namespace internal

// Lateral (camera x) velocity from sparse flow between two frames dt apart.
// Corner flow is de-rotated with the camera-frame angular rate from the
// gyro, converted to a per-feature velocity using the depth image, and
// reduced by a median. The conversion drops the x Vz / Z term, so it assumes
// the approach speed is small compared to the lateral speed, which holds in
// the lateral painting phase this feeds.
inline FlowVelocity estimate_lateral_velocity(
    const GrayImage& prev, const GrayImage& cur, const DepthImage& prev_depth,
    const CameraIntrinsics& intr, const Vec3& omega_cam, double dt,
    const FlowParams& params = {}, std::optional<BoundingBox> roi = {}) {
  FlowVelocity out;
  if (dt <= 0.0 || prev.empty() || cur.empty()) return out;

  std::vector<GrayImage> prev_pyr, cur_pyr;
  prev_pyr.push_back(prev);
  cur_pyr.push_back(cur);
  for (int l = 1; l < params.levels; ++l) {
    prev_pyr.push_back(downsample2(prev_pyr.back()));
    cur_pyr.push_back(downsample2(cur_pyr.back()));
  }

  const std::vector<internal::Corner> corners =
      internal::shi_tomasi(prev, params, roi);
  std::vector<double> velocities;
  velocities.reserve(corners.size());
  for (const internal::Corner& c : corners) {
    const std::optional<Vec2> flow =
        internal::track_lk(prev_pyr, cur_pyr, c.u, c.v, params);
    if (!flow) continue;
    const double z = prev_depth.at(c.u, c.v);
    if (!depth_valid(z)) continue;

    const double x = (c.u - intr.cx) / intr.fx;
    const double y = (c.v - intr.cy) / intr.fy;
    const double xdot = flow->x() / (intr.fx * dt);
    // Rotational component of the normalized point flow for a camera
    // rotating at omega with a static scene.
    const double xdot_rot = x * y * omega_cam.x() -
                            (1.0 + x * x) * omega_cam.y() +
                            y * omega_cam.z();
    velocities.push_back(-z * (xdot - xdot_rot));
  }
  out.features_used = static_cast<int>(velocities.size());
  if (out.features_used < params.min_features) return out;
  auto mid = velocities.begin() + velocities.size() / 2;
  std::nth_element(velocities.begin(), mid, velocities.end());
  out.v_lateral = *mid;
  out.valid = true;
  return out;
}

}  // namespace hexpaint

#endif  // HEXPAINT_OPTICAL_FLOW_HPP_
