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

#ifndef HEXPAINT_SURFACE_HPP_
#define HEXPAINT_SURFACE_HPP_

#include <algorithm>
#include <cstdint>
#include <vector>

#include "hexpaint/geometry.hpp"

namespace hexpaint {

// Deterministic lattice noise used to texture the wall so that sparse optical
// flow has corners to lock onto. Pure function of the surface point, so the
// pattern is rigidly attached to the wall.
inline double lattice_hash01(int64_t ix, int64_t iy, uint64_t salt) {
  uint64_t h = static_cast<uint64_t>(ix) * 0x9E3779B97F4A7C15ull ^
               (static_cast<uint64_t>(iy) + 0x7F4A7C15ull) * 0xBF58476D1CE4E5B9ull ^
               salt;
  h ^= h >> 30;
  h *= 0xBF58476D1CE4E5B9ull;
  h ^= h >> 27;
  h *= 0x94D049BB133111EBull;
  h ^= h >> 31;
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

inline double value_noise(double u, double v, double cell, uint64_t salt) {
  const double su = u / cell;
  const double sv = v / cell;
  const double fu = std::floor(su);
  const double fv = std::floor(sv);
  const int64_t iu = static_cast<int64_t>(fu);
  const int64_t iv = static_cast<int64_t>(fv);
  double tu = su - fu;
  double tv = sv - fv;
  tu = tu * tu * (3.0 - 2.0 * tu);
  tv = tv * tv * (3.0 - 2.0 * tv);
  const double a = lattice_hash01(iu, iv, salt);
  const double b = lattice_hash01(iu + 1, iv, salt);
  const double c = lattice_hash01(iu, iv + 1, salt);
  const double d = lattice_hash01(iu + 1, iv + 1, salt);
  const double top = a + (b - a) * tu;
  const double bot = c + (d - c) * tu;
  return (top + (bot - top) * tv) * 2.0 - 1.0;
}

// One painted band: vertical interval (plane "down" coordinate) by lateral
// interval. Lateral extent grows as the brush sweeps; overlapping deposits at
// the same height merge into a single band.
struct PaintStripe {
  double v_center = 0.0;   // plane down coordinate of band center, m
  double half_width = 0.0; // half of the band height, m
  double s_min = 0.0;      // lateral extent, m
  double s_max = 0.0;

  double v_min() const { return v_center - half_width; }
  double v_max() const { return v_center + half_width; }
};

// Planar rectangular work surface in the inertial frame. The wall carries its
// own 2D chart: s along the lateral axis, v along the in-plane down axis, both
// measured from the rectangle center.
class SurfaceModel {
 public:
  SurfaceModel() { set_plane(Vec3::Zero(), Vec3(-1, 0, 0)); }

  SurfaceModel(const Vec3& center, const Vec3& outward_normal, double width,
               double height)
      : width_(width), height_(height) {
    set_plane(center, outward_normal);
  }

  void set_plane(const Vec3& center, const Vec3& outward_normal) {
    center_ = center;
    normal_ = outward_normal.normalized();
    const Vec3 world_down(0, 0, 1);
    down_ = (world_down - world_down.dot(normal_) * normal_).normalized();
    lateral_ = normal_.cross(down_);
  }

  const Vec3& center() const { return center_; }
  const Vec3& normal() const { return normal_; }
  const Vec3& lateral_axis() const { return lateral_; }
  const Vec3& down_axis() const { return down_; }
  double width() const { return width_; }
  double height() const { return height_; }

  // Signed distance in front of the wall (positive on the outward side).
  double signed_distance(const Vec3& p) const {
    return normal_.dot(p - center_);
  }

  Vec2 to_plane(const Vec3& p) const {
    return Vec2(lateral_.dot(p - center_), down_.dot(p - center_));
  }
  Vec3 to_world(double s, double v) const {
    return center_ + s * lateral_ + v * down_;
  }

  bool contains(double s, double v) const {
    return std::abs(s) <= width_ * 0.5 && std::abs(v) <= height_ * 0.5;
  }

  // Distance from an inside point to the closest rectangle side.
  double boundary_distance(double s, double v) const {
    const double ds = width_ * 0.5 - std::abs(s);
    const double dv = height_ * 0.5 - std::abs(v);
    return std::min(ds, dv);
  }

  bool painted(double s, double v) const {
    for (const PaintStripe& st : stripes_) {
      if (v >= st.v_min() && v <= st.v_max() && s >= st.s_min && s <= st.s_max)
        return true;
    }
    return false;
  }

  // Shading for a surface point. footprint_m is the metric size of one pixel
  // at that depth and controls the width of the dark boundary band.
  uint8_t intensity_at(double s, double v, double footprint_m) const {
    if (!contains(s, v)) return sky_intensity;
    if (boundary_distance(s, v) < 3.0 * footprint_m) return edge_intensity;
    double base;
    double amp_scale;
    if (painted(s, v)) {
      base = paint_intensity;
      amp_scale = 0.6;
    } else {
      base = background_intensity;
      amp_scale = 1.0;
    }
    const double tex = tex_cache_.empty() ? texture(s, v) : cached_texture(s, v);
    return static_cast<uint8_t>(
        std::clamp(base + amp_scale * tex, 0.0, 255.0));
  }

  // Samples the texture field onto a grid once so long rendering runs pay a
  // bilinear lookup per pixel instead of three noise octaves. Off by default;
  // the cache resolution sits below the finest octave so the interpolation
  // error stays under a gray level.
  void build_texture_cache(double res = 0.002) {
    cache_res_ = res;
    cache_w_ = static_cast<int>(std::floor(width_ / res)) + 2;
    cache_h_ = static_cast<int>(std::floor(height_ / res)) + 2;
    tex_cache_.assign(static_cast<size_t>(cache_w_) * cache_h_, 0.0f);
    for (int j = 0; j < cache_h_; ++j) {
      const double v = -0.5 * height_ + j * res;
      for (int i = 0; i < cache_w_; ++i) {
        const double s = -0.5 * width_ + i * res;
        tex_cache_[static_cast<size_t>(j) * cache_w_ + i] =
            static_cast<float>(texture(s, v));
      }
    }
  }

  // Stamps a brush footprint at the tip's surface point: a band of height
  // 2*brush_half_width and a small lateral step that merges with the previous
  // stamp of the same pass.
  void deposit_paint(const Vec3& tip_point, double brush_half_width,
                     double lateral_half = 0.01) {
    const Vec2 sv = to_plane(tip_point);
    const double s0 = sv.x() - lateral_half;
    const double s1 = sv.x() + lateral_half;
    for (PaintStripe& st : stripes_) {
      if (std::abs(st.v_center - sv.y()) < 1e-6 &&
          std::abs(st.half_width - brush_half_width) < 1e-6 &&
          s0 <= st.s_max + 1e-9 && s1 >= st.s_min - 1e-9) {
        st.s_min = std::min(st.s_min, s0);
        st.s_max = std::max(st.s_max, s1);
        merge_stripes();
        return;
      }
    }
    stripes_.push_back(PaintStripe{sv.y(), brush_half_width, s0, s1});
    merge_stripes();
  }

  const std::vector<PaintStripe>& stripes() const { return stripes_; }

  // Painted fraction of the axis-aligned target band, by exact union area.
  double coverage(double v_min, double v_max, double s_min,
                  double s_max) const {
    const double target = (v_max - v_min) * (s_max - s_min);
    if (target <= 0.0) return 0.0;

    std::vector<double> s_cuts;
    for (const PaintStripe& st : stripes_) {
      s_cuts.push_back(std::clamp(st.s_min, s_min, s_max));
      s_cuts.push_back(std::clamp(st.s_max, s_min, s_max));
    }
    s_cuts.push_back(s_min);
    s_cuts.push_back(s_max);
    std::sort(s_cuts.begin(), s_cuts.end());
    s_cuts.erase(std::unique(s_cuts.begin(), s_cuts.end()), s_cuts.end());

    double area = 0.0;
    for (size_t i = 0; i + 1 < s_cuts.size(); ++i) {
      const double sw = s_cuts[i + 1] - s_cuts[i];
      if (sw <= 0.0) continue;
      const double sm = 0.5 * (s_cuts[i] + s_cuts[i + 1]);
      // Union of clipped v-intervals of stripes covering this slab.
      std::vector<std::pair<double, double>> iv;
      for (const PaintStripe& st : stripes_) {
        if (sm < st.s_min || sm > st.s_max) continue;
        const double a = std::max(st.v_min(), v_min);
        const double b = std::min(st.v_max(), v_max);
        if (b > a) iv.emplace_back(a, b);
      }
      std::sort(iv.begin(), iv.end());
      double covered = 0.0;
      double cur_a = 0.0, cur_b = -1.0;
      for (const auto& [a, b] : iv) {
        if (cur_b < cur_a || a > cur_b) {
          if (cur_b > cur_a) covered += cur_b - cur_a;
          cur_a = a;
          cur_b = b;
        } else {
          cur_b = std::max(cur_b, b);
        }
      }
      if (cur_b > cur_a) covered += cur_b - cur_a;
      area += covered * sw;
    }
    return area / target;
  }

  double painted_area() const {
    return coverage(-height_ * 0.5, height_ * 0.5, -width_ * 0.5,
                    width_ * 0.5) *
           width_ * height_;
  }

  uint8_t background_intensity = 200;
  uint8_t paint_intensity = 90;
  uint8_t edge_intensity = 30;
  uint8_t sky_intensity = 240;

 private:
  double texture(double s, double v) const {
    return 10.0 * value_noise(s, v, 0.040, 1) +
           6.0 * value_noise(s, v, 0.013, 2) +
           4.0 * value_noise(s, v, 0.005, 3);
  }

  double cached_texture(double s, double v) const {
    const double gx = std::clamp((s + 0.5 * width_) / cache_res_, 0.0,
                                 static_cast<double>(cache_w_ - 2));
    const double gy = std::clamp((v + 0.5 * height_) / cache_res_, 0.0,
                                 static_cast<double>(cache_h_ - 2));
    const int ix = static_cast<int>(gx);
    const int iy = static_cast<int>(gy);
    const double fx = gx - ix;
    const double fy = gy - iy;
    const float* row = &tex_cache_[static_cast<size_t>(iy) * cache_w_ + ix];
    const double top = row[0] + (row[1] - row[0]) * fx;
    const double bot = row[cache_w_] + (row[cache_w_ + 1] - row[cache_w_]) * fx;
    return top + (bot - top) * fy;
  }

  // Coalesces stripes with identical bands whose lateral intervals now touch.
  void merge_stripes() {
    bool merged = true;
    while (merged) {
      merged = false;
      for (size_t i = 0; i < stripes_.size() && !merged; ++i) {
        for (size_t j = i + 1; j < stripes_.size() && !merged; ++j) {
          PaintStripe& a = stripes_[i];
          PaintStripe& b = stripes_[j];
          if (std::abs(a.v_center - b.v_center) < 1e-6 &&
              std::abs(a.half_width - b.half_width) < 1e-6 &&
              a.s_min <= b.s_max + 1e-9 && b.s_min <= a.s_max + 1e-9) {
            a.s_min = std::min(a.s_min, b.s_min);
            a.s_max = std::max(a.s_max, b.s_max);
            stripes_.erase(stripes_.begin() + static_cast<long>(j));
            merged = true;
          }
        }
      }
    }
  }

  Vec3 center_ = Vec3::Zero();
  Vec3 normal_ = Vec3(-1, 0, 0);
  Vec3 lateral_ = Vec3(0, 1, 0);
  Vec3 down_ = Vec3(0, 0, 1);
  double width_ = 6.0;
  double height_ = 4.0;
  std::vector<PaintStripe> stripes_;
  std::vector<float> tex_cache_;
  double cache_res_ = 0.002;
  int cache_w_ = 0;
  int cache_h_ = 0;
};

}  // namespace hexpaint

#endif  // HEXPAINT_SURFACE_HPP_
