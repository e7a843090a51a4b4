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
// Line detection on rendered RGB-D frames: depth pre-filtering, surface
// normals, region-of-interest estimation, Canny edges, a progressive
// probabilistic Hough transform, and slope-based line classification. The
// output lines use the normalized (rho, theta) convention of camera.hpp.

#ifndef HEXPAINT_VISION_HPP_
#define HEXPAINT_VISION_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "hexpaint/camera.hpp"
#include "hexpaint/geometry.hpp"
#include "hexpaint/image.hpp"

namespace hexpaint {

// Axis-aligned pixel rectangle with inclusive bounds, plus the seed the
// region search started from. Doubles as a region-of-interest carrier for
// the filter stages.
struct BoundingBox {
  int u_min = 0;
  int v_min = 0;
  int u_max = -1;
  int v_max = -1;
  int seed_u = 0;
  int seed_v = 0;
  bool confident = false;

  int width() const { return u_max - u_min + 1; }
  int height() const { return v_max - v_min + 1; }
  bool empty() const { return u_max < u_min || v_max < v_min; }
  int area() const { return empty() ? 0 : width() * height(); }
  int center_u() const { return (u_min + u_max) / 2; }
  int center_v() const { return (v_min + v_max) / 2; }
  bool contains(int u, int v) const {
    return u >= u_min && u <= u_max && v >= v_min && v <= v_max;
  }

  static BoundingBox full(int width, int height) {
    BoundingBox b;
    b.u_min = 0;
    b.v_min = 0;
    b.u_max = width - 1;
    b.v_max = height - 1;
    b.seed_u = width / 2;
    b.seed_v = height / 2;
    b.confident = true;
    return b;
  }

  BoundingBox grown(int px, int image_w, int image_h) const {
    BoundingBox b = *this;
    b.u_min = std::max(0, u_min - px);
    b.v_min = std::max(0, v_min - px);
    b.u_max = std::min(image_w - 1, u_max + px);
    b.v_max = std::min(image_h - 1, v_max + px);
    return b;
  }
};

// 5x5 median filter on the valid-depth mask. Invalid pixels stay invalid and
// do not contribute to their neighbors' medians; the window is clipped at
// the image border. Pixels outside roi are left invalid.
namespace internal {

// Median of 25 by a fixed selection network (99 compare-exchanges), the
// classic branch-free layout for 5x5 median filtering. The values live in
// named locals so the whole network runs on registers; an indexed array
// would bounce every exchange through memory.
inline double median25(const std::array<double, 25>& in) {
  double p0 = in[0], p1 = in[1], p2 = in[2], p3 = in[3], p4 = in[4],
         p5 = in[5], p6 = in[6], p7 = in[7], p8 = in[8], p9 = in[9],
         p10 = in[10], p11 = in[11], p12 = in[12], p13 = in[13],
         p14 = in[14], p15 = in[15], p16 = in[16], p17 = in[17],
         p18 = in[18], p19 = in[19], p20 = in[20], p21 = in[21],
         p22 = in[22], p23 = in[23], p24 = in[24];
#define HEXPAINT_CAS(a, b)             \
  {                                    \
    const double t = std::min(a, b);   \
    b = std::max(a, b);                \
    a = t;                             \
  }
  HEXPAINT_CAS(p0, p1); HEXPAINT_CAS(p3, p4); HEXPAINT_CAS(p2, p4);
  HEXPAINT_CAS(p2, p3); HEXPAINT_CAS(p6, p7); HEXPAINT_CAS(p5, p7);
  HEXPAINT_CAS(p5, p6); HEXPAINT_CAS(p9, p10); HEXPAINT_CAS(p8, p10);
  HEXPAINT_CAS(p8, p9); HEXPAINT_CAS(p12, p13); HEXPAINT_CAS(p11, p13);
  HEXPAINT_CAS(p11, p12); HEXPAINT_CAS(p15, p16); HEXPAINT_CAS(p14, p16);
  HEXPAINT_CAS(p14, p15); HEXPAINT_CAS(p18, p19); HEXPAINT_CAS(p17, p19);
  HEXPAINT_CAS(p17, p18); HEXPAINT_CAS(p21, p22); HEXPAINT_CAS(p20, p22);
  HEXPAINT_CAS(p20, p21); HEXPAINT_CAS(p23, p24); HEXPAINT_CAS(p2, p5);
  HEXPAINT_CAS(p3, p6); HEXPAINT_CAS(p0, p6); HEXPAINT_CAS(p0, p3);
  HEXPAINT_CAS(p4, p7); HEXPAINT_CAS(p1, p7); HEXPAINT_CAS(p1, p4);
  HEXPAINT_CAS(p11, p14); HEXPAINT_CAS(p8, p14); HEXPAINT_CAS(p8, p11);
  HEXPAINT_CAS(p12, p15); HEXPAINT_CAS(p9, p15); HEXPAINT_CAS(p9, p12);
  HEXPAINT_CAS(p13, p16); HEXPAINT_CAS(p10, p16); HEXPAINT_CAS(p10, p13);
  HEXPAINT_CAS(p20, p23); HEXPAINT_CAS(p17, p23); HEXPAINT_CAS(p17, p20);
  HEXPAINT_CAS(p21, p24); HEXPAINT_CAS(p18, p24); HEXPAINT_CAS(p18, p21);
  HEXPAINT_CAS(p19, p22); HEXPAINT_CAS(p8, p17); HEXPAINT_CAS(p9, p18);
  HEXPAINT_CAS(p0, p18); HEXPAINT_CAS(p0, p9); HEXPAINT_CAS(p10, p19);
  HEXPAINT_CAS(p1, p19); HEXPAINT_CAS(p1, p10); HEXPAINT_CAS(p11, p20);
  HEXPAINT_CAS(p2, p20); HEXPAINT_CAS(p2, p11); HEXPAINT_CAS(p12, p21);
  HEXPAINT_CAS(p3, p21); HEXPAINT_CAS(p3, p12); HEXPAINT_CAS(p13, p22);
  HEXPAINT_CAS(p4, p22); HEXPAINT_CAS(p4, p13); HEXPAINT_CAS(p14, p23);
  HEXPAINT_CAS(p5, p23); HEXPAINT_CAS(p5, p14); HEXPAINT_CAS(p15, p24);
  HEXPAINT_CAS(p6, p24); HEXPAINT_CAS(p6, p15); HEXPAINT_CAS(p7, p16);
  HEXPAINT_CAS(p7, p19); HEXPAINT_CAS(p13, p21); HEXPAINT_CAS(p15, p23);
  HEXPAINT_CAS(p7, p13); HEXPAINT_CAS(p7, p15); HEXPAINT_CAS(p1, p9);
  HEXPAINT_CAS(p3, p11); HEXPAINT_CAS(p5, p17); HEXPAINT_CAS(p11, p17);
  HEXPAINT_CAS(p9, p17); HEXPAINT_CAS(p4, p10); HEXPAINT_CAS(p6, p12);
  HEXPAINT_CAS(p7, p14); HEXPAINT_CAS(p4, p6); HEXPAINT_CAS(p4, p7);
  HEXPAINT_CAS(p12, p14); HEXPAINT_CAS(p10, p14); HEXPAINT_CAS(p6, p7);
  HEXPAINT_CAS(p10, p12); HEXPAINT_CAS(p6, p10); HEXPAINT_CAS(p6, p17);
  HEXPAINT_CAS(p12, p17); HEXPAINT_CAS(p7, p17); HEXPAINT_CAS(p7, p10);
  HEXPAINT_CAS(p12, p18); HEXPAINT_CAS(p7, p12); HEXPAINT_CAS(p10, p18);
  HEXPAINT_CAS(p12, p20); HEXPAINT_CAS(p10, p20); HEXPAINT_CAS(p10, p12);
#undef HEXPAINT_CAS
  return p12;
}

// Filtered depth at a single pixel: median of the valid samples in the 5x5
// window, zero when the raw center sample is itself invalid. Shared by the
// dense filter and the demand-driven field evaluator so both produce the
// same values pixel for pixel.
inline double median_window(const DepthImage& depth, int x, int y) {
  if (!depth_valid(depth.at(x, y))) return 0.0;
  const int w = depth.width();
  const int h = depth.height();
  const int x0 = std::max(0, x - 2);
  const int x1 = std::min(w - 1, x + 2);
  const int y0 = std::max(0, y - 2);
  const int y1 = std::min(h - 1, y + 2);
  std::array<double, 25> buf;
  if (y1 - y0 == 4 && x1 - x0 == 4) {
    const double* row = &depth.at(x0, y0);
    bool all_valid = true;
    for (int i = 0; i < 5; ++i, row += w) {
      for (int j = 0; j < 5; ++j) {
        buf[5 * i + j] = row[j];
        all_valid &= depth_valid(row[j]);
      }
    }
    if (all_valid) return median25(buf);
  }
  int count = 0;
  for (int yy = y0; yy <= y1; ++yy)
    for (int xx = x0; xx <= x1; ++xx) {
      const double d = depth.at(xx, yy);
      if (depth_valid(d)) buf[count++] = d;
    }
  auto mid = buf.begin() + count / 2;
  std::nth_element(buf.begin(), mid, buf.begin() + count);
  return *mid;
}

// Surface normal at a single pixel from central differences of filtered
// depth; see normals_from_filtered_depth for the geometry and the stride
// rule. depth_at(x, y) must be callable anywhere in the image and return an
// invalid depth wherever no filtered value exists. The caller keeps (x, y)
// at least two pixels inside the border.
template <typename DepthAt>
inline Eigen::Vector3f normal_value(DepthAt&& depth_at, int x, int y, int w,
                                    int h, const CameraIntrinsics& intr,
                                    double metric_baseline) {
  const double z = depth_at(x, y);
  if (!depth_valid(z)) return Eigen::Vector3f::Zero();
  int s = 2;
  if (metric_baseline > 0.0) {
    s = std::clamp(
        static_cast<int>(std::lround(metric_baseline * intr.fx / z)), 2, 12);
    // Near the image border fall back to whatever stride still fits so
    // coverage matches the fixed-stride estimator.
    s = std::min({s, x, y, w - 1 - x, h - 1 - y});
  }
  const double zl = depth_at(x - s, y);
  const double zr = depth_at(x + s, y);
  const double zu = depth_at(x, y - s);
  const double zd = depth_at(x, y + s);
  if (!depth_valid(zl) || !depth_valid(zr) || !depth_valid(zu) ||
      !depth_valid(zd))
    return Eigen::Vector3f::Zero();
  const double gx = (zr - zl) / (2.0 * s) * intr.fx / z;
  const double gy = (zd - zu) / (2.0 * s) * intr.fy / z;
  Eigen::Vector3f n(static_cast<float>(-gx), static_cast<float>(-gy), 1.0f);
  return n.normalized();
}

// 3x3 renormalized average of valid normals around one pixel; see
// smooth_normals3. normal_at(x, y) must be callable for any in-image pixel.
template <typename NormalAt>
inline Eigen::Vector3f smooth_value(NormalAt&& normal_at, int x, int y, int w,
                                    int h) {
  Eigen::Vector3f sum = Eigen::Vector3f::Zero();
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const int xx = x + dx;
      const int yy = y + dy;
      if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
      const Eigen::Vector3f n = normal_at(xx, yy);
      if (n.squaredNorm() > 0.25f) sum += n;
    }
  return sum.normalized();
}

}  // namespace internal

inline DepthImage median_filter5(const DepthImage& depth,
                                 std::optional<BoundingBox> roi = {}) {
  const int w = depth.width();
  const int h = depth.height();
  const BoundingBox r = roi.value_or(BoundingBox::full(w, h));
  DepthImage out(w, h, 0.0);
  for (int y = std::max(0, r.v_min); y <= std::min(h - 1, r.v_max); ++y)
    for (int x = std::max(0, r.u_min); x <= std::min(w - 1, r.u_max); ++x)
      out.at(x, y) = internal::median_window(depth, x, y);
  return out;
}

// Surface normals from central differences on an already-filtered depth
// image. The depth surface Z = z(X, Y) has normal proportional to
// (-dz/dX, -dz/dY, 1); metric gradients come from pixel gradients scaled by
// f/z. Normals therefore point away from the camera, (0, 0, 1) for a
// fronto-parallel wall. The differences straddle two pixels per side by
// default; with metric_baseline > 0 the stride widens per pixel so the
// difference spans a fixed metric width, which keeps the gradient noise
// from blowing up as fx/z at close range. Either way the estimate is exact
// on planar depth. The f/z scaling treats the pixel ray bundle as locally
// parallel, which holds up well for near-fronto surfaces.
inline NormalImage normals_from_filtered_depth(
    const DepthImage& depth, const CameraIntrinsics& intr,
    std::optional<BoundingBox> roi = {}, double metric_baseline = 0.0) {
  const int w = depth.width();
  const int h = depth.height();
  const BoundingBox r = roi.value_or(BoundingBox::full(w, h));
  NormalImage out(w, h, Eigen::Vector3f::Zero());
  const auto depth_at = [&depth](int x, int y) { return depth.at(x, y); };
  for (int y = std::max(2, r.v_min); y <= std::min(h - 3, r.v_max); ++y)
    for (int x = std::max(2, r.u_min); x <= std::min(w - 3, r.u_max); ++x)
      out.at(x, y) =
          internal::normal_value(depth_at, x, y, w, h, intr, metric_baseline);
  return out;
}

inline NormalImage depth_to_normals(const DepthImage& depth,
                                    const CameraIntrinsics& intr) {
  return normals_from_filtered_depth(median_filter5(depth), intr);
}

// 3x3 average of valid normals, renormalized. Sensor noise leaves the raw
// per-pixel normals several degrees wide, which would trip the region
// search's deviation gate on a perfectly flat wall; averaging nine samples
// pulls the spread well inside it.
inline NormalImage smooth_normals3(const NormalImage& normals,
                                   std::optional<BoundingBox> roi = {}) {
  const int w = normals.width();
  const int h = normals.height();
  const BoundingBox r = roi.value_or(BoundingBox::full(w, h));
  NormalImage out(w, h, Eigen::Vector3f::Zero());
  const auto normal_at = [&normals](int x, int y) { return normals.at(x, y); };
  for (int y = std::max(0, r.v_min); y <= std::min(h - 1, r.v_max); ++y)
    for (int x = std::max(0, r.u_min); x <= std::min(w - 1, r.u_max); ++x) {
      if (normals.at(x, y).squaredNorm() < 0.25f) continue;
      out.at(x, y) = internal::smooth_value(normal_at, x, y, w, h);
    }
  return out;
}

struct SeedInvalid : std::runtime_error {
  SeedInvalid() : std::runtime_error("bbox seed has no valid normal") {}
};

struct BboxParams {
  double normal_gate_deg = 10.0;  // stop when normals turn this far
  double depth_sigma = 0.002;     // sensor noise driving the step threshold
  double min_second_diff = 0.002; // m, threshold floor for clean depth
  int margin_px = 2;              // safety shrink of the stop-point hull
};

namespace internal {

// Ray-march core of estimate_bbox over any field source. Fields must expose
// width(), height(), inside(x, y), normal(x, y) and depth(x, y), where the
// latter two read as invalid (zero normal, non-positive depth) wherever no
// value exists.
template <typename Fields>
inline BoundingBox march_bbox(const Fields& f, int seed_u, int seed_v,
                              const std::optional<BoundingBox>& prev,
                              const BboxParams& params) {
  const int w = f.width();
  const int h = f.height();
  if (prev && !prev->empty()) {
    seed_u = prev->center_u();
    seed_v = prev->center_v();
  }
  if (!f.inside(seed_u, seed_v) ||
      f.normal(seed_u, seed_v).squaredNorm() < 0.25)
    throw SeedInvalid();

  const Eigen::Vector3f n_seed = f.normal(seed_u, seed_v);
  const float cos_gate =
      std::cos(static_cast<float>(params.normal_gate_deg * M_PI / 180.0));
  const double step_gate =
      std::max(5.0 * params.depth_sigma * std::sqrt(6.0),
               params.min_second_diff);

  static constexpr int kDirs[8][2] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1},
                                      {1, 1},  {1, -1}, {-1, 1}, {-1, -1}};
  BoundingBox box;
  box.u_min = seed_u;
  box.u_max = seed_u;
  box.v_min = seed_v;
  box.v_max = seed_v;
  box.seed_u = seed_u;
  box.seed_v = seed_v;
  int shortest_ray = std::max(w, h);
  for (const auto& dir : kDirs) {
    int u = seed_u;
    int v = seed_v;
    int len = 0;
    int violations = 0;
    for (int k = 1;; ++k) {
      const int uu = seed_u + k * dir[0];
      const int vv = seed_v + k * dir[1];
      if (!f.inside(uu, vv)) break;
      u = uu;
      v = vv;
      len = k;
      const Eigen::Vector3f n = f.normal(uu, vv);
      if (n.squaredNorm() < 0.25) break;
      bool off = n.dot(n_seed) < cos_gate;
      const int up = uu + dir[0];
      const int vp = vv + dir[1];
      const int um = uu - dir[0];
      const int vm = vv - dir[1];
      if (!off && f.inside(up, vp)) {
        const double z0 = f.depth(um, vm);
        const double z1 = f.depth(uu, vv);
        const double z2 = f.depth(up, vp);
        off = depth_valid(z0) && depth_valid(z1) && depth_valid(z2) &&
              std::abs(z0 - 2.0 * z1 + z2) > step_gate;
      }
      if (off) {
        if (++violations >= 2) break;
      } else {
        violations = 0;
      }
    }
    box.u_min = std::min(box.u_min, u);
    box.u_max = std::max(box.u_max, u);
    box.v_min = std::min(box.v_min, v);
    box.v_max = std::max(box.v_max, v);
    shortest_ray = std::min(shortest_ray, len);
  }

  box.u_min += params.margin_px;
  box.v_min += params.margin_px;
  box.u_max -= params.margin_px;
  box.v_max -= params.margin_px;
  if (box.empty()) {
    box.u_min = box.u_max = seed_u;
    box.v_min = box.v_max = seed_v;
    box.confident = false;
  } else {
    box.confident = shortest_ray >= 2 * params.margin_px;
  }
  return box;
}

// Adapter that lets march_bbox run over dense images.
struct DenseFields {
  const NormalImage& normals;
  const DepthImage& depths;
  int width() const { return normals.width(); }
  int height() const { return normals.height(); }
  bool inside(int x, int y) const { return normals.inside(x, y); }
  Eigen::Vector3f normal(int x, int y) const { return normals.at(x, y); }
  double depth(int x, int y) const { return depths.at(x, y); }
};

}  // namespace internal

// Marches rays from the seed in 8 directions over the normal image and stops
// each ray where the surface stops behaving like the seed's plane: normal
// deviation beyond the gate, loss of valid data, or a depth second
// difference along the ray above 5 sigma of its noise (the second difference
// of three unit-variance samples has variance 6). A lone off-gate sample is
// forgiven; the ray stops on two consecutive violations, which keeps sensor
// noise spikes from truncating rays on a perfectly good wall. The box is the
// axis aligned hull of the stop points shrunk by a small margin. When prev
// is given the search re-seeds from its center.
inline BoundingBox estimate_bbox(const NormalImage& normals,
                                 const DepthImage& depth, int seed_u,
                                 int seed_v,
                                 const std::optional<BoundingBox>& prev = {},
                                 const BboxParams& params = {}) {
  return internal::march_bbox(internal::DenseFields{normals, depth}, seed_u,
                              seed_v, prev, params);
}

namespace internal {

// Demand-driven evaluation of the depth-derived field stack: median-filtered
// depth, surface normals, smoothed normals. The region search and the box
// statistics touch a few thousand pixels per frame, a small fraction of the
// processing region, so each layer computes values on first access and
// memoizes them in caller-owned buffers. Inside its domain every layer
// matches the corresponding dense operator pixel for pixel; outside it reads
// as invalid, exactly like the dense intermediate images do. Memo validity
// is tracked per pixel with a generation stamp so reuse across frames needs
// no clearing.
class LazyFields {
 public:
  struct Memo {
    DepthImage filtered;
    NormalImage normal;
    NormalImage smooth;
    Image<uint32_t> filtered_gen;
    Image<uint32_t> normal_gen;
    Image<uint32_t> smooth_gen;
    uint32_t generation = 0;
  };

  LazyFields(const DepthImage& raw, const CameraIntrinsics& grid,
             double metric_baseline, const BoundingBox& roi, Memo& memo)
      : raw_(raw),
        grid_(grid),
        baseline_(metric_baseline),
        memo_(memo),
        w_(raw.width()),
        h_(raw.height()) {
    if (memo_.filtered.width() != w_ || memo_.filtered.height() != h_) {
      memo_.filtered = DepthImage(w_, h_, 0.0);
      memo_.normal = NormalImage(w_, h_, Eigen::Vector3f::Zero());
      memo_.smooth = NormalImage(w_, h_, Eigen::Vector3f::Zero());
      memo_.filtered_gen = Image<uint32_t>(w_, h_, 0);
      memo_.normal_gen = Image<uint32_t>(w_, h_, 0);
      memo_.smooth_gen = Image<uint32_t>(w_, h_, 0);
      memo_.generation = 0;
    }
    ++memo_.generation;
    // The filter runs slightly beyond the processing region so the widest
    // gradient stride still lands on filtered depth at the region border.
    filt_ = roi.grown(12, w_, h_);
    norm_u0_ = std::max(2, roi.u_min);
    norm_u1_ = std::min(w_ - 3, roi.u_max);
    norm_v0_ = std::max(2, roi.v_min);
    norm_v1_ = std::min(h_ - 3, roi.v_max);
    smooth_u0_ = std::max(0, roi.u_min);
    smooth_u1_ = std::min(w_ - 1, roi.u_max);
    smooth_v0_ = std::max(0, roi.v_min);
    smooth_v1_ = std::min(h_ - 1, roi.v_max);
  }

  int width() const { return w_; }
  int height() const { return h_; }
  bool inside(int x, int y) const {
    return x >= 0 && y >= 0 && x < w_ && y < h_;
  }

  double filtered_at(int x, int y) const {
    if (!filt_.contains(x, y)) return 0.0;
    if (memo_.filtered_gen.at(x, y) == memo_.generation)
      return memo_.filtered.at(x, y);
    const double d = median_window(raw_, x, y);
    memo_.filtered.at(x, y) = d;
    memo_.filtered_gen.at(x, y) = memo_.generation;
    return d;
  }

  Eigen::Vector3f raw_normal_at(int x, int y) const {
    if (x < norm_u0_ || x > norm_u1_ || y < norm_v0_ || y > norm_v1_)
      return Eigen::Vector3f::Zero();
    if (memo_.normal_gen.at(x, y) == memo_.generation)
      return memo_.normal.at(x, y);
    const Eigen::Vector3f n = normal_value(
        [this](int xx, int yy) { return filtered_at(xx, yy); }, x, y, w_, h_,
        grid_, baseline_);
    memo_.normal.at(x, y) = n;
    memo_.normal_gen.at(x, y) = memo_.generation;
    return n;
  }

  Eigen::Vector3f smooth_at(int x, int y) const {
    if (x < smooth_u0_ || x > smooth_u1_ || y < smooth_v0_ || y > smooth_v1_)
      return Eigen::Vector3f::Zero();
    if (memo_.smooth_gen.at(x, y) == memo_.generation)
      return memo_.smooth.at(x, y);
    Eigen::Vector3f n = Eigen::Vector3f::Zero();
    if (raw_normal_at(x, y).squaredNorm() >= 0.25f)
      n = smooth_value(
          [this](int xx, int yy) { return raw_normal_at(xx, yy); }, x, y, w_,
          h_);
    memo_.smooth.at(x, y) = n;
    memo_.smooth_gen.at(x, y) = memo_.generation;
    return n;
  }

  // march_bbox field concept: the march runs on smoothed normals and
  // filtered depth.
  Eigen::Vector3f normal(int x, int y) const { return smooth_at(x, y); }
  double depth(int x, int y) const { return filtered_at(x, y); }

 private:
  const DepthImage& raw_;
  const CameraIntrinsics& grid_;
  double baseline_;
  Memo& memo_;
  int w_, h_;
  BoundingBox filt_;
  int norm_u0_, norm_u1_, norm_v0_, norm_v1_;
  int smooth_u0_, smooth_u1_, smooth_v0_, smooth_v1_;
};

}  // namespace internal

// 2x2 box average; truncates odd trailing row/column.
inline GrayImage downsample2(const GrayImage& img) {
  const int w = img.width() / 2;
  const int h = img.height() / 2;
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int s = img.at(2 * x, 2 * y) + img.at(2 * x + 1, 2 * y) +
                    img.at(2 * x, 2 * y + 1) + img.at(2 * x + 1, 2 * y + 1);
      out.at(x, y) = static_cast<uint8_t>((s + 2) / 4);
    }
  return out;
}

// 2x2 average of the valid depth samples; invalid only where all four are.
inline DepthImage downsample2_depth(const DepthImage& img) {
  const int w = img.width() / 2;
  const int h = img.height() / 2;
  DepthImage out(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int count = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const double d = img.at(2 * x + dx, 2 * y + dy);
          if (depth_valid(d)) {
            sum += d;
            ++count;
          }
        }
      if (count > 0) out.at(x, y) = sum / count;
    }
  return out;
}

// Intrinsics of the 2x downsampled grid. Full-resolution pixel centers sit
// at integers, so downsampled pixel i covers centers {2i, 2i+1} and has its
// center at 2i + 0.5: u = 2 u_ds + 0.5. Averaging four depth samples halves
// the depth noise.
inline CameraIntrinsics downsampled(const CameraIntrinsics& intr) {
  CameraIntrinsics out = intr;
  out.fx = intr.fx / 2.0;
  out.fy = intr.fy / 2.0;
  out.cx = (intr.cx - 0.5) / 2.0;
  out.cy = (intr.cy - 0.5) / 2.0;
  out.width = intr.width / 2;
  out.height = intr.height / 2;
  out.sigma_d = intr.sigma_d / 2.0;
  return out;
}

// Canny edge detector: Gaussian blur (sigma 1.4), Sobel gradients,
// non-maximum suppression, hysteresis. Thresholds apply to the Sobel
// magnitude. Only the roi is processed; the returned bitmap has the input
// size with 255 at edge pixels.
inline Image<uint8_t> canny(const GrayImage& gray, double low, double high,
                            std::optional<BoundingBox> roi = {}) {
  if (!(low > 0.0) || high < low)
    throw std::invalid_argument("canny thresholds must satisfy high >= low > 0");
  const BoundingBox r =
      roi.value_or(BoundingBox::full(gray.width(), gray.height()));
  Image<uint8_t> edges(gray.width(), gray.height(), 0);
  const int rw = r.width();
  const int rh = r.height();
  if (r.empty() || rw < 5 || rh < 5) return edges;

  // Separable Gaussian, sigma 1.4, radius 4, clamped at the roi border.
  std::array<float, 9> kernel;
  {
    float sum = 0.0f;
    for (int i = -4; i <= 4; ++i) {
      kernel[i + 4] = std::exp(-0.5f * i * i / (1.4f * 1.4f));
      sum += kernel[i + 4];
    }
    for (float& k : kernel) k /= sum;
  }
  std::vector<float> blur_h(static_cast<size_t>(rw) * rh);
  std::vector<float> blur(static_cast<size_t>(rw) * rh);
  for (int y = 0; y < rh; ++y)
    for (int x = 0; x < rw; ++x) {
      float acc = 0.0f;
      for (int i = -4; i <= 4; ++i) {
        const int xx = std::clamp(x + i, 0, rw - 1);
        acc += kernel[i + 4] * gray.at(r.u_min + xx, r.v_min + y);
      }
      blur_h[static_cast<size_t>(y) * rw + x] = acc;
    }
  for (int y = 0; y < rh; ++y)
    for (int x = 0; x < rw; ++x) {
      float acc = 0.0f;
      for (int i = -4; i <= 4; ++i) {
        const int yy = std::clamp(y + i, 0, rh - 1);
        acc += kernel[i + 4] * blur_h[static_cast<size_t>(yy) * rw + x];
      }
      blur[static_cast<size_t>(y) * rw + x] = acc;
    }

  const auto b = [&](int x, int y) -> float {
    return blur[static_cast<size_t>(y) * rw + x];
  };
  std::vector<float> mag(static_cast<size_t>(rw) * rh, 0.0f);
  std::vector<float> gxv(static_cast<size_t>(rw) * rh, 0.0f);
  std::vector<float> gyv(static_cast<size_t>(rw) * rh, 0.0f);
  for (int y = 1; y < rh - 1; ++y)
    for (int x = 1; x < rw - 1; ++x) {
      const float gx = (b(x + 1, y - 1) + 2.0f * b(x + 1, y) + b(x + 1, y + 1)) -
                       (b(x - 1, y - 1) + 2.0f * b(x - 1, y) + b(x - 1, y + 1));
      const float gy = (b(x - 1, y + 1) + 2.0f * b(x, y + 1) + b(x + 1, y + 1)) -
                       (b(x - 1, y - 1) + 2.0f * b(x, y - 1) + b(x + 1, y - 1));
      const size_t i = static_cast<size_t>(y) * rw + x;
      gxv[i] = gx;
      gyv[i] = gy;
      mag[i] = std::hypot(gx, gy);
    }

  // Non-maximum suppression into a weak/strong map, then hysteresis.
  std::vector<uint8_t> state(static_cast<size_t>(rw) * rh, 0);
  std::vector<int> stack;
  for (int y = 2; y < rh - 2; ++y)
    for (int x = 2; x < rw - 2; ++x) {
      const size_t i = static_cast<size_t>(y) * rw + x;
      const float m = mag[i];
      if (m < low) continue;
      const float ax = std::abs(gxv[i]);
      const float ay = std::abs(gyv[i]);
      float m1, m2;
      if (ax > 2.414f * ay) {
        m1 = mag[i - 1];
        m2 = mag[i + 1];
      } else if (ay > 2.414f * ax) {
        m1 = mag[i - rw];
        m2 = mag[i + rw];
      } else if (gxv[i] * gyv[i] > 0.0f) {
        m1 = mag[i - rw - 1];
        m2 = mag[i + rw + 1];
      } else {
        m1 = mag[i - rw + 1];
        m2 = mag[i + rw - 1];
      }
      if (m < m1 || m < m2) continue;
      state[i] = m >= high ? 2 : 1;
      if (state[i] == 2) stack.push_back(static_cast<int>(i));
    }
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const int x = i % rw;
    const int y = i / rw;
    edges.at(r.u_min + x, r.v_min + y) = 255;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int xx = x + dx;
        const int yy = y + dy;
        if (xx < 0 || yy < 0 || xx >= rw || yy >= rh) continue;
        const int j = yy * rw + xx;
        if (state[j] == 1) {
          state[j] = 2;
          stack.push_back(j);
        }
      }
  }
  return edges;
}

struct HoughParams {
  double theta_res_deg = 1.0;
  double rho_res_px = 1.0;
  int vote_threshold = 20;
  int min_length_px = 25;
  int max_gap_px = 4;
  int max_segments = 10;
};

struct LineSegment {
  double u0 = 0.0, v0 = 0.0;
  double u1 = 0.0, v1 = 0.0;
  int support = 0;  // edge pixels collected along the walk
  // Total-least-squares fit over the support pixels, image pixel units:
  // unit normal (nx, ny) and foot distance c with nx u + ny v = c.
  double nx = 0.0, ny = 0.0, c = 0.0;

  double length() const { return std::hypot(u1 - u0, v1 - v0); }
};

// Progressive probabilistic Hough transform. Edge points vote in a (theta,
// rho) accumulator one random point at a time; once a bin crosses the vote
// threshold the candidate line is walked pixel by pixel with gap bridging,
// its support is removed from the edge map and un-voted, and the segment is
// kept if long enough. The emitted line parameters come from an orthogonal
// least-squares fit of the support pixels, which localizes much better than
// the accumulator bin. Deterministic for a fixed rng state.
inline std::vector<LineSegment> hough_segments(const Image<uint8_t>& edges,
                                               const HoughParams& params,
                                               std::mt19937_64& rng) {
  const int w = edges.width();
  const int h = edges.height();
  const int ntheta =
      std::max(1, static_cast<int>(std::lround(180.0 / params.theta_res_deg)));
  const double max_rho = std::hypot(w, h);
  const int nrho =
      2 * static_cast<int>(std::ceil(max_rho / params.rho_res_px)) + 1;

  std::vector<float> tcos(ntheta), tsin(ntheta);
  for (int t = 0; t < ntheta; ++t) {
    const double th = t * M_PI / ntheta;
    tcos[t] = static_cast<float>(std::cos(th));
    tsin[t] = static_cast<float>(std::sin(th));
  }

  std::vector<std::pair<int16_t, int16_t>> points;
  points.reserve(4096);
  std::vector<uint8_t> mask(static_cast<size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (edges.at(x, y)) {
        points.emplace_back(static_cast<int16_t>(x), static_cast<int16_t>(y));
        mask[static_cast<size_t>(y) * w + x] = 1;
      }

  std::vector<int> acc(static_cast<size_t>(ntheta) * nrho, 0);
  std::vector<uint8_t> voted(static_cast<size_t>(w) * h, 0);
  const auto rho_index = [&](float r) {
    return static_cast<int>(std::lround((r + max_rho) / params.rho_res_px));
  };
  const auto vote = [&](int x, int y, int delta, int* best_theta) {
    int best = 0;
    for (int t = 0; t < ntheta; ++t) {
      const float r = x * tcos[t] + y * tsin[t];
      int& bin = acc[static_cast<size_t>(t) * nrho + rho_index(r)];
      bin += delta;
      if (bin > best) {
        best = bin;
        if (best_theta) *best_theta = t;
      }
    }
    return best;
  };

  std::vector<LineSegment> out;
  std::vector<std::pair<int16_t, int16_t>> hits;
  while (!points.empty() &&
         static_cast<int>(out.size()) < params.max_segments) {
    const size_t idx = rng() % points.size();
    const auto [px, py] = points[idx];
    points[idx] = points.back();
    points.pop_back();
    if (!mask[static_cast<size_t>(py) * w + px]) continue;

    int best_theta = 0;
    const int best = vote(px, py, 1, &best_theta);
    voted[static_cast<size_t>(py) * w + px] = 1;
    if (best < params.vote_threshold) continue;

    // Walk the candidate line in both directions along its direction vector,
    // stepping the dominant axis one pixel at a time and accepting hits in a
    // one-pixel corridor, bridging gaps up to max_gap.
    const float dx = -tsin[best_theta];
    const float dy = tcos[best_theta];
    hits.clear();
    hits.emplace_back(px, py);
    const bool x_major = std::abs(dx) >= std::abs(dy);
    for (const int sense : {1, -1}) {
      int gap = 0;
      for (int k = 1;; ++k) {
        int x, y;
        if (x_major) {
          const int sx = dx >= 0.0f ? 1 : -1;
          x = px + sense * sx * k;
          y = static_cast<int>(
              std::lround(py + static_cast<double>(x - px) * dy / dx));
        } else {
          const int sy = dy >= 0.0f ? 1 : -1;
          y = py + sense * sy * k;
          x = static_cast<int>(
              std::lround(px + static_cast<double>(y - py) * dx / dy));
        }
        if (x < 0 || y < 0 || x >= w || y >= h) break;
        bool found = false;
        static constexpr int kOffsets[3] = {0, 1, -1};
        for (const int off : kOffsets) {
          const int xx = x_major ? x : x + off;
          const int yy = x_major ? y + off : y;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          if (mask[static_cast<size_t>(yy) * w + xx]) {
            hits.emplace_back(static_cast<int16_t>(xx),
                              static_cast<int16_t>(yy));
            found = true;
            break;
          }
        }
        if (found) {
          gap = 0;
        } else if (++gap > params.max_gap_px) {
          break;
        }
      }
    }

    // Remove the walked pixels from the pool whether or not the segment is
    // kept, un-voting the ones that had voted.
    double su = 0.0, sv = 0.0;
    for (const auto& [hx, hy] : hits) {
      mask[static_cast<size_t>(hy) * w + hx] = 0;
      if (voted[static_cast<size_t>(hy) * w + hx]) {
        voted[static_cast<size_t>(hy) * w + hx] = 0;
        vote(hx, hy, -1, nullptr);
      }
      su += hx;
      sv += hy;
    }

    LineSegment seg;
    seg.support = static_cast<int>(hits.size());
    double best_d2 = -1.0;
    // Endpoints: extreme projections onto the line direction.
    {
      double lo = 1e18, hi = -1e18;
      std::pair<int16_t, int16_t> plo = hits.front(), phi = hits.front();
      for (const auto& hp : hits) {
        const double s = hp.first * dx + hp.second * dy;
        if (s < lo) {
          lo = s;
          plo = hp;
        }
        if (s > hi) {
          hi = s;
          phi = hp;
        }
      }
      seg.u0 = plo.first;
      seg.v0 = plo.second;
      seg.u1 = phi.first;
      seg.v1 = phi.second;
      best_d2 = (hi - lo) * (hi - lo);
    }
    if (best_d2 < static_cast<double>(params.min_length_px) *
                      params.min_length_px)
      continue;

    // Orthogonal regression: normal = eigenvector of the scatter matrix for
    // the smaller eigenvalue.
    const double n = static_cast<double>(hits.size());
    const double mu = su / n;
    const double mv = sv / n;
    double suu = 0.0, svv = 0.0, suv = 0.0;
    for (const auto& [hx, hy] : hits) {
      suu += (hx - mu) * (hx - mu);
      svv += (hy - mv) * (hy - mv);
      suv += (hx - mu) * (hy - mv);
    }
    const double tr = suu + svv;
    const double det = suu * svv - suv * suv;
    const double lam = 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    // (suu - lam) nx + suv ny = 0.
    double nx = suv;
    double ny = lam - suu;
    const double nn = std::hypot(nx, ny);
    if (nn < 1e-12) {
      nx = tcos[best_theta];
      ny = tsin[best_theta];
    } else {
      nx /= nn;
      ny /= nn;
    }
    seg.nx = nx;
    seg.ny = ny;
    seg.c = nx * mu + ny * mv;
    out.push_back(seg);
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const LineSegment& a, const LineSegment& b) {
                     if (a.support != b.support) return a.support > b.support;
                     if (a.u0 != b.u0) return a.u0 < b.u0;
                     return a.v0 < b.v0;
                   });
  return out;
}

// Converts a fitted segment to the normalized (rho, theta) convention. A
// pixel line a u + b v = c becomes (a fx) x + (b fy) y = c - a cx - b cy in
// normalized coordinates.
inline HoughLine segment_to_hough(const LineSegment& seg,
                                  const CameraIntrinsics& intr) {
  const double a = seg.nx * intr.fx;
  const double b = seg.ny * intr.fy;
  const double cc = seg.c - seg.nx * intr.cx - seg.ny * intr.cy;
  const double norm = std::hypot(a, b);
  HoughLine line;
  line.theta = std::atan2(b, a);
  line.rho = cc / norm;
  return normalize_hough(line);
}

struct ScoredLine {
  HoughLine line;
  int support = 0;
};

// Detected lines split by slope class, plus the selection rules the tracker
// uses: image v grows downward, so the topmost horizontal line is the one
// with the smallest rho sin(theta), and the leftmost vertical line has the
// smallest rho cos(theta).
struct DetectedLines {
  std::vector<ScoredLine> horizontal;
  std::vector<ScoredLine> vertical;

  std::optional<ScoredLine> top_horizontal() const {
    std::optional<ScoredLine> best;
    for (const ScoredLine& s : horizontal)
      if (!best || s.line.rho * std::sin(s.line.theta) <
                       best->line.rho * std::sin(best->line.theta))
        best = s;
    return best;
  }
  std::optional<ScoredLine> first_vertical() const {
    std::optional<ScoredLine> best;
    for (const ScoredLine& s : vertical)
      if (!best || s.line.rho * std::cos(s.line.theta) <
                       best->line.rho * std::cos(best->line.theta))
        best = s;
    return best;
  }
};

// Support-weighted merge of near-duplicate lines. Candidates are compared in
// the representation closest to the anchor so the theta = 0 wrap does not
// defeat the tolerance.
inline std::vector<ScoredLine> merge_duplicates(std::vector<ScoredLine> lines,
                                                double rho_tol,
                                                double theta_tol) {
  std::stable_sort(lines.begin(), lines.end(),
                   [](const ScoredLine& a, const ScoredLine& b) {
                     return a.support > b.support;
                   });
  std::vector<ScoredLine> out;
  std::vector<bool> used(lines.size(), false);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (used[i]) continue;
    double wsum = lines[i].support;
    double rho = lines[i].line.rho * wsum;
    double theta = lines[i].line.theta * wsum;
    int support = lines[i].support;
    for (size_t j = i + 1; j < lines.size(); ++j) {
      if (used[j]) continue;
      const HoughLine rep =
          closest_representation(lines[j].line, lines[i].line);
      if (std::abs(rep.rho - lines[i].line.rho) < rho_tol &&
          std::abs(rep.theta - lines[i].line.theta) < theta_tol) {
        used[j] = true;
        const double wj = lines[j].support;
        rho += rep.rho * wj;
        theta += rep.theta * wj;
        wsum += wj;
        support += lines[j].support;
      }
    }
    ScoredLine merged;
    merged.line = normalize_hough({rho / wsum, theta / wsum});
    merged.support = support;
    out.push_back(merged);
  }
  return out;
}

enum class TrackMode { kLateral, kClimb };

struct TrackedFeatures {
  int n = 0;
  bool has_horizontal = false;
  bool has_vertical = false;
  HoughLine horizontal;
  HoughLine vertical;
  bool reacquired = false;  // an association jumped beyond the gate
};

// Frame-to-frame association of the tracked lines. Candidates are matched to
// the previous frame's feature by nearest (rho, theta) distance under a
// gate. A frame with no candidate inside the gate coasts (the feature drops
// out for that frame but the track memory survives), so a nearby newcomer,
// e.g. the edge of paint laid down this pass, can never steal an alive
// track. The selection rule (topmost horizontal, leftmost vertical) applies
// only when there is no track to continue, which is what reset() arranges
// on purpose at the start of a climb.
class FeatureTracker {
 public:
  explicit FeatureTracker(const CameraIntrinsics& intr) : fx_(intr.fx) {}

  TrackedFeatures track(const DetectedLines& lines, TrackMode mode) {
    TrackedFeatures out;
    bool jumped_h = false;
    bool jumped_v = false;
    std::optional<HoughLine> h = associate(lines.horizontal, prev_h_,
                                           lines.top_horizontal(), &jumped_h);
    std::optional<HoughLine> v = associate(lines.vertical, prev_v_,
                                           lines.first_vertical(), &jumped_v);
    out.reacquired = jumped_h || jumped_v;
    if (h) {
      out.has_horizontal = true;
      out.horizontal = *h;
      prev_h_ = *h;
    }
    if (v) {
      out.has_vertical = true;
      out.vertical = *v;
      prev_v_ = *v;
    }
    if (mode == TrackMode::kLateral) {
      out.n = out.has_horizontal ? 1 + (out.has_vertical ? 1 : 0) : 0;
    } else {
      // Climb steers on the vertical line; a lone horizontal line still
      // counts so the controller is not blinded mid-switch.
      out.n = out.has_vertical ? 1 + (out.has_horizontal ? 1 : 0)
                               : (out.has_horizontal ? 1 : 0);
    }
    return out;
  }

  void reset() {
    prev_h_.reset();
    prev_v_.reset();
  }

 private:
  std::optional<HoughLine> associate(const std::vector<ScoredLine>& cands,
                                     const std::optional<HoughLine>& prev,
                                     const std::optional<ScoredLine>& fallback,
                                     bool* jumped) {
    *jumped = false;
    if (cands.empty()) return std::nullopt;
    if (prev) {
      double best = 1.0;
      std::optional<HoughLine> pick;
      for (const ScoredLine& s : cands) {
        const HoughLine rep = closest_representation(s.line, *prev);
        const double d =
            std::hypot((rep.rho - prev->rho) * fx_ / gate_rho_px_,
                       (rep.theta - prev->theta) / gate_theta_);
        if (d <= best) {
          best = d;
          pick = rep;
        }
      }
      if (pick) return pick;
      *jumped = true;
    }
    return fallback->line;
  }

  double fx_;
  double gate_rho_px_ = 30.0;
  double gate_theta_ = 10.0 * M_PI / 180.0;
  std::optional<HoughLine> prev_h_;
  std::optional<HoughLine> prev_v_;
};

struct DetectParams {
  BboxParams bbox;
  double canny_low = 40.0;
  double canny_high = 80.0;
  HoughParams hough;
  double slope_gate_deg = 15.0;
  double merge_rho_px = 5.0;    // full-resolution pixel equivalents
  double merge_theta_deg = 3.0;
  int roi_growth_px = 48;       // processing margin around the previous box
  // Metric width of the depth gradient baseline. Keeps normal noise roughly
  // constant across the working depth range instead of growing as fx/z.
  double normal_baseline_m = 0.016;
};

struct FrameAnalysis {
  bool surface_found = false;
  BoundingBox bbox;  // downsampled-grid pixel coordinates
  DetectedLines lines;
  double wall_distance = 0.0;  // mean valid depth inside the box, m
  bool wall_distance_valid = false;
  Vec3 surface_normal_cam = Vec3(0, 0, 1);
  bool surface_normal_valid = false;
};

// Per-frame detection pipeline. Everything runs on the 2x downsampled grid:
// the depth path (median filter, normals, box search) as well as the edge
// and line path, restricted to the tracked region grown by a margin. Lines
// come out in normalized units, so downstream consumers never see the
// downsampling.
class VisionPipeline {
 public:
  VisionPipeline(const CameraIntrinsics& intr, const DetectParams& params,
                 uint64_t seed)
      : intr_(intr), ds_(downsampled(intr)), params_(params), rng_(seed) {}

  const CameraIntrinsics& grid() const { return ds_; }

  void reset() { prev_box_.reset(); }

  FrameAnalysis process(const GrayImage& gray, const DepthImage& depth) {
    FrameAnalysis out;
    const GrayImage gray_ds = downsample2(gray);
    const DepthImage depth_ds = downsample2_depth(depth);
    const int w = ds_.width;
    const int h = ds_.height;

    const BoundingBox roi =
        prev_box_ ? prev_box_->grown(params_.roi_growth_px, w, h)
                  : BoundingBox::full(w, h);
    // The filter, normal and smoothing stages evaluate on demand: the region
    // search and the statistics below sample a few thousand pixels, far
    // fewer than the processing region contains.
    const internal::LazyFields fields(depth_ds, ds_, params_.normal_baseline_m,
                                      roi, field_memo_);

    int seed_u = prev_box_ ? prev_box_->center_u() : w / 2;
    int seed_v = prev_box_ ? prev_box_->center_v() : h / 2;
    std::optional<BoundingBox> prev = prev_box_;
    if (!valid_normal(fields, seed_u, seed_v)) {
      const auto found = find_seed(fields, roi);
      if (!found) {
        prev_box_.reset();
        return out;
      }
      seed_u = found->first;
      seed_v = found->second;
      prev.reset();  // the stored center is stale, do not re-seed from it
    }

    BboxParams bp = params_.bbox;
    bp.depth_sigma = ds_.sigma_d;
    BoundingBox box;
    try {
      box = internal::march_bbox(fields, seed_u, seed_v, prev, bp);
    } catch (const SeedInvalid&) {
      prev_box_.reset();
      return out;
    }
    if (box.area() < 100) {
      prev_box_.reset();
      return out;
    }
    prev_box_ = box;
    out.bbox = box;
    out.surface_found = true;

    // Mean depth and normal over the box feed the distance blend and the
    // yaw alignment objective. A coarse lattice is plenty: a few hundred
    // samples pin both means far below the accuracy anything downstream
    // needs, and the unsmoothed normals average out in the sum.
    double dsum = 0.0;
    Vec3 nsum = Vec3::Zero();
    int dcount = 0, ncount = 0, lattice = 0;
    constexpr int kStatStride = 6;
    for (int v = box.v_min; v <= box.v_max; v += kStatStride)
      for (int u = box.u_min; u <= box.u_max; u += kStatStride) {
        ++lattice;
        const double d = fields.filtered_at(u, v);
        if (depth_valid(d)) {
          dsum += d;
          ++dcount;
        }
        const Eigen::Vector3f n = fields.raw_normal_at(u, v);
        if (n.squaredNorm() > 0.25) {
          nsum += n.cast<double>();
          ++ncount;
        }
      }
    if (dcount > lattice / 5) {
      out.wall_distance = dsum / dcount;
      out.wall_distance_valid = true;
    }
    if (ncount > lattice / 5 && nsum.norm() > 0.5) {
      out.surface_normal_cam = nsum.normalized();
      out.surface_normal_valid = true;
    }

    const Image<uint8_t> edges =
        canny(gray_ds, params_.canny_low, params_.canny_high, box);
    const std::vector<LineSegment> segs =
        hough_segments(edges, params_.hough, rng_);

    const double slope_gate = params_.slope_gate_deg * M_PI / 180.0;
    for (const LineSegment& seg : segs) {
      const HoughLine line = segment_to_hough(seg, ds_);
      if (std::abs(line.theta - M_PI / 2.0) < slope_gate)
        out.lines.horizontal.push_back({line, seg.support});
      else if (std::min(line.theta, M_PI - line.theta) < slope_gate)
        out.lines.vertical.push_back({line, seg.support});
    }
    const double rho_tol = params_.merge_rho_px / intr_.fx;
    const double theta_tol = params_.merge_theta_deg * M_PI / 180.0;
    out.lines.horizontal =
        merge_duplicates(std::move(out.lines.horizontal), rho_tol, theta_tol);
    out.lines.vertical =
        merge_duplicates(std::move(out.lines.vertical), rho_tol, theta_tol);
    return out;
  }

 private:
  static bool valid_normal(const internal::LazyFields& f, int u, int v) {
    return f.inside(u, v) && f.smooth_at(u, v).squaredNorm() > 0.25;
  }

  // Nearest valid pixel on a coarse ring scan, used when the usual seed has
  // no surface under it.
  static std::optional<std::pair<int, int>> find_seed(
      const internal::LazyFields& f, const BoundingBox& roi) {
    const int cu = (roi.u_min + roi.u_max) / 2;
    const int cv = (roi.v_min + roi.v_max) / 2;
    const int rmax = std::max(roi.width(), roi.height()) / 2;
    for (int r = 4; r <= rmax; r += 4) {
      for (int t = 0; t < 16; ++t) {
        const double a = 2.0 * M_PI * t / 16.0;
        const int u = cu + static_cast<int>(std::lround(r * std::cos(a)));
        const int v = cv + static_cast<int>(std::lround(r * std::sin(a)));
        if (roi.contains(u, v) && valid_normal(f, u, v))
          return std::make_pair(u, v);
      }
    }
    return std::nullopt;
  }

  CameraIntrinsics intr_;
  CameraIntrinsics ds_;
  DetectParams params_;
  std::mt19937_64 rng_;
  std::optional<BoundingBox> prev_box_;
  internal::LazyFields::Memo field_memo_;
};

}  // namespace hexpaint

#endif  // HEXPAINT_VISION_HPP_
