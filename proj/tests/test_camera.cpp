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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "hexpaint/camera.hpp"
#include "hexpaint/image.hpp"
#include "hexpaint/surface.hpp"

namespace hexpaint {
namespace {

// Camera looking straight at the wall: optical axis along +x world, image x
// along +y world, image y along +z world (down).
Rotation wall_facing_camera() {
  Mat3 r;
  r.col(0) = Vec3(0, 1, 0);
  r.col(1) = Vec3(0, 0, 1);
  r.col(2) = Vec3(1, 0, 0);
  return Rotation(r);
}

CameraIntrinsics clean_intrinsics() {
  CameraIntrinsics intr;
  intr.sigma_d = 0.0;
  return intr;
}

TEST_CASE("fronto-parallel render has constant depth") {
  SurfaceModel surface(Vec3::Zero(), Vec3(-1, 0, 0), 6.0, 4.0);
  const CameraIntrinsics intr = clean_intrinsics();
  CameraPose pose;
  pose.position = Vec3(-0.8, 0, 0);
  pose.R = wall_facing_camera();
  std::mt19937_64 rng(1);

  const RenderResult out = render(pose, surface, intr, rng);
  int valid = 0;
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const double d = out.depth.at(u, v);
      if (!depth_valid(d)) continue;
      ++valid;
      CHECK(d == doctest::Approx(0.8).epsilon(1e-9));
    }
  }
  CHECK(valid == intr.width * intr.height);  // wall fills the view at 0.8 m
}

TEST_CASE("yawed camera produces a monotone depth ramp") {
  SurfaceModel surface(Vec3::Zero(), Vec3(-1, 0, 0), 20.0, 10.0);
  const CameraIntrinsics intr = clean_intrinsics();
  CameraPose pose;
  pose.position = Vec3(-1.0, 0, 0);
  const double yaw = 10.0 * M_PI / 180.0;
  pose.R = Rotation(Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix() *
                    wall_facing_camera().matrix());
  std::mt19937_64 rng(1);

  const RenderResult out = render(pose, surface, intr, rng);
  const int row = intr.height / 2;
  // Positive yaw swings the optical axis toward +y; the +y side of the image
  // (larger u) looks farther along the wall, under the analytic plane-depth
  // formula d(u) = d0 / (cos(yaw) - xn sin(yaw)) which increases with u.
  double prev = 0.0;
  bool first = true;
  for (int u = 0; u < intr.width; u += 16) {
    const double d = out.depth.at(u, row);
    REQUIRE(depth_valid(d));
    const double xn = (u - intr.cx) / intr.fx;
    const double expected = 1.0 / (std::cos(yaw) - xn * std::sin(yaw));
    CHECK(d == doctest::Approx(expected).epsilon(1e-9));
    if (!first) CHECK(d > prev);
    prev = d;
    first = false;
  }
}

TEST_CASE("valid depth pixels satisfy the plane equation") {
  SurfaceModel surface(Vec3::Zero(), Vec3(-1, 0, 0), 6.0, 4.0);
  const CameraIntrinsics intr = clean_intrinsics();
  CameraPose pose;
  pose.position = Vec3(-0.7, 0.3, -0.2);
  pose.R = Rotation(rotation_from_rpy(0.05, -0.08, 0.1).matrix() *
                    wall_facing_camera().matrix());
  std::mt19937_64 rng(1);

  const RenderResult out = render(pose, surface, intr, rng);
  for (int v = 0; v < intr.height; v += 7) {
    for (int u = 0; u < intr.width; u += 7) {
      const double d = out.depth.at(u, v);
      if (!depth_valid(d)) continue;
      const Vec2 xn = intr.to_normalized(u, v);
      const Vec3 p_cam(xn.x() * d, xn.y() * d, d);
      const Vec3 p_world = pose.position + pose.R * p_cam;
      CHECK(std::abs(surface.signed_distance(p_world)) < 1e-6);
    }
  }
}

TEST_CASE("rendered stripe band matches its projection") {
  SurfaceModel surface(Vec3::Zero(), Vec3(-1, 0, 0), 6.0, 4.0);
  // Stripe centered 0.1 m above the wall center (v is down-positive).
  surface.deposit_paint(Vec3(0, -1.0, -0.1), 0.05);
  surface.deposit_paint(Vec3(0, 1.0, -0.1), 0.05);
  for (double s = -1.0; s <= 1.0; s += 0.005)
    surface.deposit_paint(Vec3(0, s, -0.1), 0.05);

  const CameraIntrinsics intr = clean_intrinsics();
  CameraPose pose;
  pose.position = Vec3(-0.5, 0, 0);
  pose.R = wall_facing_camera();
  std::mt19937_64 rng(1);
  const RenderResult out = render(pose, surface, intr, rng);

  // Expected pixel rows of the stripe edges: y_world = -0.1 +- 0.05 maps to
  // yn = z/d and v = fy*yn + cy.
  const double v_top = intr.fy * (-0.15 / 0.5) + intr.cy;
  const double v_bot = intr.fy * (-0.05 / 0.5) + intr.cy;
  const int u_mid = intr.width / 2;
  int first_dark = -1, last_dark = -1;
  for (int v = 0; v < intr.height; ++v) {
    const bool dark = out.gray.at(u_mid, v) < 150;
    if (dark && first_dark < 0) first_dark = v;
    if (dark) last_dark = v;
  }
  REQUIRE(first_dark >= 0);
  CHECK(std::abs(first_dark - v_top) <= 1.0);
  CHECK(std::abs(last_dark - v_bot) <= 1.0);
}

TEST_CASE("camera clear of the wall throws") {
  SurfaceModel surface(Vec3::Zero(), Vec3(-1, 0, 0), 6.0, 4.0);
  const CameraIntrinsics intr = clean_intrinsics();
  CameraPose pose;
  pose.position = Vec3(-0.8, 0, 0);
  pose.R = Rotation(
      Eigen::AngleAxisd(M_PI, Vec3::UnitZ()).toRotationMatrix() *
      wall_facing_camera().matrix());  // facing away
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(render(pose, surface, intr, rng), NoSurfaceInView);
}

TEST_CASE("project_line matches the closed forms") {
  const CameraIntrinsics intr = clean_intrinsics();
  CameraPose pose;
  pose.position = Vec3(-0.4, 0, 0);
  pose.R = wall_facing_camera();

  SUBCASE("horizontal line below the optical axis") {
    const double l1 = 0.12, d1 = 0.4;
    // World line on the wall at z = +l1 (down), direction +y.
    const HoughLine line =
        project_line(Vec3(0, 0, l1), Vec3(0, 1, 0), pose, intr);
    CHECK(line.theta == doctest::Approx(M_PI / 2).epsilon(1e-12));
    CHECK(line.rho == doctest::Approx(l1 / d1).epsilon(1e-12));
  }

  SUBCASE("vertical line right of the optical axis") {
    const double l2 = 0.2, d2 = 0.4;
    const HoughLine line =
        project_line(Vec3(0, l2, 0), Vec3(0, 0, 1), pose, intr);
    CHECK(line.theta == doctest::Approx(0.0));
    CHECK(line.rho == doctest::Approx(l2 / d2).epsilon(1e-12));
  }

  SUBCASE("line through the principal point has zero offset") {
    const HoughLine line =
        project_line(Vec3(0, 0, 0), Vec3(0, 1, 0), pose, intr);
    CHECK(std::abs(line.rho) < 1e-12);
  }

  SUBCASE("line through the optical center is degenerate") {
    CHECK_THROWS_AS(
        project_line(Vec3(0, 0, 0), Vec3(1, 0, 0), pose, intr),
        DegenerateProjection);
  }
}

TEST_CASE("hough normalization and branch unwrapping") {
  const HoughLine wrapped = normalize_hough(HoughLine{0.3, -0.1});
  CHECK(wrapped.theta == doctest::Approx(M_PI - 0.1));
  CHECK(wrapped.rho == doctest::Approx(-0.3));

  // A vertical-ish line just past the wrap should unwrap next to the
  // reference instead of jumping by pi.
  const HoughLine ref{0.25, 0.0};
  const HoughLine measured{-0.25, M_PI - 0.02};
  const HoughLine near = closest_representation(measured, ref);
  CHECK(near.theta == doctest::Approx(-0.02));
  CHECK(near.rho == doctest::Approx(0.25));
}

TEST_CASE("feature perturbation statistics") {
  SUBCASE("zero noise is the identity") {
    std::vector<HoughLine> lines = {{0.3, 1.1}, {-0.2, 0.1}};
    std::mt19937_64 rng(5);
    perturb_features(lines, 0.0, rng);
    CHECK(lines[0].rho == 0.3);
    CHECK(lines[1].theta == 0.1);
  }

  SUBCASE("rho noise has the requested scale") {
    std::mt19937_64 rng(99);
    const double sigma = 0.02;
    double sum = 0.0, sum_sq = 0.0;
    const int samples = 10000;
    for (int i = 0; i < samples; ++i) {
      std::vector<HoughLine> lines = {{0.5, 1.0}};
      perturb_features(lines, sigma, rng);
      const double e = lines[0].rho - 0.5;
      sum += e;
      sum_sq += e * e;
    }
    const double mean = sum / samples;
    const double stddev = std::sqrt(sum_sq / samples - mean * mean);
    CHECK(stddev > sigma * 0.97);
    CHECK(stddev < sigma * 1.03);
  }

  SUBCASE("sweep magnitudes are accepted") {
    for (const double sigma : {0.02, 0.08, 0.12}) {
      std::vector<HoughLine> lines = {{0.1, 0.2}};
      std::mt19937_64 rng(3);
      perturb_features(lines, sigma, rng);
      CHECK(std::isfinite(lines[0].rho));
    }
  }
}

TEST_CASE("paint deposition and coverage") {
  SurfaceModel surface(Vec3::Zero(), Vec3(-1, 0, 0), 6.0, 4.0);

  SUBCASE("a lateral sweep leaves one stripe") {
    for (int i = 0; i <= 500; ++i)
      surface.deposit_paint(surface.to_world(-1.0 + 0.004 * i, 0.2), 0.05);
    CHECK(surface.stripes().size() == 1);
    CHECK(surface.stripes()[0].s_min == doctest::Approx(-1.01));
    CHECK(surface.stripes()[0].s_max == doctest::Approx(1.01));
  }

  SUBCASE("overlapping passes at the same height merge") {
    for (double s = 0.0; s <= 1.0; s += 0.004)
      surface.deposit_paint(surface.to_world(s, 0.2), 0.05);
    for (double s = 1.0; s >= -0.5; s -= 0.004)
      surface.deposit_paint(surface.to_world(s, 0.2), 0.05);
    CHECK(surface.stripes().size() == 1);
  }

  SUBCASE("coverage is monotone and correct for a known band") {
    // Step below twice the stamp half-length so consecutive stamps fuse.
    double prev = 0.0;
    for (int i = 0; i <= 200; ++i) {
      surface.deposit_paint(surface.to_world(-1.0 + 0.01 * i, 0.0), 0.05);
      const double c = surface.coverage(-0.05, 0.05, -1.0, 1.0);
      CHECK(c >= prev - 1e-12);
      prev = c;
    }
    CHECK(prev == doctest::Approx(1.0).epsilon(0.02));

    // Two stacked half-overlapping stripes must not double count.
    SurfaceModel two(Vec3::Zero(), Vec3(-1, 0, 0), 6.0, 4.0);
    for (double s = -1.0; s <= 1.0; s += 0.004) {
      two.deposit_paint(two.to_world(s, 0.0), 0.05);
      two.deposit_paint(two.to_world(s, 0.04), 0.05);
    }
    const double c = two.coverage(-0.05, 0.09, -1.0, 1.0);
    CHECK(c == doctest::Approx(1.0).epsilon(0.02));
  }

  SUBCASE("painted area never shrinks") {
    double prev = 0.0;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      surface.deposit_paint(surface.to_world(u(rng), 0.3 * u(rng)), 0.05);
      const double area = surface.painted_area();
      CHECK(area >= prev - 1e-12);
      prev = area;
    }
  }
}

TEST_CASE("pgm round trip is bit exact") {
  GrayImage img(37, 21);
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> u(0, 255);
  for (size_t i = 0; i < img.size(); ++i)
    img.data()[i] = static_cast<uint8_t>(u(rng));

  const std::string path = "/tmp/hexpaint_test_roundtrip.pgm";
  write_pgm(path, img);
  const GrayImage back = read_pgm(path);
  REQUIRE(back.width() == img.width());
  REQUIRE(back.height() == img.height());
  for (size_t i = 0; i < img.size(); ++i)
    CHECK(back.data()[i] == img.data()[i]);

  write_pgm(path, img);
  const GrayImage again = read_pgm(path);
  CHECK(std::equal(img.data(), img.data() + img.size(), again.data()));
  std::remove(path.c_str());
}

TEST_CASE("render is deterministic for a fixed seed") {
  SurfaceModel surface(Vec3::Zero(), Vec3(-1, 0, 0), 6.0, 4.0);
  CameraIntrinsics intr;
  intr.sigma_d = 0.002;
  CameraPose pose;
  pose.position = Vec3(-0.6, 0.1, 0.05);
  pose.R = wall_facing_camera();

  std::mt19937_64 rng_a(77), rng_b(77);
  const RenderResult a = render(pose, surface, intr, rng_a);
  const RenderResult b = render(pose, surface, intr, rng_b);
  CHECK(std::equal(a.gray.data(), a.gray.data() + a.gray.size(),
                   b.gray.data()));
  CHECK(std::equal(a.depth.data(), a.depth.data() + a.depth.size(),
                   b.depth.data()));
}

}  // namespace
}  // namespace hexpaint
