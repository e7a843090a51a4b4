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

#include <random>

#include "hexpaint/geometry.hpp"

namespace hexpaint {
namespace {

TEST_CASE("skew matches the cross product") {
  CHECK((skew(Vec3(1, 0, 0)) * Vec3(0, 1, 0) - Vec3(0, 0, 1)).norm() ==
        doctest::Approx(0.0));
  CHECK(skew(Vec3::Zero()).norm() == doctest::Approx(0.0));
  const Vec3 v(2, -1, 3);
  CHECK((skew(v) * v).norm() == doctest::Approx(0.0));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const Vec3 a(u(rng), u(rng), u(rng));
    const Vec3 b(u(rng), u(rng), u(rng));
    CHECK((skew(a) * b - a.cross(b)).norm() < 1e-12);
    CHECK((skew(a) + skew(a).transpose()).norm() < 1e-12);
  }
}

TEST_CASE("skew of a unit vector cubes to its negative") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    Vec3 v(n(rng), n(rng), n(rng));
    v.normalize();
    const Mat3 s = skew(v);
    CHECK((s * s * s + s).norm() < 1e-9);
  }
}

TEST_CASE("rotation_from_rpy basics") {
  CHECK((rotation_from_rpy(0, 0, 0).matrix() - Mat3::Identity()).norm() <
        1e-12);
  // A quarter turn about +z (down in NED) carries x into y.
  const Rotation r = rotation_from_rpy(0, 0, M_PI / 2);
  CHECK((r * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("rpy round-trip on the principal branch") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> half(-M_PI / 2 + 0.01, M_PI / 2 - 0.01);
  std::uniform_real_distribution<double> full(-M_PI + 0.01, M_PI - 0.01);
  for (int i = 0; i < 200; ++i) {
    const double roll = half(rng);
    const double pitch = half(rng);
    const double yaw = full(rng);
    const Vec3 back = rotation_from_rpy(roll, pitch, yaw).to_rpy();
    CHECK(std::abs(back.x() - roll) < 1e-9);
    CHECK(std::abs(back.y() - pitch) < 1e-9);
    CHECK(std::abs(back.z() - yaw) < 1e-9);
  }
}

TEST_CASE("twist transform of the identity pose is the identity") {
  const TwistTransform t = twist_transform(Rotation::identity(), Vec3::Zero());
  CHECK((t.matrix() - Mat6::Identity()).norm() < 1e-12);
}

TEST_CASE("twist transform applies the lever arm") {
  // Pure rotation about y seen from a frame offset one meter along z: the
  // offset point sweeps with velocity Omega x p = [1, 0, 0].
  const TwistTransform t =
      twist_transform(Rotation::identity(), Vec3(0, 0, 1));
  Twist in;
  in.linear = Vec3::Zero();
  in.angular = Vec3(0, 1, 0);
  const Twist out = t.apply(in, FrameId::Camera);
  CHECK((out.linear - Vec3(1, 0, 0)).norm() < 1e-12);
  CHECK((out.angular - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("twist transform block structure") {
  const Rotation r = rotation_from_rpy(0.3, -0.2, 1.1);
  const Vec3 p(0.4, -0.7, 0.2);
  const Mat6 t = twist_transform(r, p).matrix();
  CHECK((t.topLeftCorner<3, 3>() - r.matrix()).norm() < 1e-12);
  CHECK((t.bottomRightCorner<3, 3>() - r.matrix()).norm() < 1e-12);
  CHECK(t.bottomLeftCorner<3, 3>().norm() < 1e-12);
  CHECK((t.topRightCorner<3, 3>() - skew(r * (-p)) * r.matrix()).norm() <
        1e-12);
  CHECK(std::abs(t.determinant() - 1.0) < 1e-9);
}

TEST_CASE("twist transforms compose like poses") {
  // Frame chain a -> b -> c. p_ab is b's origin in a, p_bc is c's origin in b.
  const Rotation r_ab = rotation_from_rpy(0.2, 0.1, -0.5);
  const Rotation r_bc = rotation_from_rpy(-0.4, 0.3, 0.9);
  const Vec3 p_ab(0.1, 0.2, -0.3);
  const Vec3 p_bc(-0.2, 0.5, 0.05);

  const TwistTransform t_ab = twist_transform(r_ab, p_ab);
  const TwistTransform t_bc = twist_transform(r_bc, p_bc);
  // c's origin expressed in a, and the composed rotation a -> c.
  const Vec3 p_ac = p_ab + r_ab.transpose() * p_bc;
  const TwistTransform t_ac = twist_transform(r_bc * r_ab, p_ac);

  CHECK((t_bc.matrix() * t_ab.matrix() - t_ac.matrix()).norm() < 1e-9);
}

TEST_CASE("long rotation chains stay orthonormal with renormalization") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Rotation r = Rotation::identity();
  for (int i = 0; i < 100; ++i) {
    r = rotation_from_rpy(u(rng), u(rng), u(rng)) * r;
    r = r.orthonormalized();
    CHECK(r.is_valid(1e-9));
  }
}

TEST_CASE("orthonormalized repairs a drifted matrix") {
  Mat3 drifted = rotation_from_rpy(0.4, 0.2, -0.8).matrix();
  drifted(0, 1) += 1e-4;
  drifted(2, 0) -= 2e-4;
  const Rotation fixed = Rotation(drifted).orthonormalized();
  CHECK(fixed.is_valid(1e-9));
  CHECK((fixed.matrix() - drifted).norm() < 1e-3);
}

}  // namespace
}  // namespace hexpaint
