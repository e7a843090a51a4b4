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

#include "hexpaint/camera.hpp"
#include "hexpaint/control.hpp"

namespace hexpaint {
namespace {

// End-effector axes in the body frame: x right (+y_B), y up (-z_B),
// z backward (-x_B). The tool pushes along -z_E = +x_B.
Rotation tool_mount() {
  Mat3 r;
  r.col(0) = Vec3(0, 1, 0);
  r.col(1) = Vec3(0, 0, -1);
  r.col(2) = Vec3(-1, 0, 0);
  return Rotation(r);
}

Rotation wall_facing_camera_world() {
  Mat3 r;
  r.col(0) = Vec3(0, 1, 0);
  r.col(1) = Vec3(0, 0, 1);
  r.col(2) = Vec3(1, 0, 0);
  return Rotation(r);
}

TEST_CASE("contact blending endpoints and continuity") {
  const double d_min = 0.25, d_max = 0.6;
  CHECK(blend_lambda(d_min, d_min, d_max) == 1.0);
  CHECK(blend_lambda(0.0, d_min, d_max) == 1.0);
  CHECK(blend_lambda((d_min + d_max) / 2, d_min, d_max) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(blend_lambda(d_max + 0.1, d_min, d_max) == 0.0);
  CHECK(blend_lambda(d_max, d_min, d_max) == doctest::Approx(0.0));

  for (const double d : {d_min, d_max}) {
    const double eps = 1e-9;
    CHECK(std::abs(blend_lambda(d + eps, d_min, d_max) -
                   blend_lambda(d - eps, d_min, d_max)) < 1e-6);
  }
  double prev = 1.0;
  for (double d = 0.0; d < 0.8; d += 1e-3) {
    const double cur = blend_lambda(d, d_min, d_max);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("selection matrix structure") {
  SUBCASE("zero lambda removes the force channel") {
    CHECK(selection_matrix(tool_mount(), 0.0).norm() == 0.0);
  }

  SUBCASE("identity mount selects the (3,3) entry") {
    const Mat6 sel = selection_matrix(Rotation::identity(), 1.0);
    Mat6 expect = Mat6::Zero();
    expect(2, 2) = 1.0;
    CHECK((sel - expect).norm() < 1e-12);
  }

  SUBCASE("rank is at most one") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 20; ++i) {
      const Rotation r = rotation_from_rpy(u(rng), u(rng), u(rng));
      const Mat6 sel = selection_matrix(r, 0.7);
      Eigen::JacobiSVD<MatX> svd(sel.topLeftCorner<3, 3>());
      CHECK(svd.singularValues()[1] < 1e-12);
    }
  }

  SUBCASE("tool mount selects the body pushing axis") {
    const Mat6 sel = selection_matrix(tool_mount(), 1.0);
    Vec6 f = Vec6::Zero();
    f[0] = 5.0;  // +x body
    CHECK((sel * f - f).norm() < 1e-12);
    Vec6 lat = Vec6::Zero();
    lat[1] = 2.0;
    CHECK((sel * lat).norm() < 1e-12);
  }
}

TEST_CASE("impedance force law") {
  HybridGains gains;

  SUBCASE("all errors zero returns the setpoint") {
    const ImpedanceResult r =
        impedance_force(gains.f_ref, 0.0, 0.0, 0.0, gains, 0.0);
    CHECK(r.f_f == doctest::Approx(5.0));
  }

  SUBCASE("displacement term evaluates literally") {
    HybridGains g = gains;
    g.k_sp = 100.0;
    g.k_sd = 0.0;
    g.k_fp = 0.0;
    g.k_fi = 0.0;
    const ImpedanceResult r =
        impedance_force(g.f_ref, 0.01, 0.0, 0.0, g, 0.0);
    CHECK(r.f_f == doctest::Approx(g.f_ref + 1.0));
  }

  SUBCASE("excess measured force lowers the command") {
    const ImpedanceResult r =
        impedance_force(gains.f_ref + 2.0, 0.0, 0.0, 0.0, gains, 0.0);
    CHECK(r.f_f < gains.f_ref);
  }

  SUBCASE("integral clamps at the windup limit") {
    double integ = 0.0;
    for (int i = 0; i < 100000; ++i) {
      const ImpedanceResult r =
          impedance_force(0.0, 0.0, 0.0, integ, gains, 1e-2);
      integ = r.integral;
    }
    CHECK(integ == doctest::Approx(gains.force_integral_limit));
  }
}

TEST_CASE("line interaction matrix at the canonical configurations") {
  const double l1 = 0.10, d1 = 0.5;
  const double rho1 = l1 / d1;

  SUBCASE("horizontal line") {
    const auto l = line_interaction(
        rho1, M_PI / 2, PlanePair::horizontal_line(l1, d1));
    Eigen::Matrix<double, 2, 6> expect;
    expect.row(0) << 0, -1.0 / d1, rho1 / d1, 1 + rho1 * rho1, 0, 0;
    expect.row(1) << 0, 0, 0, 0, -rho1, -1;
    CHECK((l - expect).norm() < 1e-12);
  }

  SUBCASE("vertical line") {
    const double l2 = -0.15, d2 = 0.5;
    const double rho2 = l2 / d2;
    const auto l =
        line_interaction(rho2, 0.0, PlanePair::vertical_line(l2, d2));
    Eigen::Matrix<double, 2, 6> expect;
    expect.row(0) << -1.0 / d2, 0, rho2 / d2, 0, -(1 + rho2 * rho2), 0;
    expect.row(1) << 0, 0, 0, -rho2, 0, -1;
    CHECK((l - expect).norm() < 1e-12);
  }

  SUBCASE("degenerate plane is rejected") {
    PlanePair p;
    p.plane_a << 0, 1, 0, -0.1;
    p.plane_b << 1, 0, 0, 0;  // D = 0
    CHECK_THROWS_AS(line_interaction(0.1, 0.3, p), DegeneratePlane);
  }

  SUBCASE("both planes containing the line give the same matrix") {
    // At the canonical configuration the lateral plane Y - l = 0 must yield
    // the same interaction scalars as the depth plane.
    PlanePair lateral;
    lateral.plane_a << 0, 0, 1, -d1;
    lateral.plane_b << 0, 1, 0, -l1;
    const auto a = line_interaction(
        rho1, M_PI / 2, PlanePair::horizontal_line(l1, d1));
    const auto b = line_interaction(rho1, M_PI / 2, lateral);
    CHECK((a - b).norm() < 1e-9);
  }
}

// Finite-difference oracle: perturb the camera by a small twist and compare
// the projected-feature velocity with L v. project_line is the ground truth.
TEST_CASE("interaction matrix agrees with the projection derivative") {
  const CameraIntrinsics intr;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double dt = 1e-5;

  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const bool horizontal = (trial % 2 == 0);
    const Vec3 p_line(0.0, 0.6 * u(rng), 0.6 * u(rng));
    const Vec3 u_line = horizontal ? Vec3(0, 1, 0) : Vec3(0, 0, 1);

    CameraPose pose;
    pose.position = Vec3(-(0.3 + 0.9 * std::abs(u(rng))), 0.3 * u(rng),
                         0.3 * u(rng));
    pose.R = Rotation(rotation_from_rpy(0.25 * u(rng), 0.25 * u(rng),
                                        0.25 * u(rng)).matrix() *
                      wall_facing_camera_world().matrix());

    HoughLine q0;
    try {
      q0 = project_line(p_line, u_line, pose, intr);
    } catch (const DegenerateProjection&) {
      continue;
    }
    if (std::abs(q0.rho) > 1.5) continue;

    Vec6 twist;
    for (int i = 0; i < 6; ++i) twist[i] = 0.5 * u(rng);

    const auto pose_at = [&](double s) {
      CameraPose moved;
      moved.position = pose.position + pose.R * (twist.head<3>() * s);
      const Vec3 w = twist.tail<3>() * s;
      Mat3 dr = Mat3::Identity();
      if (w.norm() > 0)
        dr = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
      moved.R = Rotation(pose.R.matrix() * dr);
      return moved;
    };

    HoughLine qp, qm;
    try {
      qp = closest_representation(
          project_line(p_line, u_line, pose_at(dt), intr), q0);
      qm = closest_representation(
          project_line(p_line, u_line, pose_at(-dt), intr), q0);
    } catch (const DegenerateProjection&) {
      continue;
    }
    const Vec2 fd((qp.rho - qm.rho) / (2 * dt),
                  (qp.theta - qm.theta) / (2 * dt));

    // The same line expressed in the camera frame feeds the plane pair.
    const Vec3 p_cam = pose.R.transpose() * (p_line - pose.position);
    const Vec3 u_cam = pose.R.transpose() * u_line;
    const auto l = line_interaction(
        q0.rho, q0.theta, PlanePair::from_point_direction(p_cam, u_cam));
    const Vec2 predicted = l * twist;

    const double err = (fd - predicted).norm();
    CHECK(err < 1e-6 + 1e-3 * fd.norm());
    ++checked;
  }
  CHECK(checked > 300);
}

TEST_CASE("stacked interaction and pseudo-inverse") {
  FeatureVector feat;
  feat.n = 2;
  feat.line_offset = {0.10, -0.20};
  feat.line_depth = {0.5, 0.5};
  feat.q_ref = desired_features(2, 0.10, 0.5, -0.20, 0.5);
  feat.q = feat.q_ref;

  SUBCASE("shapes follow the line count") {
    CHECK(stacked_interaction(feat, TwistTransform()).rows() == 4);
    FeatureVector one = feat;
    one.n = 1;
    CHECK(stacked_interaction(one, TwistTransform()).rows() == 2);
  }

  SUBCASE("identity mount leaves the camera-frame matrix") {
    const MatX l = stacked_interaction(feat, TwistTransform());
    const double rho1 = 0.10 / 0.5, rho2 = -0.20 / 0.5;
    MatX expect(4, 6);
    expect.row(0) << 0, -1 / 0.5, rho1 / 0.5, 1 + rho1 * rho1, 0, 0;
    expect.row(1) << 0, 0, 0, 0, -rho1, -1;
    expect.row(2) << -1 / 0.5, 0, rho2 / 0.5, 0, -(1 + rho2 * rho2), 0;
    expect.row(3) << 0, 0, 0, -rho2, 0, -1;
    CHECK((l - expect).norm() < 1e-12);
  }

  SUBCASE("mount transform multiplies on the right") {
    const TwistTransform t =
        twist_transform(rotation_from_rpy(0.1, -0.2, 0.4), Vec3(0.5, 0, 0.1));
    const MatX l = stacked_interaction(feat, t);
    const MatX l_c = stacked_interaction(feat, TwistTransform());
    CHECK((l - l_c * t.matrix()).norm() < 1e-12);
  }

  SUBCASE("undamped pseudo-inverse properties") {
    for (const int n : {1, 2}) {
      FeatureVector f = feat;
      f.n = n;
      const MatX l = stacked_interaction(f, TwistTransform());
      const PinvResult r = damped_pinv(l, 0.0);
      CHECK((l * r.pinv - MatX::Identity(2 * n, 2 * n)).norm() < 1e-9);
      CHECK((l * r.null_proj).norm() < 1e-9);
      CHECK((r.null_proj * r.null_proj - r.null_proj).norm() < 1e-9);
    }
  }
}

TEST_CASE("desired features") {
  CHECK(desired_features(1, 0.0, 0.5)[0] == 0.0);
  const Eigen::Vector4d q1 = desired_features(1, 0.2, 1.0);
  CHECK(q1[0] == doctest::Approx(0.2));
  CHECK(q1[1] == doctest::Approx(M_PI / 2));
  const Eigen::Vector4d q2 = desired_features(2, 0.1, 0.5, -0.3, 0.6);
  CHECK(q2[0] == doctest::Approx(0.2));
  CHECK(q2[1] == doctest::Approx(M_PI / 2));
  CHECK(q2[2] == doctest::Approx(-0.5));
  CHECK(q2[3] == 0.0);
}

TEST_CASE("visual servoing wrench") {
  VehicleParams params;
  RigidState rest;
  const Mat6 m = inertia_terms(rest, params).M;
  HybridGains gains;
  gains.mu_dls = 0.0;
  const TwistTransform t_c_b;  // camera coincident with the body

  FeatureVector feat;
  feat.n = 1;
  feat.line_offset = {0.10, 0.0};
  feat.line_depth = {0.5, 1.0};
  feat.q_ref = desired_features(1, 0.10, 0.5);
  feat.q = feat.q_ref;

  SUBCASE("zero error passes the complementary wrench through the null space") {
    Vec6 tau_p;
    tau_p << 0.1, -0.2, 0.3, 0.05, -0.04, 0.02;
    const IbvsResult r = ibvs_wrench(feat, m, gains, tau_p, t_c_b);
    const MatX l = stacked_interaction(feat, t_c_b);
    const PinvResult p = damped_pinv(l, 0.0);
    CHECK((r.tau_vs - (-m * p.null_proj * tau_p)).norm() < 1e-9);
    CHECK_FALSE(r.degraded);
  }

  SUBCASE("feature error produces a descent direction") {
    feat.q[0] += 0.08;  // measured line below its reference
    const IbvsResult r = ibvs_wrench(feat, m, gains, Vec6::Zero(), t_c_b);
    const MatX l = stacked_interaction(feat, t_c_b, false);
    const VecX e = feat.error().head(2);
    const VecX e_rate = l * (m.inverse() * r.tau_vs);
    CHECK(e.dot(e_rate) < 0.0);
  }

  SUBCASE("no features falls back to the complementary wrench") {
    FeatureVector empty;
    Vec6 tau_p;
    tau_p << 0.5, 0, 0, 0, 0.1, 0;
    const IbvsResult r = ibvs_wrench(empty, m, gains, tau_p, t_c_b);
    CHECK(r.degraded);
    CHECK((r.tau_vs - (-m * tau_p)).norm() < 1e-12);
  }
}

TEST_CASE("complementary wrench") {
  HybridGains gains;

  SUBCASE("all objectives met gives zero") {
    const Vec6 tau_p = complementary_wrench(
        Rotation::identity(), Vec3::Zero(), Vec3(-1, 0, 0), true,
        FlowVelocity{0.2, true}, 0.2, 0.0, gains);
    CHECK(tau_p.norm() < 1e-12);
  }

  SUBCASE("lateral velocity error follows the PI law literally") {
    HybridGains g = gains;
    g.k_xp = 10.0;
    const Vec6 tau_p = complementary_wrench(
        Rotation::identity(), Vec3::Zero(), Vec3(-1, 0, 0), true,
        FlowVelocity{0.0, true}, 0.2, 0.0, g);
    CHECK(tau_p[1] == doctest::Approx(-2.0));
  }

  SUBCASE("roll offset maps to a restoring applied wrench") {
    const double roll = 5.0 * M_PI / 180.0;
    const Vec6 tau_p = complementary_wrench(
        rotation_from_rpy(roll, 0, 0), Vec3::Zero(), Vec3(-1, 0, 0), true,
        FlowVelocity{0.0, false}, 0.0, 0.0, gains);
    CHECK(std::abs(tau_p[3]) > 0.0);
    CHECK(std::abs(tau_p[4]) < 1e-12);
    CHECK(std::abs(tau_p[5]) < 1e-12);

    // Through tau_vs = -M [ .. + P_vs tau_p ] the roll torque must oppose
    // the offset. With no features the projector is the identity.
    VehicleParams params;
    RigidState rest;
    const Mat6 m = inertia_terms(rest, params).M;
    FeatureVector none;
    const IbvsResult r =
        ibvs_wrench(none, m, gains, tau_p, TwistTransform());
    CHECK(r.tau_vs[3] < 0.0);
  }

  SUBCASE("yaw follows the measured wall normal") {
    // Wall normal rotated toward +y in the body frame means the vehicle is
    // yawed left of square; the applied wrench must yaw it right.
    const Vec3 n_body(-std::cos(0.2), std::sin(0.2), 0.0);
    const Vec6 tau_p = complementary_wrench(
        Rotation::identity(), Vec3::Zero(), n_body, true,
        FlowVelocity{0.0, false}, 0.0, 0.0, gains);
    CHECK(tau_p[5] == doctest::Approx(gains.k_yaw_p * 0.2).epsilon(1e-6));
  }

  SUBCASE("invalid flow freezes the proportional lateral term") {
    const Vec6 tau_p = complementary_wrench(
        Rotation::identity(), Vec3::Zero(), Vec3(-1, 0, 0), true,
        FlowVelocity{0.7, false}, 0.2, 0.25, gains);
    CHECK(tau_p[1] == doctest::Approx(gains.k_xi * 0.25));
  }
}

TEST_CASE("hybrid combination") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-2.0, 2.0);

  SUBCASE("zero selection passes motion control through") {
    Vec6 tau_vs, tau_f;
    for (int i = 0; i < 6; ++i) {
      tau_vs[i] = u(rng);
      tau_f[i] = u(rng);
    }
    CHECK((hybrid_combine(tau_vs, tau_f, Mat6::Zero()) - tau_vs).norm() <
          1e-12);
  }

  SUBCASE("full selection swaps the pushing axis to the force command") {
    const Mat6 sel = selection_matrix(tool_mount(), 1.0);
    Vec6 tau_vs, tau_f;
    for (int i = 0; i < 6; ++i) {
      tau_vs[i] = u(rng);
      tau_f[i] = 0.0;
    }
    tau_f[0] = 7.0;
    const Vec6 tau = hybrid_combine(tau_vs, tau_f, sel);
    CHECK(tau[0] == doctest::Approx(7.0));
    for (int i = 1; i < 6; ++i)
      CHECK(tau[i] == doctest::Approx(tau_vs[i]));
  }

  SUBCASE("combination is linear in both arguments") {
    const Mat6 sel = selection_matrix(tool_mount(), 0.4);
    for (int trial = 0; trial < 10; ++trial) {
      Vec6 a, b, f, g;
      for (int i = 0; i < 6; ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
        f[i] = u(rng);
        g[i] = u(rng);
      }
      const Vec6 sum = hybrid_combine(a + b, f + g, sel);
      const Vec6 parts =
          hybrid_combine(a, f, sel) + hybrid_combine(b, g, sel);
      CHECK((sum - parts).norm() < 1e-9);
    }
  }
}

TEST_CASE("control step composes the pipeline") {
  VehicleParams params;
  HybridGains gains;
  const Rotation r_e_b = tool_mount();
  const TwistTransform t_c_b =
      twist_transform(Rotation(wall_facing_camera_world().matrix().transpose()),
                      Vec3(0.5, 0, 0.1));
  const double dt = 4e-3;

  SensorBundle sensors;
  sensors.attitude = Rotation::identity();
  sensors.n = 1;
  sensors.q = desired_features(1, 0.10, 0.5);
  sensors.features_fresh = true;
  sensors.flow = FlowVelocity{0.0, true};

  SUBCASE("free flight is pure motion control") {
    ControllerState state;
    state.features.line_offset = {0.10, 0.0};
    state.features.line_depth = {0.5, 1.0};
    state.features.q_ref = desired_features(1, 0.10, 0.5);
    sensors.wall_distance = 1.2;
    sensors.wall_distance_valid = true;
    const ControlOutput out =
        control_step(sensors, state, gains, params, r_e_b, t_c_b, dt);
    CHECK(out.lambda == 0.0);
    CHECK_FALSE(out.degraded);
    // Lift to hold altitude comes from the linearization, not the raw tau.
    CHECK(out.tau_prime[2] < -60.0);
  }

  SUBCASE("in contact the pushing axis obeys the force law") {
    ControllerState state;
    state.features.line_offset = {0.10, 0.0};
    state.features.line_depth = {0.5, 1.0};
    state.features.q_ref = desired_features(1, 0.10, 0.5);
    state.contact_ref_depth = 0.20;
    sensors.wall_distance = 0.20;
    sensors.wall_distance_valid = true;
    sensors.ft.force = Vec3(-gains.f_ref, 0, 0);  // wall reaction
    const ControlOutput out =
        control_step(sensors, state, gains, params, r_e_b, t_c_b, dt);
    CHECK(out.lambda == 1.0);
    CHECK(out.f_f == doctest::Approx(gains.f_ref));
    CHECK(out.tau[0] == doctest::Approx(out.f_f).epsilon(1e-9));
  }

  SUBCASE("allocated thrust reproduces the commanded wrench") {
    ControllerState state;
    state.features.line_offset = {0.10, 0.0};
    state.features.line_depth = {0.5, 1.0};
    state.features.q_ref = desired_features(1, 0.10, 0.5);
    sensors.wall_distance = 0.22;
    sensors.wall_distance_valid = true;
    const ControlOutput out =
        control_step(sensors, state, gains, params, r_e_b, t_c_b, dt);
    CHECK_FALSE(out.saturated);
    const Vec6 achieved = params.allocation_matrix() * out.thrusts;
    CHECK((achieved - out.tau_prime).norm() < 1e-6);
  }

  SUBCASE("controller output is deterministic") {
    ControllerState s1, s2;
    for (ControllerState* s : {&s1, &s2}) {
      s->features.line_offset = {0.10, 0.0};
      s->features.line_depth = {0.5, 1.0};
      s->features.q_ref = desired_features(1, 0.10, 0.5);
    }
    sensors.wall_distance = 0.35;
    sensors.wall_distance_valid = true;
    const ControlOutput a =
        control_step(sensors, s1, gains, params, r_e_b, t_c_b, dt);
    const ControlOutput b =
        control_step(sensors, s2, gains, params, r_e_b, t_c_b, dt);
    CHECK(a.thrusts == b.thrusts);
    CHECK(a.tau == b.tau);
  }
}

}  // namespace
}  // namespace hexpaint
