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

#ifndef HEXPAINT_GEOMETRY_HPP_
#define HEXPAINT_GEOMETRY_HPP_

#include <Eigen/Dense>
#include <cmath>

namespace hexpaint {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// Reference frames used throughout.
//   Inertial:    NED, +z down, origin at the initial contact point.
//   Body:        x front, y right, z down (FRD).
//   Camera:      x right, y down, z along the optical axis (front).
//   EndEffector: x right, y up, z backward from the contact point.
enum class FrameId { Inertial, Body, Camera, EndEffector };

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

// 3x3 orthonormal rotation with explicit re-orthonormalization support.
// Stored as a plain matrix; construction from raw data does not validate,
// use is_valid() where the invariant matters.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}
  explicit Rotation(const Mat3& m) : m_(m) {}

  static Rotation identity() { return Rotation(); }

  // ZYX convention: R = Rz(yaw) * Ry(pitch) * Rx(roll).
  static Rotation from_rpy(double roll, double pitch, double yaw) {
    Mat3 m = (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
              Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
              Eigen::AngleAxisd(roll, Vec3::UnitX()))
                 .toRotationMatrix();
    return Rotation(m);
  }

  static Rotation about_axis(const Vec3& axis, double angle) {
    return Rotation(Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix());
  }

  // (roll, pitch, yaw), ZYX, roll/pitch in (-pi/2, pi/2) branch.
  Vec3 to_rpy() const {
    const double pitch = std::asin(std::clamp(-m_(2, 0), -1.0, 1.0));
    const double roll = std::atan2(m_(2, 1), m_(2, 2));
    const double yaw = std::atan2(m_(1, 0), m_(0, 0));
    return Vec3(roll, pitch, yaw);
  }

  const Mat3& matrix() const { return m_; }
  Rotation transpose() const { return Rotation(m_.transpose()); }
  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  bool is_valid(double tol = 1e-9) const {
    return (m_ * m_.transpose() - Mat3::Identity()).norm() < tol &&
           std::abs(m_.determinant() - 1.0) < tol;
  }

  // Nearest orthonormal matrix (polar decomposition via SVD). Called once per
  // integration step to stop drift over long runs.
  Rotation orthonormalized() const {
    Eigen::JacobiSVD<Mat3> svd(m_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
      Mat3 d = Mat3::Identity();
      d(2, 2) = -1.0;
      r = svd.matrixU() * d * svd.matrixV().transpose();
    }
    return Rotation(r);
  }

 private:
  Mat3 m_;
};

// Body twist: linear velocity V and angular velocity Omega, both expressed in
// the tagged frame.
struct Twist {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();
  FrameId frame = FrameId::Body;

  Vec6 stacked() const {
    Vec6 v;
    v << linear, angular;
    return v;
  }
  static Twist from_stacked(const Vec6& v, FrameId f) {
    return Twist{v.head<3>(), v.tail<3>(), f};
  }
};

// Force/moment pair in the tagged frame.
struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 moment = Vec3::Zero();
  FrameId frame = FrameId::Body;

  Vec6 stacked() const {
    Vec6 v;
    v << force, moment;
    return v;
  }
  static Wrench from_stacked(const Vec6& v, FrameId f) {
    return Wrench{v.head<3>(), v.tail<3>(), f};
  }
};

// 6x6 map of twists between frames on the same rigid body.
//
// Convention (used everywhere): for rotation R from frame a to frame b and
// p_offset the origin of frame b expressed in frame a,
//   V_b = R (V_a + Omega_a x p_offset),  Omega_b = R Omega_a.
class TwistTransform {
 public:
  TwistTransform() : t_(Mat6::Identity()) {}

  static TwistTransform from(const Rotation& r, const Vec3& p_offset) {
    Mat6 t = Mat6::Zero();
    const Mat3& rm = r.matrix();
    t.topLeftCorner<3, 3>() = rm;
    t.topRightCorner<3, 3>() = -rm * skew(p_offset);
    t.bottomRightCorner<3, 3>() = rm;
    TwistTransform out;
    out.t_ = t;
    return out;
  }

  Twist apply(const Twist& in, FrameId out_frame) const {
    Vec6 v = t_ * in.stacked();
    return Twist::from_stacked(v, out_frame);
  }

  const Mat6& matrix() const { return t_; }
  TwistTransform operator*(const TwistTransform& o) const {
    TwistTransform out;
    out.t_ = t_ * o.t_;
    return out;
  }

 private:
  Mat6 t_;
};

inline TwistTransform twist_transform(const Rotation& r, const Vec3& p_offset) {
  return TwistTransform::from(r, p_offset);
}

inline Rotation rotation_from_rpy(double roll, double pitch, double yaw) {
  return Rotation::from_rpy(roll, pitch, yaw);
}

constexpr double kGravity = 9.81;  // m/s^2, +z in NED

}  // namespace hexpaint

#endif  // HEXPAINT_GEOMETRY_HPP_
