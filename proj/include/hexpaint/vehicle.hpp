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

#ifndef HEXPAINT_VEHICLE_HPP_
#define HEXPAINT_VEHICLE_HPP_

#include <cmath>
#include <random>
#include <stdexcept>

#include "hexpaint/geometry.hpp"
#include "hexpaint/surface.hpp"

namespace hexpaint {

// Tilted-rotor hexarotor. Rotors sit on a regular hexagon; every thrust axis
// leans tilt_angle away from vertical along the arm tangent, with the lean
// direction alternating around the ring. The alternation makes the 6x6
// allocation map full rank, so force and torque are commanded independently.
struct VehicleParams {
  double mass = 7.0;                 // kg
  Mat3 inertia = Vec3(0.6, 0.6, 1.0).asDiagonal();  // kg m^2
  double arm_length = 0.45;          // m
  double tilt_angle = M_PI / 6.0;    // rad
  double max_thrust = 52.56;         // N per rotor
  double drag_torque_coeff = 0.016;  // N m per N of thrust
  double desired_mass = 7.0;         // kg, impedance normalization

  double rotor_angle(int i) const { return i * (M_PI / 3.0); }
  double tilt_sign(int i) const { return (i % 2 == 0) ? 1.0 : -1.0; }
  double spin_sign(int i) const { return (i % 2 == 0) ? 1.0 : -1.0; }

  Vec3 rotor_position(int i) const {
    const double a = rotor_angle(i);
    return arm_length * Vec3(std::cos(a), std::sin(a), 0.0);
  }

  // Unit thrust direction in the body frame (z down, so hover thrust is -z).
  Vec3 rotor_axis(int i) const {
    const double a = rotor_angle(i);
    const Vec3 tangent(-std::sin(a), std::cos(a), 0.0);
    return -std::cos(tilt_angle) * Vec3::UnitZ() +
           tilt_sign(i) * std::sin(tilt_angle) * tangent;
  }

  // Columns map rotor thrust magnitude to body wrench (force; moment).
  Mat6 allocation_matrix() const {
    Mat6 a = Mat6::Zero();
    for (int i = 0; i < 6; ++i) {
      const Vec3 z = rotor_axis(i);
      const Vec3 p = rotor_position(i);
      a.block<3, 1>(0, i) = z;
      a.block<3, 1>(3, i) = p.cross(z) + drag_torque_coeff * spin_sign(i) * z;
    }
    return a;
  }
};

// Vehicle pose and body twist. R maps body-frame vectors to the inertial
// frame (columns are the body axes expressed in NED).
struct RigidState {
  Vec3 position = Vec3::Zero();
  Rotation R;
  Vec3 V = Vec3::Zero();      // body linear velocity, m/s
  Vec3 Omega = Vec3::Zero();  // body angular velocity, rad/s
  double time = 0.0;

  Twist twist() const { return Twist{V, Omega, FrameId::Body}; }
};

struct InertiaTerms {
  Mat6 M;   // blockdiag(m I, J)
  Mat6 C;   // velocity coupling, C(v) v = [m Omega x V; Omega x J Omega]
  Vec6 G;   // gravity wrench in the body frame
};

inline InertiaTerms inertia_terms(const RigidState& state,
                                  const VehicleParams& params) {
  InertiaTerms out;
  out.M = Mat6::Zero();
  out.M.topLeftCorner<3, 3>() = params.mass * Mat3::Identity();
  out.M.bottomRightCorner<3, 3>() = params.inertia;

  out.C = Mat6::Zero();
  out.C.topLeftCorner<3, 3>() = params.mass * skew(state.Omega);
  out.C.bottomRightCorner<3, 3>() = skew(state.Omega) * params.inertia;

  // Weight expressed in the body frame; in free fall M Vdot = G gives the
  // downward acceleration g.
  const Vec3 g_inertial(0.0, 0.0, kGravity);
  out.G = Vec6::Zero();
  out.G.head<3>() = params.mass * (state.R.transpose() * g_inertial);
  return out;
}

// tau' = C [0; Omega] - G + tau. Gravity and the gyroscopic torque are
// cancelled from IMU quantities alone; the m Omega x V coupling is left in
// (velocity is not trusted near the wall), so the plant seen by the outer
// loops is M vdot = tau - [m Omega x V; 0].
inline Vec6 feedback_linearize(const Vec6& tau, const Vec3& omega_imu,
                               const Rotation& attitude_imu,
                               const VehicleParams& params) {
  RigidState imu_state;
  imu_state.R = attitude_imu;
  imu_state.Omega = omega_imu;
  const InertiaTerms terms = inertia_terms(imu_state, params);
  Vec6 v_omega = Vec6::Zero();
  v_omega.tail<3>() = omega_imu;
  return terms.C * v_omega - terms.G + tau;
}

struct AllocationResult {
  Vec6 thrusts = Vec6::Zero();
  bool saturated = false;
  Vec6 achieved = Vec6::Zero();  // A * clamped thrusts
};

inline AllocationResult allocate(const Vec6& tau,
                                 const VehicleParams& params) {
  const Mat6 a = params.allocation_matrix();
  AllocationResult out;
  out.thrusts = a.fullPivLu().solve(tau);
  for (int i = 0; i < 6; ++i) {
    const double clamped = std::clamp(out.thrusts[i], 0.0, params.max_thrust);
    if (std::abs(clamped - out.thrusts[i]) > 0.0) out.thrusts[i] = clamped;
  }
  out.achieved = a * out.thrusts;
  out.saturated = (out.achieved - tau).norm() > 1e-6;
  return out;
}

// Penalty contact with regularized Coulomb friction.
struct ContactModel {
  double k_n = 5000.0;      // N/m
  double c_n = 80.0;        // N s/m
  double mu = 0.3;          // Coulomb coefficient
  double stick_vel = 0.01;  // m/s, below this friction is viscous
};

struct ContactResult {
  Wrench wrench;            // body frame, acting on the vehicle
  double penetration = 0.0; // m
};

inline ContactResult contact_wrench(const RigidState& state,
                                    const Vec3& tool_tip_offset,
                                    const SurfaceModel& surface,
                                    const ContactModel& contact) {
  ContactResult out;
  out.wrench.frame = FrameId::Body;

  const Vec3 tip_world =
      state.position + state.R * tool_tip_offset;
  const double dist = surface.signed_distance(tip_world);
  out.penetration = std::max(0.0, -dist);
  if (out.penetration <= 0.0) return out;

  const Vec3 tip_vel_body = state.V + state.Omega.cross(tool_tip_offset);
  const Vec3 tip_vel_world = state.R * tip_vel_body;
  const Vec3 n = surface.normal();
  const double pen_rate = -n.dot(tip_vel_world);

  const double normal_mag =
      contact.k_n * out.penetration + contact.c_n * std::max(0.0, pen_rate);
  const Vec3 f_normal = normal_mag * n;

  const Vec3 v_tan = tip_vel_world - n.dot(tip_vel_world) * n;
  const double speed = v_tan.norm();
  Vec3 f_tan = Vec3::Zero();
  if (speed > 1e-12) {
    const double cap = contact.mu * normal_mag;
    const double mag = (speed > contact.stick_vel)
                           ? cap
                           : cap * (speed / contact.stick_vel);
    f_tan = -mag * v_tan / speed;
  }

  const Vec3 f_body = state.R.transpose() * (f_normal + f_tan);
  out.wrench.force = f_body;
  out.wrench.moment = tool_tip_offset.cross(f_body);
  return out;
}

// One semi-implicit Euler step of the full nonlinear dynamics. Velocities
// advance on current-state accelerations; pose then advances on the new
// velocities. external is a body-frame wrench (contact), thrust enters
// through the allocation matrix.
inline RigidState step(const RigidState& state, const Vec6& thrusts,
                       const Wrench& external, const VehicleParams& params,
                       double dt) {
  const InertiaTerms terms = inertia_terms(state, params);
  const Vec6 tau_rotor = params.allocation_matrix() * thrusts;

  const Vec3 force = tau_rotor.head<3>() + external.force + terms.G.head<3>() -
                     params.mass * state.Omega.cross(state.V);
  const Vec3 moment = tau_rotor.tail<3>() + external.moment -
                      state.Omega.cross(params.inertia * state.Omega);

  RigidState next = state;
  next.V = state.V + dt * force / params.mass;
  next.Omega = state.Omega + dt * params.inertia.inverse() * moment;
  next.position = state.position + dt * (state.R * next.V);
  const Mat3 r_dot = state.R.matrix() * skew(next.Omega);
  next.R = Rotation(state.R.matrix() + dt * r_dot).orthonormalized();
  next.time = state.time + dt;

  if (!next.position.allFinite() || !next.V.allFinite() ||
      !next.Omega.allFinite())
    throw std::runtime_error("vehicle state diverged to non-finite values");
  return next;
}

struct FtSensorModel {
  double sigma_f = 0.0;  // N, per force axis
  double rate_hz = 250.0;
};

inline Wrench read_ft(const Wrench& true_contact, const FtSensorModel& model,
                      std::mt19937_64& rng) {
  Wrench out = true_contact;
  if (model.sigma_f > 0.0) {
    std::normal_distribution<double> noise(0.0, model.sigma_f);
    for (int i = 0; i < 3; ++i) out.force[i] += noise(rng);
  }
  return out;
}

}  // namespace hexpaint

#endif  // HEXPAINT_VEHICLE_HPP_
