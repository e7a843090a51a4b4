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

#ifndef HEXPAINT_CONTROL_HPP_
#define HEXPAINT_CONTROL_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "hexpaint/camera.hpp"
#include "hexpaint/geometry.hpp"
#include "hexpaint/vehicle.hpp"

namespace hexpaint {

struct HybridGains {
  double f_ref = 5.0;   // N, pushing force setpoint

  // Force / impedance loop.
  double k_fp = 0.5;
  double k_fi = 1.0;
  double k_sp = 200.0;  // normalized stiffness, N/m
  double k_sd = 30.0;   // normalized damping, N s/m

  // IBVS feature loop (scalar diagonal gains).
  double k_qp = 2.0;
  double k_qd = 0.5;
  double k_qi = 0.2;

  // Lateral velocity PI.
  double k_xp = 8.0;
  double k_xi = 2.0;

  // Complementary attitude PD (acts through the null-space path).
  double k_tilt_p = 10.0;
  double k_tilt_d = 6.0;
  double k_yaw_p = 4.0;
  double k_yaw_d = 3.0;

  // Hybrid blending bounds.
  double d_min = 0.25;  // m
  double d_max = 0.6;   // m

  double mu_dls = 0.01;  // pseudo-inverse damping in flight, 0 in unit tests

  // Anti-windup clamps.
  double force_integral_limit = 10.0;    // N s
  double feature_integral_limit = 0.5;   // feature units times s
  double lateral_integral_limit = 1.0;   // m

  double derivative_cutoff_hz = 10.0;
};

enum class LineClass { kHorizontal, kVertical };

// Stack of up to two tracked lines in (rho, theta) order plus the
// controller's per-feature memory. Slots are typed by line_class; the usual
// configuration is slot 0 horizontal, slot 1 vertical. Entries beyond 2n are
// zero and unused.
struct FeatureVector {
  int n = 0;
  Eigen::Vector4d q = Eigen::Vector4d::Zero();
  Eigen::Vector4d q_ref = Eigen::Vector4d::Zero();
  Eigen::Vector4d de = Eigen::Vector4d::Zero();      // filtered d(e_q)/dt
  Eigen::Vector4d integral = Eigen::Vector4d::Zero();
  std::array<LineClass, 2> line_class = {LineClass::kHorizontal,
                                         LineClass::kVertical};
  std::array<double, 2> line_offset = {0.0, 0.0};  // l_i, m
  std::array<double, 2> line_depth = {1.0, 1.0};   // d_i, m

  Eigen::Vector4d error() const { return q - q_ref; }
};

// Two planes A X + B Y + C Z + D = 0 in the camera frame whose intersection
// is the tracked 3D line. lambda_plane() is the one feeding the interaction
// scalars; construction keeps the depth-style plane (largest |D|) there.
struct PlanePair {
  Eigen::Vector4d plane_a = Eigen::Vector4d::Zero();
  Eigen::Vector4d plane_b = Eigen::Vector4d::Zero();

  const Eigen::Vector4d& lambda_plane() const { return plane_b; }

  // Horizontal line {Y - l = 0, Z - d = 0}.
  static PlanePair horizontal_line(double l, double d) {
    PlanePair p;
    p.plane_a << 0, 1, 0, -l;
    p.plane_b << 0, 0, 1, -d;
    return p;
  }
  // Vertical line {X - l = 0, Z - d = 0}.
  static PlanePair vertical_line(double l, double d) {
    PlanePair p;
    p.plane_a << 1, 0, 0, -l;
    p.plane_b << 0, 0, 1, -d;
    return p;
  }
  // Generic line through point p with direction u (camera frame): plane_a is
  // the one through the optical center (D = 0, never used for the scalars),
  // plane_b the perpendicular one with D != 0 for any line off the center.
  static PlanePair from_point_direction(const Vec3& p, const Vec3& u) {
    PlanePair out;
    const Vec3 n0 = p.cross(u);
    out.plane_a << n0.x(), n0.y(), n0.z(), 0.0;
    const Vec3 n1 = u.cross(n0).normalized();
    out.plane_b << n1.x(), n1.y(), n1.z(), -n1.dot(p);
    return out;
  }
};

struct DegeneratePlane : std::runtime_error {
  DegeneratePlane() : std::runtime_error("interaction plane has D = 0") {}
};

// Contact confidence as a function of measured wall distance: 1 in firm
// contact, cosine rolloff across [d_min, d_max], 0 in free flight.
inline double blend_lambda(double d, double d_min, double d_max) {
  if (d <= d_min) return 1.0;
  if (d > d_max) return 0.0;
  return 0.5 * (1.0 + std::cos((d - d_min) / (d_max - d_min) * M_PI));
}

// Hybrid selection matrix. The tool pushes along the end-effector -z axis,
// so the force-controlled direction is the image of e_z under R_E^B; rotated
// into the body frame the projector weights exactly that axis by lambda.
inline Mat6 selection_matrix(const Rotation& r_e_to_b, double lambda) {
  Mat3 pick = Mat3::Zero();
  pick(2, 2) = lambda;
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() =
      r_e_to_b.matrix() * pick * r_e_to_b.matrix().transpose();
  return out;
}

struct ImpedanceResult {
  double f_f = 0.0;       // commanded pushing force, N
  double integral = 0.0;  // updated force-error integral, N s
};

// F_f = F_ref + K_sp e_s + K_sd de_s + K_fp e_f + K_fi int(e_f). e_s is the
// tool displacement along the outward surface normal from the reference
// contact point (negative when pressed past it); e_f = F_ref - F_t so that
// excess measured force lowers the command.
inline ImpedanceResult impedance_force(double f_t, double e_s, double de_s,
                                       double integral,
                                       const HybridGains& gains, double dt,
                                       bool freeze_integral = false) {
  const double e_f = gains.f_ref - f_t;
  ImpedanceResult out;
  out.integral = integral;
  if (!freeze_integral) {
    out.integral = std::clamp(integral + e_f * dt,
                              -gains.force_integral_limit,
                              gains.force_integral_limit);
  }
  out.f_f = gains.f_ref + gains.k_sp * e_s + gains.k_sd * de_s +
            gains.k_fp * e_f + gains.k_fi * out.integral;
  return out;
}

// Interaction matrix of one line feature, rows ordered (rho-row, theta-row)
// to match the (rho, theta) feature stacking. Maps camera twist (V, Omega)
// in the camera frame to (rho-dot, theta-dot).
inline Eigen::Matrix<double, 2, 6> line_interaction(double rho, double theta,
                                                    const PlanePair& planes) {
  const Eigen::Vector4d& pl = planes.lambda_plane();
  const double a = pl[0], b = pl[1], c = pl[2], d = pl[3];
  if (std::abs(d) < 1e-12) throw DegeneratePlane();
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const double lam_t = (a * st - b * ct) / d;
  const double lam_r = (a * rho * ct + b * rho * st + c) / d;

  Eigen::Matrix<double, 2, 6> l;
  l.row(0) << lam_r * ct, lam_r * st, -lam_r * rho, (1.0 + rho * rho) * st,
      -(1.0 + rho * rho) * ct, 0.0;
  l.row(1) << lam_t * ct, lam_t * st, -lam_t * rho, -rho * ct, -rho * st,
      -1.0;
  return l;
}

// Stacked interaction matrix mapping BODY twists to feature rates:
// L = L_c T^C_B. The controller evaluates it at the reference configuration
// (at_reference = true); derivative tests evaluate at the current features.
inline MatX stacked_interaction(const FeatureVector& features,
                                const TwistTransform& t_c_b,
                                bool at_reference = true) {
  MatX l_c(2 * features.n, 6);
  for (int i = 0; i < features.n; ++i) {
    const double rho =
        at_reference ? features.q_ref[2 * i] : features.q[2 * i];
    const double theta =
        at_reference ? features.q_ref[2 * i + 1] : features.q[2 * i + 1];
    const PlanePair planes =
        features.line_class[i] == LineClass::kHorizontal
            ? PlanePair::horizontal_line(features.line_offset[i],
                                         features.line_depth[i])
            : PlanePair::vertical_line(features.line_offset[i],
                                       features.line_depth[i]);
    l_c.block<2, 6>(2 * i, 0) = line_interaction(rho, theta, planes);
  }
  return l_c * t_c_b.matrix();
}

struct PinvResult {
  MatX pinv;       // 6 x 2n
  Mat6 null_proj;  // P = I - pinv * L
};

// Damped least-squares pseudo-inverse L^T (L L^T + mu^2 I)^-1 and the
// null-space projector of L.
inline PinvResult damped_pinv(const MatX& l, double mu_dls) {
  const long rows = l.rows();
  const MatX gram =
      l * l.transpose() + mu_dls * mu_dls * MatX::Identity(rows, rows);
  PinvResult out;
  out.pinv = l.transpose() * gram.ldlt().solve(MatX::Identity(rows, rows));
  out.null_proj = Mat6::Identity() - out.pinv * l;
  return out;
}

// Reference features for the tracked configuration, normalized-rho
// convention (focal length 1): horizontal line at offset l1 and depth d1,
// optionally a vertical line at l2, d2.
inline Eigen::Vector4d desired_features(int n, double l1, double d1,
                                        double l2 = 0.0, double d2 = 1.0) {
  Eigen::Vector4d q_ref = Eigen::Vector4d::Zero();
  if (n >= 1) {
    q_ref[0] = l1 / d1;
    q_ref[1] = M_PI / 2.0;
  }
  if (n >= 2) {
    q_ref[2] = l2 / d2;
    q_ref[3] = 0.0;
  }
  return q_ref;
}

struct IbvsResult {
  Vec6 tau_vs = Vec6::Zero();
  bool degraded = false;  // no features, complementary action only
};

// tau_vs = -M [ Lhat^+ (K_qp e + K_qd de + K_qi int(e)) + P_vs tau_p ].
// With no features the visual terms vanish and the projector becomes the
// identity, leaving tau_vs = -M tau_p.
inline IbvsResult ibvs_wrench(const FeatureVector& features, const Mat6& m,
                              const HybridGains& gains, const Vec6& tau_p,
                              const TwistTransform& t_c_b) {
  IbvsResult out;
  if (features.n == 0) {
    out.tau_vs = -m * tau_p;
    out.degraded = true;
    return out;
  }
  const MatX l_hat = stacked_interaction(features, t_c_b, true);
  const PinvResult pinv = damped_pinv(l_hat, gains.mu_dls);
  const int dim = 2 * features.n;
  const VecX e = features.error().head(dim);
  const VecX de = features.de.head(dim);
  const VecX integ = features.integral.head(dim);
  const VecX feedback = gains.k_qp * e + gains.k_qd * de + gains.k_qi * integ;
  out.tau_vs = -m * (pinv.pinv * feedback + pinv.null_proj * tau_p);
  return out;
}

// Null-space objectives: zero tilt, yaw facing the wall (from the measured
// surface normal in the body frame), and the lateral velocity PI. Signs are
// chosen for the -M [.. + P_vs tau_p] path, so every entry is +gain*error.
inline Vec6 complementary_wrench(const Rotation& attitude, const Vec3& omega,
                                 const Vec3& surface_n_body, bool n_valid,
                                 const FlowVelocity& flow, double v_d,
                                 double lateral_integral,
                                 const HybridGains& gains) {
  const Vec3 rpy = attitude.to_rpy();

  Vec3 m_p;
  m_p.x() = gains.k_tilt_p * rpy.x() + gains.k_tilt_d * omega.x();
  m_p.y() = gains.k_tilt_p * rpy.y() + gains.k_tilt_d * omega.y();
  double yaw_err = 0.0;
  if (n_valid) {
    // Aligned when the wall normal seen from the body is exactly -x.
    yaw_err = std::atan2(surface_n_body.y(), -surface_n_body.x());
  }
  m_p.z() = gains.k_yaw_p * yaw_err + gains.k_yaw_d * omega.z();

  double f_x = gains.k_xi * lateral_integral;
  if (flow.valid) f_x += gains.k_xp * (flow.v_lateral - v_d);

  Vec6 tau_p = Vec6::Zero();
  tau_p[1] = f_x;
  tau_p.tail<3>() = m_p;
  return tau_p;
}

// tau = (I - Lambda) tau_vs + Lambda tau_f.
inline Vec6 hybrid_combine(const Vec6& tau_vs, const Vec6& tau_f,
                           const Mat6& lambda_sel) {
  return (Mat6::Identity() - lambda_sel) * tau_vs + lambda_sel * tau_f;
}

// Everything the controller reads in one tick. Feature measurements arrive
// already associated (slot 0 horizontal, slot 1 vertical) and unwrapped
// against the current reference.
struct SensorBundle {
  int n = 0;
  Eigen::Vector4d q = Eigen::Vector4d::Zero();
  bool features_fresh = false;  // a new image was processed this tick
  double frame_dt = 1.0 / 30.0; // time since the previous processed image, s
  double wall_distance = 1e9;   // m, mean valid depth in the tracked box
  bool wall_distance_valid = false;
  Wrench ft;                    // body frame, reaction on the vehicle
  Rotation attitude;            // IMU: body to inertial
  Vec3 omega = Vec3::Zero();    // IMU body rates
  Vec3 surface_n_body = Vec3(-1, 0, 0);
  bool surface_n_valid = false;
  FlowVelocity flow;
};

struct ControllerState {
  FeatureVector features;
  Eigen::Vector4d prev_error = Eigen::Vector4d::Zero();
  bool have_prev_error = false;

  double force_integral = 0.0;
  double lateral_integral = 0.0;

  double contact_ref_depth = 0.20;  // camera depth at tip touch, m
  double e_s = 0.0;
  double de_s = 0.0;
  bool have_e_s = false;

  double v_d = 0.0;  // lateral velocity reference, m/s
  bool saturated_last = false;
  double no_feature_time = 0.0;
};

struct ControlOutput {
  Vec6 thrusts = Vec6::Zero();
  Vec6 tau = Vec6::Zero();        // commanded wrench before linearization
  Vec6 tau_prime = Vec6::Zero();  // after feedback linearization
  double lambda = 0.0;
  double f_f = 0.0;
  bool saturated = false;
  bool degraded = false;
};

// One 250 Hz controller tick: blend, select, impedance, IBVS, null-space
// complement, hybrid combination, feedback linearization, allocation.
inline ControlOutput control_step(const SensorBundle& sensors,
                                  ControllerState& state,
                                  const HybridGains& gains,
                                  const VehicleParams& params,
                                  const Rotation& r_e_to_b,
                                  const TwistTransform& t_c_b, double dt) {
  ControlOutput out;
  const bool freeze = state.saturated_last;

  // Contact blending from measured wall distance.
  const double d = sensors.wall_distance_valid ? sensors.wall_distance
                                               : gains.d_max + 1.0;
  out.lambda = blend_lambda(d, gains.d_min, gains.d_max);
  const Mat6 lambda_sel = selection_matrix(r_e_to_b, out.lambda);

  // Impedance force along the pushing axis (+x body). The sensor reports the
  // wall reaction, which points back at the vehicle.
  const double f_t = -sensors.ft.force.x();
  const double alpha =
      dt / (dt + 1.0 / (2.0 * M_PI * gains.derivative_cutoff_hz));
  if (sensors.wall_distance_valid) {
    const double e_s_new = d - state.contact_ref_depth;
    if (state.have_e_s) {
      const double de_raw = (e_s_new - state.e_s) / dt;
      state.de_s += alpha * (de_raw - state.de_s);
    }
    state.e_s = e_s_new;
    state.have_e_s = true;
  }
  // The force integral only runs in firm contact; winding it up during the
  // approach would punch the wall on first touch.
  const ImpedanceResult imp =
      impedance_force(f_t, state.e_s, state.de_s, state.force_integral, gains,
                      dt, freeze || out.lambda < 0.999);
  state.force_integral = imp.integral;
  out.f_f = imp.f_f;
  Vec6 tau_f = Vec6::Zero();
  tau_f[0] = imp.f_f;

  // Feature bookkeeping: measurements are sample-and-hold between frames,
  // the derivative differences across the frame interval, and the integral
  // advances every tick on the held error.
  FeatureVector& feat = state.features;
  if (sensors.features_fresh) {
    if (sensors.n > 0) {
      feat.n = sensors.n;
      feat.q = sensors.q;
      const Eigen::Vector4d e = feat.error();
      if (state.have_prev_error && sensors.frame_dt > 0.0) {
        const Eigen::Vector4d de_raw =
            (e - state.prev_error) / sensors.frame_dt;
        const double alpha_f =
            sensors.frame_dt /
            (sensors.frame_dt + 1.0 / (2.0 * M_PI * gains.derivative_cutoff_hz));
        feat.de += alpha_f * (de_raw - feat.de);
      }
      state.prev_error = e;
      state.have_prev_error = true;
    } else {
      feat.n = 0;
      state.have_prev_error = false;
      feat.de.setZero();
    }
  }
  if (feat.n > 0) {
    state.no_feature_time = 0.0;
    if (!freeze) {
      const Eigen::Vector4d e = feat.error();
      for (int i = 0; i < 2 * feat.n; ++i) {
        feat.integral[i] =
            std::clamp(feat.integral[i] + e[i] * dt,
                       -gains.feature_integral_limit,
                       gains.feature_integral_limit);
      }
    }
  } else {
    state.no_feature_time += dt;
  }

  // Lateral PI integrator.
  if (sensors.flow.valid && !freeze) {
    state.lateral_integral =
        std::clamp(state.lateral_integral +
                       (sensors.flow.v_lateral - state.v_d) * dt,
                   -gains.lateral_integral_limit,
                   gains.lateral_integral_limit);
  }

  const Vec6 tau_p = complementary_wrench(
      sensors.attitude, sensors.omega, sensors.surface_n_body,
      sensors.surface_n_valid, sensors.flow, state.v_d,
      state.lateral_integral, gains);

  RigidState imu_state;
  imu_state.R = sensors.attitude;
  imu_state.Omega = sensors.omega;
  const InertiaTerms terms = inertia_terms(imu_state, params);

  const IbvsResult ibvs =
      ibvs_wrench(feat, terms.M, gains, tau_p, t_c_b);
  out.degraded = ibvs.degraded;

  out.tau = hybrid_combine(ibvs.tau_vs, tau_f, lambda_sel);
  out.tau_prime =
      feedback_linearize(out.tau, sensors.omega, sensors.attitude, params);

  const AllocationResult alloc = allocate(out.tau_prime, params);
  out.thrusts = alloc.thrusts;
  out.saturated = alloc.saturated;
  state.saturated_last = alloc.saturated;
  return out;
}

}  // namespace hexpaint

#endif  // HEXPAINT_CONTROL_HPP_
