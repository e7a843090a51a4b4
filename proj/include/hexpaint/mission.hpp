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

#ifndef HEXPAINT_MISSION_HPP_
#define HEXPAINT_MISSION_HPP_

#include <cmath>

#include "hexpaint/vision.hpp"

namespace hexpaint {

// Painting mission phases. A run starts with a scripted approach, then
// alternates lateral painting passes with upward line switches until the
// target band is covered or the planned passes are done.
enum class MissionPhase {
  kApproach,
  kTrackLateralLeft,
  kSwitchUp,
  kTrackLateralRight,
  kDone,
  kFault,
};

inline const char* phase_name(MissionPhase p) {
  switch (p) {
    case MissionPhase::kApproach:
      return "Approach";
    case MissionPhase::kTrackLateralLeft:
      return "TrackLateralLeft";
    case MissionPhase::kSwitchUp:
      return "SwitchUp";
    case MissionPhase::kTrackLateralRight:
      return "TrackLateralRight";
    case MissionPhase::kDone:
      return "Done";
    case MissionPhase::kFault:
      return "Fault";
  }
  return "Unknown";
}

inline bool is_lateral(MissionPhase p) {
  return p == MissionPhase::kTrackLateralLeft ||
         p == MissionPhase::kTrackLateralRight;
}

inline bool is_terminal(MissionPhase p) {
  return p == MissionPhase::kDone || p == MissionPhase::kFault;
}

// Transition relation of the mission machine. Staying in a phase is always
// legal, Done and Fault have no successors, and Fault is reachable from
// every live phase.
inline bool legal_transition(MissionPhase from, MissionPhase to) {
  if (from == to) return true;
  if (is_terminal(from)) return false;
  if (to == MissionPhase::kFault) return true;
  switch (from) {
    case MissionPhase::kApproach:
      return to == MissionPhase::kTrackLateralLeft;
    case MissionPhase::kTrackLateralLeft:
    case MissionPhase::kTrackLateralRight:
      return to == MissionPhase::kSwitchUp || to == MissionPhase::kDone;
    case MissionPhase::kSwitchUp:
      return to == MissionPhase::kTrackLateralLeft ||
             to == MissionPhase::kTrackLateralRight;
    default:
      return false;
  }
}

struct MissionParams {
  double approach_duration_s = 5.0;
  int passes = 2;          // planned lateral passes
  double rho_ref = 0.20;   // guide line offset held during a pass, normalized
  double switch_eps = 0.03;   // completion band on the re-acquired guide line
  int switch_confirm = 3;     // frames inside the band to finish a switch
  double gate_lo = 0.05;      // boundary line window that ends a pass
  double gate_hi = 0.35;
  int gate_confirm = 5;       // frames inside the window to trigger
  double loss_fault_s = 1.0;  // tolerated continuous guide loss
  double coverage_done = 0.95;
};

// Supervisor advanced once per processed frame. It watches the tracked
// lines: the pass ends when the surface boundary line drifts into the gate
// window on the travel side, and a switch completes when the re-acquired
// guide line settles back onto the reference offset. All geometry is in
// normalized image units, so the thresholds are depth independent.
class MissionMachine {
 public:
  explicit MissionMachine(const MissionParams& params) : params_(params) {}

  MissionPhase phase() const { return phase_; }
  // -1 paints toward decreasing lateral coordinate, +1 toward increasing.
  int direction() const { return direction_; }
  int passes_done() const { return passes_done_; }
  int switch_count() const { return switch_count_; }
  int reversal_count() const { return reversal_count_; }

  // One-shot: entering a switch re-acquires both lines from scratch.
  bool consume_tracker_reset() {
    const bool r = tracker_reset_;
    tracker_reset_ = false;
    return r;
  }
  bool consume_phase_change() {
    const bool r = phase_changed_;
    phase_changed_ = false;
    return r;
  }

  void fault() {
    if (!is_terminal(phase_)) transition(MissionPhase::kFault);
  }

  // rho_h is the tracked horizontal line offset unwrapped against the
  // reference; only read when feats.has_horizontal.
  void update(double time, double dt, const TrackedFeatures& feats,
              double rho_h, double coverage) {
    if (is_terminal(phase_)) return;

    if (phase_ == MissionPhase::kApproach) {
      if (time + 1e-9 >= params_.approach_duration_s)
        transition(MissionPhase::kTrackLateralLeft);
      return;
    }

    // The guide line is indispensable in every contact phase; during a
    // switch either line keeps the vehicle localized.
    const bool blind = phase_ == MissionPhase::kSwitchUp
                           ? feats.n == 0
                           : !feats.has_horizontal;
    if (blind) {
      loss_time_ += dt;
      if (loss_time_ > params_.loss_fault_s) {
        transition(MissionPhase::kFault);
        return;
      }
    } else {
      loss_time_ = 0.0;
    }

    if (is_lateral(phase_)) {
      if (coverage >= params_.coverage_done) {
        transition(MissionPhase::kDone);
        return;
      }
      // Signed image x of the boundary line; positive on the travel side.
      if (feats.has_vertical) {
        const double xn =
            feats.vertical.rho * std::cos(feats.vertical.theta);
        const double g = xn * direction_;
        gate_streak_ =
            (g >= params_.gate_lo && g <= params_.gate_hi) ? gate_streak_ + 1
                                                           : 0;
      } else {
        gate_streak_ = 0;
      }
      if (gate_streak_ >= params_.gate_confirm) {
        ++passes_done_;
        transition(passes_done_ >= params_.passes ? MissionPhase::kDone
                                                  : MissionPhase::kSwitchUp);
      }
      return;
    }

    // SwitchUp: wait for the new guide line to reach the pass offset.
    if (feats.has_horizontal &&
        std::abs(rho_h - params_.rho_ref) < params_.switch_eps) {
      ++switch_streak_;
    } else {
      switch_streak_ = 0;
    }
    if (switch_streak_ >= params_.switch_confirm) {
      direction_ = -direction_;
      ++reversal_count_;
      transition(direction_ < 0 ? MissionPhase::kTrackLateralLeft
                                : MissionPhase::kTrackLateralRight);
    }
  }

 private:
  void transition(MissionPhase to) {
    if (to == MissionPhase::kSwitchUp) {
      tracker_reset_ = true;
      ++switch_count_;
    }
    phase_ = to;
    phase_changed_ = true;
    gate_streak_ = 0;
    switch_streak_ = 0;
    loss_time_ = 0.0;
  }

  MissionParams params_;
  MissionPhase phase_ = MissionPhase::kApproach;
  int direction_ = -1;  // first pass sweeps toward the lower lateral edge
  int passes_done_ = 0;
  int switch_count_ = 0;
  int reversal_count_ = 0;
  int gate_streak_ = 0;
  int switch_streak_ = 0;
  double loss_time_ = 0.0;
  bool tracker_reset_ = false;
  bool phase_changed_ = false;
};

}  // namespace hexpaint

#endif  // HEXPAINT_MISSION_HPP_
