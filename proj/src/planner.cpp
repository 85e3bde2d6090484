#include "cma/planner.hpp"

#include <cmath>
#include <utility>

namespace cma {
namespace {

PlanResult Lanekeep(const LaneMeasurements& m) {
  PlanResult r;
  if (m.D_m_left && m.D_m_right) {
    r.D_o = 0.5 * (*m.D_m_right - *m.D_m_left);
  } else {
    r.missing_lane = true;
  }
  return r;
}

// Right-change logic; left changes run it on mirrored measurements and flip
// the sign of D_o on the way out.
PlanResult ContinueRightChange(const ManeuverState& state,
                               const LaneMeasurements& m,
                               const PlannerConfig& config) {
  PlanResult r;
  r.next = state;
  if (!m.D_m_left || !m.D_m_right) {
    r.missing_lane = true;
    return r;
  }
  const double d = state.d;
  const double width = *m.D_m_left + *m.D_m_right;
  const bool straddling = width > config.boundary_ratio * d;

  if (state.phase == ManeuverPhase::kChangingInLane) {
    const bool same_boundary =
        m.D_r_right &&
        std::abs(*m.D_m_right - *m.D_r_right) <= config.boundary_tolerance;
    if (same_boundary || straddling) {
      r.next.phase = ManeuverPhase::kChangingOnBoundary;
      r.D_o = *m.D_m_right - d / 2.0;
    } else if (m.D_r_right) {
      r.D_o = *m.D_r_right - d / 2.0;
    } else {
      // Right camera lost the lane mid-change; its near boundary is ours.
      r.D_o = *m.D_m_right + d / 2.0;
    }
    return r;
  }

  if (straddling) {
    r.D_o = *m.D_m_right - d / 2.0;
    return r;
  }
  PlanResult done = Lanekeep(m);
  done.completed = true;
  return done;
}

PlanResult StartRightChange(ManeuverDirection direction,
                            const LaneMeasurements& m) {
  if (!m.D_r_left || !m.D_r_right || *m.D_r_right <= *m.D_r_left) {
    PlanResult r = Lanekeep(m);
    r.missing_lane = true;
    return r;
  }
  PlanResult r;
  const double d = *m.D_r_right - *m.D_r_left;
  r.next = {ManeuverPhase::kChangingInLane, direction, d};
  r.D_o = *m.D_r_right - d / 2.0;
  return r;
}

}  // namespace

std::string_view ToString(ManeuverPhase phase) {
  switch (phase) {
    case ManeuverPhase::kLanekeep: return "Lanekeep";
    case ManeuverPhase::kChangingInLane: return "ChangingInLane";
    case ManeuverPhase::kChangingOnBoundary: return "ChangingOnBoundary";
  }
  return "Unknown";
}

std::string_view ToString(ManeuverDirection direction) {
  switch (direction) {
    case ManeuverDirection::kNone: return "None";
    case ManeuverDirection::kLeft: return "Left";
    case ManeuverDirection::kRight: return "Right";
  }
  return "Unknown";
}

LaneMeasurements Mirror(const LaneMeasurements& m) {
  LaneMeasurements out = m;
  out.D_m_left = m.D_m_right;
  out.D_m_right = m.D_m_left;
  out.D_l_left = m.D_r_right;
  out.D_l_right = m.D_r_left;
  out.D_r_left = m.D_l_right;
  out.D_r_right = m.D_l_left;
  if (m.V_a) out.V_a = -*m.V_a;
  out.O_L_line = m.O_R_line;
  out.O_R_line = m.O_L_line;
  out.left_lane_present = m.right_lane_present;
  out.right_lane_present = m.left_lane_present;
  return out;
}

PlanResult Plan(const ManeuverState& state, DrivingIntention intent,
                const LaneMeasurements& m, const PlannerConfig& config) {
  ManeuverDirection direction = state.direction;
  if (!state.active()) {
    if (intent == DrivingIntention::kChangeToRight) {
      direction = ManeuverDirection::kRight;
    } else if (intent == DrivingIntention::kChangeToLeft) {
      direction = ManeuverDirection::kLeft;
    } else {
      return Lanekeep(m);
    }
  }

  const bool left = direction == ManeuverDirection::kLeft;
  const LaneMeasurements view = left ? Mirror(m) : m;
  PlanResult r = state.active() ? ContinueRightChange(state, view, config)
                                : StartRightChange(direction, view);
  if (left) r.D_o = -r.D_o;
  return r;
}

}  // namespace cma
