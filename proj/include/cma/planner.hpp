#pragma once

// Lane-change state machine. It turns the driving intention and the lane
// measurements into D_o, the signed lateral distance to the target path
// centre line (positive = target to the right), and tracks a maneuver from
// start until the middle camera sees a single lane again.

#include <optional>
#include <string_view>

#include "cma/cogmap.hpp"
#include "cma/percept.hpp"

namespace cma {

enum class ManeuverPhase { kLanekeep, kChangingInLane, kChangingOnBoundary };
enum class ManeuverDirection { kNone, kLeft, kRight };

std::string_view ToString(ManeuverPhase phase);
std::string_view ToString(ManeuverDirection direction);

struct ManeuverState {
  ManeuverPhase phase = ManeuverPhase::kLanekeep;
  ManeuverDirection direction = ManeuverDirection::kNone;
  double d = 0.0;  // target-lane width captured at maneuver start [m]

  bool active() const { return phase != ManeuverPhase::kLanekeep; }
};

struct PlannerConfig {
  // Middle-camera apparent width above boundary_ratio * d means the vehicle
  // straddles the boundary.
  double boundary_ratio = 1.5;
  // |D_m_right - D_r_right| below this counts as the same boundary.
  double boundary_tolerance = 0.2;  // [m]
};

struct PlanResult {
  double D_o = 0.0;
  ManeuverState next;
  bool completed = false;
  // Set when a change was requested but the target lane is not measured.
  bool missing_lane = false;
};

PlanResult Plan(const ManeuverState& state, DrivingIntention intent,
                const LaneMeasurements& m, const PlannerConfig& config = {});

// Left/right exchange: D_m_* swap, D_l_* <-> D_r_* pairwise (far with far,
// near with near), obstacle distances swap and V_a changes sign. An
// involution.
LaneMeasurements Mirror(const LaneMeasurements& m);

}  // namespace cma
