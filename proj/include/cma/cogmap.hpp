#pragma once

#include <optional>
#include <string_view>

#include "cma/percept.hpp"

namespace cma {

enum class NavigationCommand { kStayInLane, kChangeToLeft, kChangeToRight };

enum class DrivingIntention {
  kStayInLane,
  kChangeToLeft,
  kChangeToRight,
  kBrakeAndStayInLane,
};

std::string_view ToString(NavigationCommand command);
std::string_view ToString(DrivingIntention intention);
std::optional<NavigationCommand> ParseNavigationCommand(std::string_view name);
std::optional<DrivingIntention> ParseDrivingIntention(std::string_view name);

struct VehicleStateRecord {
  double speed = 0.0;          // [m/s]
  double yaw_rate = 0.0;       // [rad/s]
  double prev_steering = 0.0;  // [rad]
};

struct CognitiveMap {
  PerceptionVector Xm, Xl, Xr;
  DrivingIntention intention = DrivingIntention::kStayInLane;
  VehicleStateRecord vstate;
  double D_o = 0.0;  // signed target offset [m], positive = target to the right
};

// Navigation-conditioned intention from obstacle distances. Branch order and
// the >= comparisons follow the intention table exactly: the first matching
// branch wins, so O_C == safety keeps the lane.
DrivingIntention DeriveIntention(NavigationCommand g, double O_C, double O_L,
                                 double O_R, double safety);

// Same, reading distances from measurements. A missing adjacent lane is fed
// in as distance 0 so a change into it is never chosen.
DrivingIntention DeriveIntention(NavigationCommand g, const LaneMeasurements& m,
                                 double safety);

struct SafetyParams {
  double min_distance = 15.0;  // [m]
  double time_headway = 2.0;   // [s]
};
double SafetyDistance(const SafetyParams& params, double speed);

CognitiveMap BuildMap(const PerceptionVector& Xm, const PerceptionVector& Xl,
                      const PerceptionVector& Xr, DrivingIntention intention,
                      const VehicleStateRecord& vstate, double D_o);

}  // namespace cma
