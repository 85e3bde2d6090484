#include "cma/cogmap.hpp"

#include <algorithm>
#include <cmath>

#include "cma/error.hpp"

namespace cma {

std::string_view ToString(NavigationCommand command) {
  switch (command) {
    case NavigationCommand::kStayInLane: return "StayInLane";
    case NavigationCommand::kChangeToLeft: return "ChangeToLeft";
    case NavigationCommand::kChangeToRight: return "ChangeToRight";
  }
  return "Unknown";
}

std::string_view ToString(DrivingIntention intention) {
  switch (intention) {
    case DrivingIntention::kStayInLane: return "StayInLane";
    case DrivingIntention::kChangeToLeft: return "ChangeToLeft";
    case DrivingIntention::kChangeToRight: return "ChangeToRight";
    case DrivingIntention::kBrakeAndStayInLane: return "BrakeAndStayInLane";
  }
  return "Unknown";
}

std::optional<NavigationCommand> ParseNavigationCommand(std::string_view name) {
  for (auto c : {NavigationCommand::kStayInLane, NavigationCommand::kChangeToLeft,
                 NavigationCommand::kChangeToRight}) {
    if (ToString(c) == name) return c;
  }
  return std::nullopt;
}

std::optional<DrivingIntention> ParseDrivingIntention(std::string_view name) {
  for (auto i : {DrivingIntention::kStayInLane, DrivingIntention::kChangeToLeft,
                 DrivingIntention::kChangeToRight,
                 DrivingIntention::kBrakeAndStayInLane}) {
    if (ToString(i) == name) return i;
  }
  return std::nullopt;
}

DrivingIntention DeriveIntention(NavigationCommand g, double O_C, double O_L,
                                 double O_R, double safety) {
  using enum NavigationCommand;
  if (g == kStayInLane && O_C >= safety) {
    return DrivingIntention::kStayInLane;
  } else if (g == kStayInLane && O_C <= safety) {
    if (O_L >= safety) {
      return DrivingIntention::kChangeToLeft;
    } else if (O_R >= safety) {
      return DrivingIntention::kChangeToRight;
    } else {
      return DrivingIntention::kBrakeAndStayInLane;
    }
  } else if (g == kChangeToLeft && O_L >= safety) {
    return DrivingIntention::kChangeToLeft;
  } else if (g == kChangeToRight && O_R >= safety) {
    return DrivingIntention::kChangeToRight;
  }
  return DrivingIntention::kBrakeAndStayInLane;
}

DrivingIntention DeriveIntention(NavigationCommand g, const LaneMeasurements& m,
                                 double safety) {
  const double O_L = m.left_lane_present ? m.O_L_line : 0.0;
  const double O_R = m.right_lane_present ? m.O_R_line : 0.0;
  return DeriveIntention(g, m.O_C_line, O_L, O_R, safety);
}

double SafetyDistance(const SafetyParams& params, double speed) {
  return std::max(params.min_distance, params.time_headway * speed);
}

CognitiveMap BuildMap(const PerceptionVector& Xm, const PerceptionVector& Xl,
                      const PerceptionVector& Xr, DrivingIntention intention,
                      const VehicleStateRecord& vstate, double D_o) {
  if (!std::isfinite(D_o)) {
    throw Error(ErrorCode::kConfigInvalid, "cognitive map D_o must be finite");
  }
  return CognitiveMap{Xm, Xl, Xr, intention, vstate, D_o};
}

}  // namespace cma
