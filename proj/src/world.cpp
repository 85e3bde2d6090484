#include "cma/world.hpp"

#include <algorithm>
#include <cmath>

namespace cma {

int Road::LaneAt(double y) const {
  const int lane = static_cast<int>(std::floor(y / lane_width));
  return std::clamp(lane, 0, num_lanes - 1);
}

VehiclePoint RoadToVehicle(const VehicleState& v, const RoadPoint& p) {
  const double dx = p.x - v.x;
  const double dy = p.y - v.y;
  const double c = std::cos(v.psi);
  const double s = std::sin(v.psi);
  return {dx * c + dy * s, -dx * s + dy * c};
}

RoadPoint VehicleToRoad(const VehicleState& v, const VehiclePoint& p) {
  const double c = std::cos(v.psi);
  const double s = std::sin(v.psi);
  return {v.x + p.forward * c - p.lateral * s,
          v.y + p.forward * s + p.lateral * c};
}

}  // namespace cma
