#pragma once

// Ground-truth world description shared by the perception oracle, the
// simulator and the metrics.
//
// Road frame: x along the road, y lateral measured from the road's left edge
// and positive to the right. Heading psi is measured from the road axis and
// is positive when the nose points right; positive steering turns right.
// Lanes are numbered 0 (leftmost) .. num_lanes-1.

#include <vector>

#include "cma/camgeom.hpp"

namespace cma {

struct Road {
  int num_lanes = 2;
  double lane_width = 3.5;  // [m]
  double length = 1000.0;   // [m]

  double Width() const { return num_lanes * lane_width; }
  double LaneLeft(int lane) const { return lane * lane_width; }
  double LaneRight(int lane) const { return (lane + 1) * lane_width; }
  double LaneCenter(int lane) const { return (lane + 0.5) * lane_width; }
  bool HasLane(int lane) const { return lane >= 0 && lane < num_lanes; }
  // Lane containing lateral position y, clamped to the road.
  int LaneAt(double y) const;
};

struct VehicleGeometry {
  double wheelbase = 2.6;      // [m]
  double length = 4.3;         // [m]
  double width = 1.8;          // [m]
  double rear_overhang = 0.85; // reference point (rear axle) to rear bumper
};

struct VehicleState {
  double x = 0.0;         // [m] along road
  double y = 0.0;         // [m] lateral
  double psi = 0.0;       // [rad]
  double v = 0.0;         // [m/s]
  double steering = 0.0;  // [rad] currently applied road-wheel angle
};

struct Obstacle {
  int lane = 0;
  double x = 0.0;  // rear face position along the road [m]
  double appear_time = 0.0;
  bool is_static = true;
  double length = 4.3;
  double width = 1.8;

  bool ActiveAt(double t) const { return t >= appear_time; }
};

struct WorldState {
  double t = 0.0;
  VehicleState vehicle;
  Road road;
  VehicleGeometry geometry;
  std::vector<Obstacle> obstacles;
};

// Road-frame point expressed in the vehicle frame, and back.
struct RoadPoint {
  double x = 0.0;
  double y = 0.0;
};
VehiclePoint RoadToVehicle(const VehicleState& v, const RoadPoint& p);
RoadPoint VehicleToRoad(const VehicleState& v, const VehiclePoint& p);

}  // namespace cma
