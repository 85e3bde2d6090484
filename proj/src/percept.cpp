#include "cma/percept.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "cma/error.hpp"

namespace cma {
namespace {

// Depths at which a boundary is sampled before extending it to the edges.
constexpr double kNearSampleDepth = 10.0;
constexpr double kFarSampleDepth = 40.0;

struct BoundaryPixels {
  double x_top = 0.0;
  double x_bottom = 0.0;
};

// Projects the road line y = boundary_y and extends it to rows 0 and h-1.
std::optional<BoundaryPixels> ProjectBoundary(const WorldState& world,
                                              const CameraModel& cam,
                                              double boundary_y) {
  const VehicleState& v = world.vehicle;
  const GroundPoint g0 =
      VehicleToCamera(RoadToVehicle(v, {v.x, boundary_y}), cam);
  const GroundPoint g1 =
      VehicleToCamera(RoadToVehicle(v, {v.x + 1.0, boundary_y}), cam);
  const double dX = g1.X - g0.X;
  const double dZ = g1.Z - g0.Z;
  if (dZ <= 1e-9) return std::nullopt;  // line never recedes from the camera

  auto at_depth = [&](double z) {
    const double s = (z - g0.Z) / dZ;
    return GroundToPixel({g0.X + s * dX, z}, cam);
  };
  const PixelPoint a = at_depth(kNearSampleDepth);
  const PixelPoint b = at_depth(kFarSampleDepth);
  const double slope = (b.x - a.x) / (b.y - a.y);
  return BoundaryPixels{a.x + (0.0 - a.y) * slope,
                        a.x + (cam.image_h - 1 - a.y) * slope};
}

std::optional<double> ObstacleRow(const WorldState& world,
                                  const CameraModel& cam, const LaneSpan& span,
                                  double max_range) {
  double best_forward = std::numeric_limits<double>::infinity();
  double best_depth = 0.0;
  for (const Obstacle& ob : world.obstacles) {
    if (!ob.ActiveAt(world.t) || ob.lane < span.lo || ob.lane > span.hi) {
      continue;
    }
    const VehiclePoint p =
        RoadToVehicle(world.vehicle, {ob.x, world.road.LaneCenter(ob.lane)});
    const double ahead = p.forward - cam.forward_offset;
    if (ahead <= 0.0 || ahead > max_range) continue;
    const GroundPoint g = VehicleToCamera(p, cam);
    if (g.Z <= 0.0) continue;
    if (ahead < best_forward) {
      best_forward = ahead;
      best_depth = g.Z;
    }
  }
  if (!std::isfinite(best_forward)) return std::nullopt;
  // Anything nearer than the bottom row sits on the bottom edge.
  return std::min(DepthRow(best_depth, cam), cam.image_h - 1.0);
}

struct BoundaryReading {
  std::optional<double> distance;
  std::optional<double> angle;
};

BoundaryReading ReadBoundary(double x_top, double x_bottom,
                             const CameraModel& cam) {
  const double row_b = cam.image_h - 1.0;
  const double row_m = 0.5 * (cam.u0 + row_b);
  try {
    const PixelPoint pm{BoundaryXAtRow(x_top, x_bottom, row_m, cam), row_m};
    const PixelPoint pb{x_bottom, row_b};
    const VehiclePoint vm = CameraToVehicle(PixelToGround(pm, cam), cam);
    const VehiclePoint vb = CameraToVehicle(PixelToGround(pb, cam), cam);
    const GroundPoint m{vm.lateral, vm.forward};
    const GroundPoint b{vb.lateral, vb.forward};
    return {LaneDistance(m, b), VehicleLaneAngle(m, b)};
  } catch (const Error&) {
    return {};
  }
}

double ObstacleReading(const PerceptionVector& X, const CameraModel& cam) {
  if (!X.lane_present || !X.p_o) return LaneMeasurements::kNoObstacle;
  double depth = 0.0;
  try {
    depth = ObstacleDistance(*X.p_o, cam);
  } catch (const Error&) {
    return LaneMeasurements::kNoObstacle;
  }
  // The obstacle point is taken on the lane centre line at its row.
  const double x_mid = 0.5 * (BoundaryXAtRow(X.p_l_t, X.p_l_b, *X.p_o, cam) +
                              BoundaryXAtRow(X.p_r_t, X.p_r_b, *X.p_o, cam));
  const GroundPoint g{(x_mid - cam.v0) * depth / cam.f, depth};
  return std::max(0.0, CameraToVehicle(g, cam).forward - cam.forward_offset);
}

}  // namespace

std::string_view CameraSlotName(CameraSlot slot) {
  switch (slot) {
    case CameraSlot::kLeft: return "left";
    case CameraSlot::kMiddle: return "middle";
    case CameraSlot::kRight: return "right";
  }
  return "unknown";
}

const CameraModel& CameraRig::at(CameraSlot slot) const {
  switch (slot) {
    case CameraSlot::kLeft: return left;
    case CameraSlot::kRight: return right;
    case CameraSlot::kMiddle: break;
  }
  return middle;
}

CameraRig CameraRig::Symmetric(const CameraModel& base, double side_yaw) {
  CameraRig rig{base, base, base};
  rig.middle.yaw = 0.0;
  rig.left.yaw = -side_yaw;
  rig.right.yaw = side_yaw;
  return rig;
}

LaneSpan DesignatedLanes(const WorldState& world, CameraSlot slot,
                         const PerceptionOptions& options) {
  const Road& road = world.road;
  const double y = world.vehicle.y;
  const int k = road.LaneAt(y);
  LaneSpan middle{k, k};
  if (y - road.LaneLeft(k) < options.straddle_half_width && k > 0) {
    middle = {k - 1, k};
  } else if (road.LaneRight(k) - y < options.straddle_half_width &&
             k < road.num_lanes - 1) {
    middle = {k, k + 1};
  }
  LaneSpan span = middle;
  if (slot == CameraSlot::kLeft) span = {middle.lo - 1, middle.lo - 1};
  if (slot == CameraSlot::kRight) span = {middle.hi + 1, middle.hi + 1};
  if (!road.HasLane(span.lo) || !road.HasLane(span.hi)) return {};
  return span;
}

PerceptionVector Perceive(const WorldState& world, const CameraModel& cam,
                          CameraSlot slot, const PerceptionOptions& options,
                          std::uint64_t seed) {
  PerceptionVector X;
  const LaneSpan span = DesignatedLanes(world, slot, options);
  std::optional<BoundaryPixels> left, right;
  if (!span.empty()) {
    left = ProjectBoundary(world, cam, world.road.LaneLeft(span.lo));
    right = ProjectBoundary(world, cam, world.road.LaneRight(span.hi));
  }
  if (!left || !right) {
    X.lane_present = false;
    return X;
  }
  X.p_l_t = left->x_top;
  X.p_l_b = left->x_bottom;
  X.p_r_t = right->x_top;
  X.p_r_b = right->x_bottom;
  X.p_o = ObstacleRow(world, cam, span, options.max_range);

  if (options.noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, options.noise_sigma);
    X.p_l_t += noise(rng);
    X.p_l_b += noise(rng);
    X.p_r_t += noise(rng);
    X.p_r_b += noise(rng);
    const double n_o = noise(rng);
    if (X.p_o) *X.p_o += n_o;
  }
  return X;
}

double BoundaryXAtRow(double x_top, double x_bottom, double row,
                      const CameraModel& cam) {
  return x_top + (x_bottom - x_top) * row / (cam.image_h - 1.0);
}

LaneMeasurements MeasurementsFrom(const PerceptionVector& Xm,
                                  const PerceptionVector& Xl,
                                  const PerceptionVector& Xr,
                                  const CameraRig& cams) {
  LaneMeasurements m;
  if (Xm.lane_present) {
    const BoundaryReading left = ReadBoundary(Xm.p_l_t, Xm.p_l_b, cams.middle);
    const BoundaryReading right = ReadBoundary(Xm.p_r_t, Xm.p_r_b, cams.middle);
    m.D_m_left = left.distance;
    m.D_m_right = right.distance;
    if (left.angle) m.V_a = -*left.angle;
  }
  if (Xl.lane_present) {
    m.D_l_left = ReadBoundary(Xl.p_l_t, Xl.p_l_b, cams.left).distance;
    m.D_l_right = ReadBoundary(Xl.p_r_t, Xl.p_r_b, cams.left).distance;
  }
  if (Xr.lane_present) {
    m.D_r_left = ReadBoundary(Xr.p_l_t, Xr.p_l_b, cams.right).distance;
    m.D_r_right = ReadBoundary(Xr.p_r_t, Xr.p_r_b, cams.right).distance;
  }
  m.left_lane_present = Xl.lane_present;
  m.right_lane_present = Xr.lane_present;
  m.O_C_line = ObstacleReading(Xm, cams.middle);
  m.O_L_line = ObstacleReading(Xl, cams.left);
  m.O_R_line = ObstacleReading(Xr, cams.right);
  return m;
}

}  // namespace cma
