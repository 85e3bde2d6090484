#pragma once

// Synthetic perception oracle. It stands where a learned image regressor
// would: given ground truth it emits, per camera, the five-point perception
// vector (boundary edge intersections + obstacle row), and it turns those
// vectors back into metric lane measurements through camgeom.

#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>

#include "cma/camgeom.hpp"
#include "cma/world.hpp"

namespace cma {

enum class CameraSlot { kLeft, kMiddle, kRight };
std::string_view CameraSlotName(CameraSlot slot);

struct CameraRig {
  CameraModel left;
  CameraModel middle;
  CameraModel right;

  const CameraModel& at(CameraSlot slot) const;

  // Identical intrinsics, side cameras yawed by -/+ side_yaw.
  static CameraRig Symmetric(const CameraModel& base, double side_yaw);
};

struct PerceptionVector {
  double p_l_t = 0.0;  // left boundary x at row 0
  double p_l_b = 0.0;  // left boundary x at row image_h - 1
  double p_r_t = 0.0;
  double p_r_b = 0.0;
  std::optional<double> p_o;  // obstacle row; nullopt = no obstacle in range
  bool lane_present = true;
};

struct PerceptionOptions {
  double noise_sigma = 0.0;      // [px], i.i.d. on all five values
  double max_range = 200.0;      // [m]
  // The middle camera reports the union of two lanes while the vehicle
  // reference point is within this distance of a lane boundary.
  double straddle_half_width = 0.9;  // [m]
};

// Inclusive lane index range a camera reports. Empty when lo > hi.
struct LaneSpan {
  int lo = 0;
  int hi = -1;
  bool empty() const { return lo > hi; }
};
LaneSpan DesignatedLanes(const WorldState& world, CameraSlot slot,
                         const PerceptionOptions& options);

// Deterministic given seed. A missing lane is not an error: the returned
// vector has lane_present = false.
PerceptionVector Perceive(const WorldState& world, const CameraModel& cam,
                          CameraSlot slot, const PerceptionOptions& options,
                          std::uint64_t seed);

struct LaneMeasurements {
  std::optional<double> D_m_left, D_m_right;
  std::optional<double> D_l_left, D_l_right;
  std::optional<double> D_r_left, D_r_right;
  // Vehicle heading relative to the lane direction, positive when the nose
  // points right of the lane (the negated boundary angle).
  std::optional<double> V_a;
  // Distance along the vehicle axis from the camera mount to the obstacle's
  // lane-centre point; +inf when nothing is in range.
  double O_C_line = kNoObstacle;
  double O_L_line = kNoObstacle;
  double O_R_line = kNoObstacle;
  bool left_lane_present = true;
  bool right_lane_present = true;

  static constexpr double kNoObstacle =
      std::numeric_limits<double>::infinity();
};

LaneMeasurements MeasurementsFrom(const PerceptionVector& Xm,
                                  const PerceptionVector& Xl,
                                  const PerceptionVector& Xr,
                                  const CameraRig& cams);

// x of the boundary line stored as (top, bottom) at an arbitrary row.
double BoundaryXAtRow(double x_top, double x_bottom, double row,
                      const CameraModel& cam);

}  // namespace cma
