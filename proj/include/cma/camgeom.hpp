#pragma once

// Pinhole ground-plane geometry for the three road-facing cameras.
//
// Axis convention (used everywhere in this project):
//   image:  x = column, y = row (down). The principal point is (v0, u0),
//           i.e. u0 is a ROW and v0 is a COLUMN.
//   ground: camera-aligned frame on the road plane, X lateral (positive
//           right), Z forward along the optical axis. The camera sits at
//           height H above a flat road with zero pitch.
//   3-D:    X right, Y down (road plane at Y = H), Z forward.

#include <Eigen/Core>

namespace cma {

struct CameraModel {
  double f = 160.0;   // focal length [px]
  double u0 = 120.0;  // principal-point row [px]
  double v0 = 160.0;  // principal-point column [px]
  double H = 1.5;     // mounting height [m]
  double yaw = 0.0;   // mounting yaw vs. vehicle axis [rad], positive right
  double lateral_offset = 0.0;  // mounting offset [m], positive right
  double forward_offset = 0.0;  // mount ahead of the vehicle reference [m]
  int image_w = 320;
  int image_h = 240;

  // Throws Error(kConfigInvalid) when an invariant is broken.
  void Validate() const;
};

struct GroundPoint {
  double X = 0.0;  // lateral [m], positive right
  double Z = 0.0;  // forward [m]
};

struct PixelPoint {
  double x = 0.0;  // column [px]
  double y = 0.0;  // row [px]
};

// Vehicle-frame ground coordinates: forward along the vehicle axis, lateral
// positive right, origin at the vehicle reference point.
struct VehiclePoint {
  double forward = 0.0;
  double lateral = 0.0;
};

GroundPoint PixelToGround(const PixelPoint& p, const CameraModel& cam);
PixelPoint GroundToPixel(const GroundPoint& g, const CameraModel& cam);

// Perpendicular distance from the frame origin to the line through two
// ground points. The pixel overloads lift both pixels with PixelToGround.
double LaneDistance(const GroundPoint& m, const GroundPoint& b);
double LaneDistance(const PixelPoint& pm, const PixelPoint& pb,
                    const CameraModel& cam);

// arctan((X_b - X_m) / (Z_b - Z_m)) with the far point taken as "b".
double VehicleLaneAngle(const GroundPoint& m, const GroundPoint& b);
double VehicleLaneAngle(const PixelPoint& pm, const PixelPoint& pb,
                        const CameraModel& cam);

double ObstacleDistance(double o_y, const CameraModel& cam);

// Lift to the road plane, apply P' = R*P + T in camera coordinates,
// reproject. Only point positions are transformed, never image content.
PixelPoint ViewpointTransform(const PixelPoint& p, const CameraModel& cam,
                              const Eigen::Matrix3d& R,
                              const Eigen::Vector3d& T);

// Rotation about the vertical (Y) axis that swings points toward +X:
// (X, Z) -> (X cos a + Z sin a, -X sin a + Z cos a).
Eigen::Matrix3d YawRotation(double angle);

// Rigid mounting transforms between the camera ground frame and the vehicle
// frame (yaw + mounting offsets).
VehiclePoint CameraToVehicle(const GroundPoint& g, const CameraModel& cam);
GroundPoint VehicleToCamera(const VehiclePoint& v, const CameraModel& cam);

// Depth seen by the given image row (ground plane), and the inverse.
inline double RowDepth(double row, const CameraModel& cam) {
  return ObstacleDistance(row, cam);
}
double DepthRow(double depth, const CameraModel& cam);

}  // namespace cma
