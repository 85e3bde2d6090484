#include "cma/camgeom.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "cma/error.hpp"

namespace cma {
namespace {

constexpr double kDegenerateTolerance = 1e-9;  // [m]

void CheckDistinct(const GroundPoint& m, const GroundPoint& b) {
  if (std::hypot(b.X - m.X, b.Z - m.Z) <= kDegenerateTolerance) {
    throw Error(ErrorCode::kDegenerateBoundary,
                "boundary points coincide on the ground plane");
  }
}

}  // namespace

void CameraModel::Validate() const {
  if (!(f > 0.0)) throw Error(ErrorCode::kConfigInvalid, "camera f must be > 0");
  if (!(H > 0.0)) throw Error(ErrorCode::kConfigInvalid, "camera H must be > 0");
  if (image_w <= 0 || image_h <= 0) {
    throw Error(ErrorCode::kConfigInvalid, "camera image size must be > 0");
  }
  if (!(u0 >= 0.0 && u0 < image_h)) {
    throw Error(ErrorCode::kConfigInvalid, "camera u0 must lie in [0, image_h)");
  }
  if (!(v0 >= 0.0 && v0 < image_w)) {
    throw Error(ErrorCode::kConfigInvalid, "camera v0 must lie in [0, image_w)");
  }
}

GroundPoint PixelToGround(const PixelPoint& p, const CameraModel& cam) {
  const double dy = p.y - cam.u0;
  if (!(dy > 0.0)) {
    throw Error(ErrorCode::kHorizonViolation,
                "row " + std::to_string(p.y) + " is at or above the horizon");
  }
  return {(p.x - cam.v0) * cam.H / dy, cam.f * cam.H / dy};
}

PixelPoint GroundToPixel(const GroundPoint& g, const CameraModel& cam) {
  if (!(g.Z > 0.0)) {
    throw Error(ErrorCode::kNonPositiveDepth,
                "depth " + std::to_string(g.Z) + " is not in front of the camera");
  }
  return {cam.v0 + cam.f * g.X / g.Z, cam.u0 + cam.f * cam.H / g.Z};
}

double LaneDistance(const GroundPoint& m, const GroundPoint& b) {
  CheckDistinct(m, b);
  return std::abs(m.X * b.Z - b.X * m.Z) / std::hypot(b.X - m.X, b.Z - m.Z);
}

double LaneDistance(const PixelPoint& pm, const PixelPoint& pb,
                    const CameraModel& cam) {
  return LaneDistance(PixelToGround(pm, cam), PixelToGround(pb, cam));
}

double VehicleLaneAngle(const GroundPoint& m, const GroundPoint& b) {
  CheckDistinct(m, b);
  GroundPoint near = m;
  GroundPoint far = b;
  if (far.Z < near.Z) std::swap(near, far);
  // A boundary running exactly sideways has no defined angle sign; atan of
  // +/-inf still yields +/-pi/2 which is the limit from either side.
  return std::atan((far.X - near.X) / (far.Z - near.Z));
}

double VehicleLaneAngle(const PixelPoint& pm, const PixelPoint& pb,
                        const CameraModel& cam) {
  return VehicleLaneAngle(PixelToGround(pm, cam), PixelToGround(pb, cam));
}

double ObstacleDistance(double o_y, const CameraModel& cam) {
  const double dy = o_y - cam.u0;
  if (!(dy > 0.0)) {
    throw Error(ErrorCode::kHorizonViolation,
                "obstacle row " + std::to_string(o_y) + " is above the horizon");
  }
  return cam.f * cam.H / dy;
}

double DepthRow(double depth, const CameraModel& cam) {
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::kNonPositiveDepth, "depth must be positive");
  }
  return cam.u0 + cam.f * cam.H / depth;
}

PixelPoint ViewpointTransform(const PixelPoint& p, const CameraModel& cam,
                              const Eigen::Matrix3d& R,
                              const Eigen::Vector3d& T) {
  const GroundPoint g = PixelToGround(p, cam);
  const Eigen::Vector3d P(g.X, cam.H, g.Z);
  const Eigen::Vector3d Q = R * P + T;
  if (!(Q.z() > 0.0)) {
    throw Error(ErrorCode::kNonPositiveDepth,
                "transformed point is behind the virtual camera");
  }
  return {cam.v0 + cam.f * Q.x() / Q.z(), cam.u0 + cam.f * Q.y() / Q.z()};
}

Eigen::Matrix3d YawRotation(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d R;
  R << c, 0.0, s,
       0.0, 1.0, 0.0,
       -s, 0.0, c;
  return R;
}

VehiclePoint CameraToVehicle(const GroundPoint& g, const CameraModel& cam) {
  const double c = std::cos(cam.yaw);
  const double s = std::sin(cam.yaw);
  return {cam.forward_offset + g.Z * c - g.X * s,
          cam.lateral_offset + g.Z * s + g.X * c};
}

GroundPoint VehicleToCamera(const VehiclePoint& v, const CameraModel& cam) {
  const double c = std::cos(cam.yaw);
  const double s = std::sin(cam.yaw);
  const double fwd = v.forward - cam.forward_offset;
  const double lat = v.lateral - cam.lateral_offset;
  return {-fwd * s + lat * c, fwd * c + lat * s};
}

}  // namespace cma
