#include "cma/camgeom.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "cma/error.hpp"
#include "gtest/gtest.h"

namespace cma {
namespace {

// Distance from the origin to the line through m and b via the foot of the
// perpendicular, in long double. Independent of the cross-product form.
long double FootDistance(const GroundPoint& m, const GroundPoint& b) {
  const long double ux = static_cast<long double>(b.X) - m.X;
  const long double uz = static_cast<long double>(b.Z) - m.Z;
  const long double t = -(m.X * ux + m.Z * uz) / (ux * ux + uz * uz);
  const long double fx = m.X + t * ux;
  const long double fz = m.Z + t * uz;
  return std::sqrt(fx * fx + fz * fz);
}

ErrorCode CodeOf(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIoError;
}

TEST(CamGeom, PixelToGroundDefaultCamera) {
  const CameraModel cam;
  const GroundPoint g = PixelToGround({188.0, 144.0}, cam);
  EXPECT_NEAR(g.X, 1.75, 1e-12);
  EXPECT_NEAR(g.Z, 10.0, 1e-12);

  // Round-trip oracle for the same point.
  const PixelPoint p = GroundToPixel({1.75, 10.0}, cam);
  EXPECT_NEAR(p.x, 188.0, 1e-12);
  EXPECT_NEAR(p.y, 144.0, 1e-12);
}

TEST(CamGeom, PrincipalColumnMapsToAxis) {
  const CameraModel cam;
  for (double Z : {4.0, 10.0, 37.5, 80.0}) {
    const GroundPoint g = PixelToGround({cam.v0, cam.u0 + cam.f * cam.H / Z}, cam);
    EXPECT_EQ(g.X, 0.0);
    EXPECT_NEAR(g.Z, Z, 1e-12);
    EXPECT_EQ(GroundToPixel({0.0, Z}, cam).x, cam.v0);
  }
}

TEST(CamGeom, HorizonAndDepthErrors) {
  const CameraModel cam;
  EXPECT_EQ(CodeOf([&] { PixelToGround({160.0, 120.0}, cam); }),
            ErrorCode::kHorizonViolation);
  EXPECT_EQ(CodeOf([&] { PixelToGround({160.0, 80.0}, cam); }),
            ErrorCode::kHorizonViolation);
  EXPECT_EQ(CodeOf([&] { GroundToPixel({1.75, -5.0}, cam); }),
            ErrorCode::kNonPositiveDepth);
  EXPECT_EQ(CodeOf([&] { ObstacleDistance(110.0, cam); }),
            ErrorCode::kHorizonViolation);
}

TEST(CamGeom, RoundTripProperty) {
  const CameraModel cam;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lateral(-8.0, 8.0), depth(4.0, 80.0);
  for (int k = 0; k < 1000; ++k) {
    const GroundPoint g{lateral(rng), depth(rng)};
    const GroundPoint back = PixelToGround(GroundToPixel(g, cam), cam);
    EXPECT_NEAR(back.X, g.X, 1e-9);
    EXPECT_NEAR(back.Z, g.Z, 1e-9);
  }
}

TEST(CamGeom, LaneDistanceExamples) {
  EXPECT_NEAR(LaneDistance(GroundPoint{1.75, 5.0}, GroundPoint{1.75, 20.0}), 1.75, 1e-12);
  EXPECT_EQ(LaneDistance(GroundPoint{0.0, 5.0}, GroundPoint{0.0, 20.0}), 0.0);
  // Line through (2, 10) at 0.1 rad: the foot-of-perpendicular distance is
  // 2 cos(0.1) - 10 sin(0.1), not 2 cos(0.1).
  const GroundPoint m{2.0, 10.0};
  const GroundPoint b{2.0 + std::tan(0.1) * 10.0, 20.0};
  const double expected = static_cast<double>(FootDistance(m, b));
  EXPECT_NEAR(expected, 2.0 * std::cos(0.1) - 10.0 * std::sin(0.1), 1e-12);
  EXPECT_NEAR(LaneDistance(m, b), expected, 1e-12);
  // The same tilted line anchored at (2, 0) is 2 cos(0.1) away.
  const GroundPoint m0{2.0 + std::tan(0.1) * 10.0, 10.0};
  const GroundPoint b0{2.0 + std::tan(0.1) * 20.0, 20.0};
  EXPECT_NEAR(LaneDistance(m0, b0), 2.0 * std::cos(0.1), 1e-12);
  EXPECT_NEAR(LaneDistance(m0, b0), 1.99001, 1e-5);
}

TEST(CamGeom, LaneDistanceMatchesFootOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lateral(-8.0, 8.0), depth(4.0, 80.0);
  for (int k = 0; k < 1000; ++k) {
    const GroundPoint m{lateral(rng), depth(rng)};
    const GroundPoint b{lateral(rng), depth(rng)};
    EXPECT_NEAR(LaneDistance(m, b), static_cast<double>(FootDistance(m, b)), 1e-12);
  }
}

TEST(CamGeom, LaneDistanceFromPixelsUsesGroundLift) {
  const CameraModel cam;
  const PixelPoint pm = GroundToPixel({1.75, 5.0}, cam);
  const PixelPoint pb = GroundToPixel({1.75, 20.0}, cam);
  EXPECT_NEAR(LaneDistance(pm, pb, cam), 1.75, 1e-12);
  EXPECT_NEAR(VehicleLaneAngle(pm, pb, cam), 0.0, 1e-12);
}

TEST(CamGeom, DegenerateBoundary) {
  const GroundPoint p{1.0, 10.0};
  EXPECT_EQ(CodeOf([&] { LaneDistance(p, p); }), ErrorCode::kDegenerateBoundary);
  EXPECT_EQ(CodeOf([&] { VehicleLaneAngle(p, GroundPoint{1.0, 10.0 + 1e-10}); }),
            ErrorCode::kDegenerateBoundary);
}

TEST(CamGeom, VehicleLaneAngleExamples) {
  EXPECT_EQ(VehicleLaneAngle(GroundPoint{1.75, 5.0}, GroundPoint{1.75, 20.0}), 0.0);
  EXPECT_NEAR(VehicleLaneAngle(GroundPoint{0.0, 10.0}, GroundPoint{1.0, 11.0}),
              std::numbers::pi / 4, 1e-15);
  // Far point is always "b", so argument order does not matter.
  EXPECT_EQ(VehicleLaneAngle(GroundPoint{1.0, 11.0}, GroundPoint{0.0, 10.0}),
            VehicleLaneAngle(GroundPoint{0.0, 10.0}, GroundPoint{1.0, 11.0}));
}

TEST(CamGeom, VehicleLaneAngleDependsOnDirectionOnly) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0), s(0.2, 5.0);
  for (int k = 0; k < 200; ++k) {
    const double angle = 0.6 * u(rng);
    const GroundPoint foot{3.0 * u(rng), 20.0 + 5.0 * u(rng)};
    const double dx = std::sin(angle), dz = std::cos(angle);
    const double a = s(rng), b = s(rng), scale = s(rng);
    const GroundPoint m{foot.X + a * dx, foot.Z + a * dz};
    const GroundPoint n{foot.X + (a + b) * dx, foot.Z + (a + b) * dz};
    const GroundPoint m2{foot.X + scale * a * dx, foot.Z + scale * a * dz};
    const GroundPoint n2{foot.X + scale * (a + b) * dx, foot.Z + scale * (a + b) * dz};
    EXPECT_NEAR(VehicleLaneAngle(m, n), angle, 1e-12);
    EXPECT_NEAR(VehicleLaneAngle(m2, n2), VehicleLaneAngle(m, n), 1e-12);
  }
}

TEST(CamGeom, ObstacleDistanceExamples) {
  const CameraModel cam;
  EXPECT_NEAR(ObstacleDistance(144.0, cam), 10.0, 1e-12);
  EXPECT_NEAR(ObstacleDistance(cam.u0 + cam.f * cam.H, cam), 1.0, 1e-12);
  EXPECT_NEAR(DepthRow(10.0, cam), 144.0, 1e-12);
}

TEST(CamGeom, ViewpointIdentity) {
  const CameraModel cam;
  const PixelPoint p{201.3, 171.9};
  const PixelPoint q =
      ViewpointTransform(p, cam, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero());
  EXPECT_NEAR(q.x, p.x, 1e-9);
  EXPECT_NEAR(q.y, p.y, 1e-9);
}

TEST(CamGeom, ViewpointLateralShift) {
  const CameraModel cam;
  const PixelPoint p = GroundToPixel({1.75, 10.0}, cam);
  const PixelPoint q = ViewpointTransform(p, cam, Eigen::Matrix3d::Identity(),
                                          Eigen::Vector3d(-1.75, 0.0, 0.0));
  const PixelPoint expected = GroundToPixel({0.0, 10.0}, cam);
  EXPECT_NEAR(q.x, cam.v0, 1e-9);
  EXPECT_NEAR(q.x, expected.x, 1e-9);
  EXPECT_NEAR(q.y, expected.y, 1e-9);
}

TEST(CamGeom, ViewpointYawMatchesComposedOracle) {
  const CameraModel cam;
  const double a = 0.1;
  const PixelPoint p = GroundToPixel({0.0, 10.0}, cam);
  const PixelPoint q =
      ViewpointTransform(p, cam, YawRotation(a), Eigen::Vector3d::Zero());
  // pixel_to_ground, rotate on the plane by hand, ground_to_pixel.
  const GroundPoint g = PixelToGround(p, cam);
  const GroundPoint r{g.X * std::cos(a) + g.Z * std::sin(a),
                      -g.X * std::sin(a) + g.Z * std::cos(a)};
  const PixelPoint expected = GroundToPixel(r, cam);
  EXPECT_NEAR(r.X, 10.0 * std::sin(a), 1e-12);
  EXPECT_NEAR(r.Z, 10.0 * std::cos(a), 1e-12);
  EXPECT_NEAR(q.x, expected.x, 1e-9);
  EXPECT_NEAR(q.y, expected.y, 1e-9);
}

TEST(CamGeom, ViewpointCompositionLaw) {
  const CameraModel cam;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Matrix3d R1 = YawRotation(0.2 * u(rng));
    const Eigen::Matrix3d R2 = YawRotation(0.2 * u(rng));
    const Eigen::Vector3d T1(u(rng), 0.0, 0.5 * u(rng));
    const Eigen::Vector3d T2(u(rng), 0.0, 0.5 * u(rng));
    const PixelPoint p =
        GroundToPixel({3.0 * u(rng), 15.0 + 10.0 * u(rng)}, cam);
    const PixelPoint two_steps =
        ViewpointTransform(ViewpointTransform(p, cam, R1, T1), cam, R2, T2);
    const PixelPoint one_step = ViewpointTransform(p, cam, R2 * R1, R2 * T1 + T2);
    EXPECT_NEAR(two_steps.x, one_step.x, 1e-9);
    EXPECT_NEAR(two_steps.y, one_step.y, 1e-9);
  }
}

TEST(CamGeom, ViewpointBehindCamera) {
  const CameraModel cam;
  const PixelPoint p = GroundToPixel({0.0, 10.0}, cam);
  EXPECT_EQ(CodeOf([&] {
              ViewpointTransform(p, cam, Eigen::Matrix3d::Identity(),
                                 Eigen::Vector3d(0.0, 0.0, -12.0));
            }),
            ErrorCode::kNonPositiveDepth);
}

TEST(CamGeom, MountingTransformsInvert) {
  CameraModel cam;
  cam.yaw = 0.43;
  cam.lateral_offset = 0.3;
  cam.forward_offset = 2.0;
  const VehiclePoint v{12.0, -2.5};
  const VehiclePoint back = CameraToVehicle(VehicleToCamera(v, cam), cam);
  EXPECT_NEAR(back.forward, v.forward, 1e-12);
  EXPECT_NEAR(back.lateral, v.lateral, 1e-12);
  // A yawed-right camera sees a straight-ahead point on its left.
  EXPECT_LT(VehicleToCamera({10.0, 0.0}, cam).X, 0.0);
}

TEST(CamGeom, ValidateRejectsBadModels) {
  CameraModel cam;
  EXPECT_NO_THROW(cam.Validate());
  cam.f = 0.0;
  EXPECT_EQ(CodeOf([&] { cam.Validate(); }), ErrorCode::kConfigInvalid);
  cam = CameraModel{};
  cam.u0 = 240.0;
  EXPECT_EQ(CodeOf([&] { cam.Validate(); }), ErrorCode::kConfigInvalid);
}

}  // namespace
}  // namespace cma
