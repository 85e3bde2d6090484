#include "cma/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "cma/error.hpp"
#include "cma/evalkit.hpp"
#include "cma/scenarios.hpp"
#include "gtest/gtest.h"

namespace cma {
namespace {

Trajectory RunTeacher(const ScenarioConfig& cfg) {
  return RunScenario(cfg, std::make_shared<TeacherController>(cfg.gains));
}

bool HasEvent(const TickRecord& r, std::string_view prefix) {
  for (const auto& e : r.events) {
    if (e.starts_with(prefix)) return true;
  }
  return false;
}

TEST(SimWorld, StraightAdvance) {
  const VehicleState v{10.0, 2.0, 0.0, 12.0, 0.0};
  const VehicleState n = Step(v, 0.0, 0.0, 2.6, 0.05);
  EXPECT_DOUBLE_EQ(n.x, 10.6);
  EXPECT_EQ(n.y, 2.0);
  EXPECT_EQ(n.psi, 0.0);
  EXPECT_EQ(n.v, 12.0);
}

TEST(SimWorld, StandstillIgnoresSteering) {
  const VehicleState v{10.0, 2.0, 0.1, 0.0, 0.0};
  const VehicleState n = Step(v, 0.4, 0.0, 2.6, 0.05);
  EXPECT_EQ(n.x, v.x);
  EXPECT_EQ(n.y, v.y);
  EXPECT_EQ(n.psi, v.psi);
  EXPECT_EQ(Step(v, 0.0, -3.0, 2.6, 0.05).v, 0.0);
}

TEST(SimWorld, ConstantSteeringFollowsCircle) {
  const double L = 2.6, delta = 0.1, speed = 10.0, dt = 0.05, T = 5.0;
  VehicleState v{0.0, 0.0, 0.0, speed, 0.0};
  const int n = static_cast<int>(std::lround(T / dt));
  for (int k = 0; k < n; ++k) {
    v = Step(v, delta, 0.0, L, dt);
    EXPECT_EQ(v.v, speed);
  }
  EXPECT_NEAR(v.psi, speed * T * std::tan(delta) / L, 1e-3);
  // Position stays within a forward-Euler step of the circle about the
  // instantaneous centre on the right.
  const double R = L / std::tan(delta);
  const double r = std::hypot(v.x, v.y - R);
  EXPECT_NEAR(r, R, speed * dt);
}

TEST(SimWorld, CollisionGeometry) {
  WorldState w;
  w.vehicle = {100.0, 1.75, 0.0, 10.0, 0.0};
  w.obstacles.push_back({.lane = 0, .x = 100.0 + 3.45 + 0.01});
  EXPECT_FALSE(Collides(w));
  w.obstacles[0].x = 100.0 + 3.45 - 0.01;
  EXPECT_TRUE(Collides(w));
  w.obstacles[0].lane = 1;  // next lane, 3.5 m apart: clear
  EXPECT_FALSE(Collides(w));
  // A yawed car reaching across the boundary.
  w.vehicle.y = 3.5 - 0.95;
  w.vehicle.psi = 0.3;
  w.obstacles[0].x = 100.0 + 2.5;
  EXPECT_TRUE(Collides(w));
  w.obstacles[0].appear_time = 5.0;
  EXPECT_FALSE(Collides(w));
}

TEST(SimWorld, CenteredHoldWithoutObstacles) {
  ScenarioConfig cfg;
  const Trajectory traj = RunTeacher(cfg);
  ASSERT_EQ(traj.ticks.size(), 600u);
  for (const TickRecord& r : traj.ticks) {
    EXPECT_NEAR(r.vehicle.y, cfg.road.LaneCenter(1), 0.05);
    EXPECT_EQ(r.intention, DrivingIntention::kStayInLane);
  }
  EXPECT_FALSE(traj.collided);
}

TEST(SimWorld, ObstacleTriggersLeftChange) {
  ScenarioConfig cfg = ObstacleScenario(3.5, 100.0);
  const Trajectory traj = RunTeacher(cfg);
  EXPECT_FALSE(traj.collided);
  int flip = -1, done = -1;
  for (const TickRecord& r : traj.ticks) {
    if (flip < 0 && r.intention == DrivingIntention::kChangeToLeft) {
      flip = r.k;
      const double safety = SafetyDistance(cfg.safety, r.vehicle.v);
      EXPECT_LE(r.measurements.O_C_line, safety);
      EXPECT_GT(traj.ticks[r.k - 1].measurements.O_C_line, safety);
    }
    if (HasEvent(r, "lane_change_complete")) done = r.k;
  }
  ASSERT_GT(flip, 0);
  ASSERT_GT(done, flip);
  EXPECT_NEAR(traj.ticks.back().vehicle.y, cfg.road.LaneCenter(0), 0.05);
}

TEST(SimWorld, BlockedRoadBrakesToStop) {
  ScenarioConfig cfg;
  cfg.obstacles.push_back({.lane = 0, .x = 60.0, .relative = true});
  cfg.obstacles.push_back({.lane = 1, .x = 60.0, .relative = true});
  const Trajectory traj = RunTeacher(cfg);
  EXPECT_FALSE(traj.collided);
  bool braked = false;
  for (const TickRecord& r : traj.ticks) {
    if (r.intention == DrivingIntention::kBrakeAndStayInLane) braked = true;
    EXPECT_NE(r.intention, DrivingIntention::kChangeToLeft);
  }
  EXPECT_TRUE(braked);
  const VehicleState& last = traj.ticks.back().vehicle;
  EXPECT_EQ(last.v, 0.0);
  const double front = last.x + cfg.geometry.length - cfg.geometry.rear_overhang;
  EXPECT_LT(front, traj.obstacles[0].x);
}

TEST(SimWorld, DeterministicCsv) {
  ScenarioConfig cfg = ObstacleScenario(3.5, 80.0);
  cfg.perception.noise_sigma = 1.0;
  cfg.appear_jitter = 2.0;
  std::ostringstream a, b;
  WriteTrajectoryCsv(RunTeacher(cfg), a);
  WriteTrajectoryCsv(RunTeacher(cfg), b);
  EXPECT_EQ(a.str(), b.str());
  cfg.seed += 1;
  std::ostringstream c;
  WriteTrajectoryCsv(RunTeacher(cfg), c);
  EXPECT_NE(a.str(), c.str());
}

TEST(SimWorld, CsvHeaderAndRows) {
  ScenarioConfig cfg;
  cfg.horizon = 1.0;
  std::ostringstream out;
  WriteTrajectoryCsv(RunTeacher(cfg), out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x,y,psi,v,steering,accel,intention,phase,D_o,O_C,O_L,O_R,event");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 13);
  }
  EXPECT_EQ(rows, 20);
}

TEST(SimWorld, CsvReadBack) {
  const ScenarioConfig cfg = ObstacleScenario(3.5, 80.0, 1.0);
  const Trajectory traj = RunTeacher(cfg);
  std::ostringstream out;
  WriteTrajectoryCsv(traj, out);
  std::istringstream in(out.str());
  const Trajectory back = ReadTrajectoryCsv(in, cfg.road);
  ASSERT_EQ(back.ticks.size(), traj.ticks.size());
  EXPECT_EQ(back.dt, cfg.dt);
  std::ostringstream again;
  WriteTrajectoryCsv(back, again);
  EXPECT_EQ(again.str(), out.str());
  const TrajectoryMetrics a = ComputeTrajectoryMetrics(traj);
  const TrajectoryMetrics b = ComputeTrajectoryMetrics(back);
  EXPECT_EQ(a.rms_center_offset, b.rms_center_offset);
  EXPECT_EQ(a.max_abs_lat_accel, b.max_abs_lat_accel);
  EXPECT_EQ(a.changes_completed, b.changes_completed);

  std::istringstream bad_header("t,x\n");
  EXPECT_THROW(ReadTrajectoryCsv(bad_header, cfg.road), Error);
  std::istringstream bad_row(out.str().substr(0, out.str().find('\n') + 1) + "0,1,2\n");
  EXPECT_THROW(ReadTrajectoryCsv(bad_row, cfg.road), Error);
}

TEST(SimWorld, MirrorSymmetry) {
  for (const ScenarioConfig& cfg : LaneChangeBattery()) {
    const Trajectory a = RunTeacher(cfg);
    const Trajectory b = RunTeacher(MirrorScenario(cfg));
    ASSERT_EQ(a.ticks.size(), b.ticks.size());
    const double W = cfg.road.Width();
    double worst = 0.0;
    for (std::size_t k = 0; k < a.ticks.size(); ++k) {
      worst = std::max(worst, std::abs(a.ticks[k].vehicle.y - (W - b.ticks[k].vehicle.y)));
      worst = std::max(worst, std::abs(a.ticks[k].vehicle.x - b.ticks[k].vehicle.x));
    }
    EXPECT_LT(worst, 1e-6) << cfg.name;
  }
}

TEST(SimWorld, PhasesAdvanceMonotonically) {
  for (const ScenarioConfig& cfg : LaneChangeBattery()) {
    const Trajectory traj = RunTeacher(cfg);
    ManeuverPhase prev = ManeuverPhase::kLanekeep;
    int completed = 0;
    for (const TickRecord& r : traj.ticks) {
      if (r.phase != prev) {
        const bool ok =
            (prev == ManeuverPhase::kLanekeep && r.phase == ManeuverPhase::kChangingInLane) ||
            (prev == ManeuverPhase::kChangingInLane &&
             r.phase == ManeuverPhase::kChangingOnBoundary) ||
            (prev == ManeuverPhase::kChangingOnBoundary && r.phase == ManeuverPhase::kLanekeep);
        EXPECT_TRUE(ok) << cfg.name << " t=" << r.t;
      }
      if (HasEvent(r, "lane_change_complete")) ++completed;
      prev = r.phase;
    }
    EXPECT_GE(completed, 1) << cfg.name;
    EXPECT_EQ(prev, ManeuverPhase::kLanekeep) << cfg.name;
  }
}

TEST(SimWorld, LanekeepOffsetIsTrueOffset) {
  ScenarioConfig cfg;
  cfg.start.y = cfg.road.LaneCenter(1) - 0.4;
  cfg.start.psi = 0.02;
  cfg.horizon = 5.0;
  const Trajectory traj = RunTeacher(cfg);
  for (const TickRecord& r : traj.ticks) {
    ASSERT_EQ(r.phase, ManeuverPhase::kLanekeep);
    EXPECT_NEAR(r.D_o, cfg.road.LaneCenter(1) - r.vehicle.y, 1e-6);
  }
}

TEST(SimWorld, ScheduledAndLiveNavigation) {
  ScenarioConfig cfg;
  cfg.navi.push_back({1.0, NavigationCommand::kChangeToLeft});
  ClosedLoop loop(cfg, std::make_shared<TeacherController>());
  for (int k = 0; k < 20; ++k) {
    EXPECT_EQ(loop.Tick().intention, DrivingIntention::kStayInLane);
  }
  EXPECT_EQ(loop.Tick().intention, DrivingIntention::kChangeToLeft);
  // Run to completion; navigation falls back to lane keeping.
  while (loop.maneuver().active()) loop.Tick();
  EXPECT_EQ(loop.navigation(), NavigationCommand::kStayInLane);

  loop.SetNavigation(NavigationCommand::kChangeToRight);
  const TickRecord& r = loop.Tick();
  EXPECT_EQ(r.navigation, NavigationCommand::kChangeToRight);
  EXPECT_EQ(r.intention, DrivingIntention::kChangeToRight);
}

TEST(SimWorld, ChangeTowardMissingLaneBrakes) {
  ScenarioConfig cfg;
  cfg.navi.push_back({0.0, NavigationCommand::kChangeToRight});
  cfg.horizon = 2.0;
  const Trajectory traj = RunTeacher(cfg);
  for (const TickRecord& r : traj.ticks) {
    EXPECT_EQ(r.intention, DrivingIntention::kBrakeAndStayInLane);
    EXPECT_EQ(r.phase, ManeuverPhase::kLanekeep);
  }
}

TEST(SimWorld, InvalidConfig) {
  ScenarioConfig cfg;
  cfg.road.lane_width = 2.0;
  EXPECT_THROW(ClosedLoop(cfg, std::make_shared<TeacherController>()), Error);
  cfg = ScenarioConfig{};
  cfg.dt = 0.2;
  EXPECT_THROW(cfg.Validate(), Error);
  cfg = ScenarioConfig{};
  cfg.obstacles.push_back({.lane = 5});
  EXPECT_THROW(cfg.Validate(), Error);
}

WorldState MaskWorld() {
  WorldState w;
  w.road.num_lanes = 1;
  w.vehicle = {100.0, 1.75, 0.0, 10.0, 0.0};
  return w;
}

TEST(SimWorld, MaskFullLaneTrapezoid) {
  const CameraModel cam;
  const BitMask mask = RenderLaneMask(MaskWorld(), cam);
  std::size_t expected = 0;
  for (int row = 0; row < cam.image_h; ++row) {
    for (int col = 0; col < cam.image_w; ++col) {
      bool inside = false;
      if (row > cam.u0) {
        // |X| <= 1.75 at depth Z = f H / (row - u0); pixels exactly on the
        // boundary may fall either way.
        const double margin = 1.75 * (row - cam.u0) - std::abs(col - cam.v0) * cam.H;
        inside = margin >= 0.0;
        if (std::abs(margin) < 1e-9) {
          expected += mask.at(col, row);
          continue;
        }
      }
      expected += inside;
      ASSERT_EQ(mask.at(col, row), inside) << col << "," << row;
    }
  }
  EXPECT_EQ(mask.Count(), expected);
}

TEST(SimWorld, MaskStopsAtObstacleRow) {
  const CameraModel cam;
  WorldState w = MaskWorld();
  w.obstacles.push_back({.lane = 0, .x = 110.0});
  const BitMask mask = RenderLaneMask(w, cam);
  for (int row = 0; row <= 144; ++row) {
    for (int col = 0; col < cam.image_w; ++col) ASSERT_FALSE(mask.at(col, row));
  }
  EXPECT_TRUE(mask.at(160, 145));
  w.obstacles[0].x = 102.0;
  EXPECT_EQ(RenderLaneMask(w, cam).Count(), 0u);
}

TEST(SimWorld, MaskAgreesWithRowInversion) {
  const CameraModel cam;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> depth(2.5, 80.0);
  for (int k = 0; k < 50; ++k) {
    WorldState w = MaskWorld();
    const double d = depth(rng);
    w.obstacles.push_back({.lane = 0, .x = 100.0 + d});
    const BitMask mask = RenderLaneMask(w, cam);
    int top = cam.image_h;
    for (int row = cam.image_h - 1; row >= 0 && mask.at(160, row); --row) top = row;
    ASSERT_LT(top, cam.image_h);
    EXPECT_LE(std::abs(top - DepthRow(d, cam)), 1.0);
  }
}

TEST(SimWorld, PgmHeader) {
  BitMask m(4, 2);
  m.set(1, 1, true);
  std::ostringstream out;
  WritePgm(m, out);
  const std::string s = out.str();
  const std::string header = "P5\n4 2\n255\n";
  ASSERT_EQ(s.size(), header.size() + 8);
  EXPECT_EQ(s.substr(0, header.size()), header);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(static_cast<unsigned char>(s[header.size() + i]), i == 5 ? 255 : 0);
  }
}

}  // namespace
}  // namespace cma
