#pragma once

// Fixed-step closed loop on a straight multi-lane road:
//   perceive (3 cameras) -> measurements -> intention -> plan -> controller
//   -> kinematic bicycle step.
// Everything is deterministic given the scenario config (including seed).

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cma/cogmap.hpp"
#include "cma/neuro.hpp"
#include "cma/percept.hpp"
#include "cma/planner.hpp"
#include "cma/teacher.hpp"
#include "cma/world.hpp"

namespace cma {

struct ObstacleSpec {
  int lane = 0;
  // Road x of the rear face, or (relative) the distance ahead of the front
  // bumper at the moment the obstacle appears.
  double x = 0.0;
  double appear_time = 0.0;
  bool relative = false;
};

struct NaviEvent {
  double t = 0.0;
  NavigationCommand command = NavigationCommand::kStayInLane;
};

struct ScenarioConfig {
  std::string name = "scenario";
  Road road;
  VehicleGeometry geometry;
  VehicleState start{0.0, 5.25, 0.0, 40.0 / 3.6, 0.0};
  SpeedRule speed;
  TeacherGains gains;
  std::vector<ObstacleSpec> obstacles;
  // Each appearance time is delayed by U(0, appear_jitter), drawn from seed.
  double appear_jitter = 0.0;
  CameraModel camera = DefaultCamera();
  double side_yaw = 25.0 * std::numbers::pi / 180.0;
  PerceptionOptions perception;
  SafetyParams safety;
  PlannerConfig planner;
  std::vector<NaviEvent> navi;
  std::uint64_t seed = 1;
  double dt = 0.05;
  double horizon = 30.0;

  // Default intrinsics, mounted at the front bumper of the default vehicle.
  static CameraModel DefaultCamera();

  CameraRig Rig() const { return CameraRig::Symmetric(camera, side_yaw); }
  int TickCount() const;
  // Throws Error(kConfigInvalid).
  void Validate() const;
};

// Mirror image about the road axis: lanes reversed, lateral positions and
// headings reflected, left/right navigation commands exchanged.
ScenarioConfig MirrorScenario(const ScenarioConfig& cfg);

// Kinematic bicycle model, reference point on the rear axle.
VehicleState Step(const VehicleState& v, double steering, double accel,
                  double wheelbase, double dt);

// True when the vehicle footprint overlaps an active obstacle.
bool Collides(const WorldState& w);

struct BitMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major, 0 or 1

  BitMask() = default;
  BitMask(int w, int h) : width(w), height(h), bits(std::size_t(w) * h, 0) {}
  bool at(int col, int row) const { return bits[std::size_t(row) * width + col]; }
  void set(int col, int row, bool v) { bits[std::size_t(row) * width + col] = v; }
  std::size_t Count() const;
};

// Free space of the camera's designated lane: road points inside the lane,
// below the horizon and short of the first active obstacle ahead.
BitMask RenderLaneMask(const WorldState& w, const CameraModel& cam,
                       CameraSlot slot = CameraSlot::kMiddle,
                       const PerceptionOptions& options = {});
void WritePgm(const BitMask& mask, std::ostream& out);

struct TickRecord {
  int k = 0;
  double t = 0.0;
  VehicleState vehicle;  // state at the start of the tick
  LaneMeasurements measurements;
  CognitiveMap map;
  NavigationCommand navigation = NavigationCommand::kStayInLane;
  DrivingIntention intention = DrivingIntention::kStayInLane;
  ManeuverPhase phase = ManeuverPhase::kLanekeep;  // after planning
  double D_o = 0.0;
  double steering = 0.0;  // applied this tick
  double accel = 0.0;
  double teacher_steering = 0.0;  // what the teacher would have applied
  std::vector<std::string> events;
};

struct Trajectory {
  std::string scenario;
  std::string controller;
  double dt = 0.05;
  Road road;
  VehicleGeometry geometry;
  std::vector<Obstacle> obstacles;  // as placed
  std::vector<TickRecord> ticks;
  bool collided = false;
};

// Fixed column order: t,x,y,psi,v,steering,accel,intention,phase,D_o,
// O_C,O_L,O_R,event. Events of one tick are joined with ';'.
void WriteTrajectoryCsv(const Trajectory& traj, std::ostream& out);
// Inverse of WriteTrajectoryCsv for the columns it stores; dt is taken from
// the first two rows. Throws Error(kIoError) on malformed input.
Trajectory ReadTrajectoryCsv(std::istream& in, const Road& road);

class SteeringController {
 public:
  virtual ~SteeringController() = default;
  virtual std::string Id() const = 0;
  virtual void Reset() {}
  virtual double Steer(const CognitiveMap& map, const LaneMeasurements& m,
                       double dt) = 0;
};

// Rate limiting is against the previously applied steering, which arrives
// in map.vstate.prev_steering.
class TeacherController : public SteeringController {
 public:
  explicit TeacherController(TeacherGains gains = {}) : gains_(gains) {}
  std::string Id() const override { return "teacher"; }
  double Steer(const CognitiveMap& map, const LaneMeasurements& m,
               double dt) override;

 private:
  TeacherGains gains_;
};

// Runs the network on the last 20 flattened maps; before 20 ticks exist the
// first map is repeated. Output saturates at +-steer_limit.
class LstmController : public SteeringController {
 public:
  LstmController(LstmParams params, NormalizationTable norm, std::string id,
                 double steer_limit = 0.5);
  std::string Id() const override { return id_; }
  void Reset() override { history_.clear(); }
  double Steer(const CognitiveMap& map, const LaneMeasurements& m,
               double dt) override;

 private:
  LstmParams params_;
  NormalizationTable norm_;
  std::string id_;
  double steer_limit_;
  std::vector<FlatMap> history_;
};

struct RunOptions {
  // Steering perturbation added on top of the controller output, held for
  // perturb_hold seconds. Used to widen the state distribution when
  // collecting demonstrations; the teacher label stays clean.
  double perturb_sigma = 0.0;
  double perturb_hold = 1.0;
  std::uint64_t perturb_seed = 0;
};

class ClosedLoop {
 public:
  ClosedLoop(ScenarioConfig cfg, std::shared_ptr<SteeringController> controller,
             RunOptions options = {});

  // Runs one tick and returns its record. Must not be called once finished().
  const TickRecord& Tick();
  bool finished() const;

  // Live navigation command; from now on the scripted schedule is ignored.
  void SetNavigation(NavigationCommand g);
  void SetCruiseSpeed(double speed);
  void Reset();

  const WorldState& world() const { return world_; }
  const ScenarioConfig& config() const { return cfg_; }
  const ManeuverState& maneuver() const { return maneuver_; }
  NavigationCommand navigation() const { return navigation_; }
  bool collided() const { return collided_; }
  int tick_index() const { return k_; }
  const std::vector<Obstacle>& placed_obstacles() const { return world_.obstacles; }
  const std::shared_ptr<SteeringController>& controller() const { return controller_; }

 private:
  void PlaceObstacles(std::vector<std::string>& events);
  void ApplySchedule(std::vector<std::string>& events);

  ScenarioConfig cfg_;
  CameraRig rig_;
  std::shared_ptr<SteeringController> controller_;
  RunOptions options_;
  std::vector<double> appear_times_;
  std::vector<bool> placed_;

  WorldState world_;
  ManeuverState maneuver_;
  NavigationCommand navigation_ = NavigationCommand::kStayInLane;
  std::size_t next_navi_ = 0;
  bool live_override_ = false;
  bool collided_ = false;
  int k_ = 0;
  double perturb_ = 0.0;
  TickRecord last_;
};

Trajectory RunScenario(const ScenarioConfig& cfg,
                       std::shared_ptr<SteeringController> controller,
                       const RunOptions& options = {});

}  // namespace cma
