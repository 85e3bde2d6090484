#include "cma/simworld.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "cma/error.hpp"

namespace cma {
namespace {

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t PerceptionSeed(std::uint64_t seed, int k, CameraSlot slot) {
  return SplitMix(SplitMix(seed) ^ (std::uint64_t(k) * 3 + std::uint64_t(slot)));
}

using Corners = std::array<RoadPoint, 4>;

Corners VehicleCorners(const VehicleState& v, const VehicleGeometry& g) {
  const double back = -g.rear_overhang;
  const double front = g.length - g.rear_overhang;
  const double half = 0.5 * g.width;
  return {VehicleToRoad(v, {back, -half}), VehicleToRoad(v, {front, -half}),
          VehicleToRoad(v, {front, half}), VehicleToRoad(v, {back, half})};
}

Corners ObstacleCorners(const Obstacle& ob, const Road& road) {
  const double c = road.LaneCenter(ob.lane);
  const double half = 0.5 * ob.width;
  return {RoadPoint{ob.x, c - half}, RoadPoint{ob.x + ob.length, c - half},
          RoadPoint{ob.x + ob.length, c + half}, RoadPoint{ob.x, c + half}};
}

// Separating-axis test for two convex quadrilaterals.
bool Overlap(const Corners& a, const Corners& b) {
  for (const Corners* poly : {&a, &b}) {
    for (int e = 0; e < 4; ++e) {
      const RoadPoint& p = (*poly)[e];
      const RoadPoint& q = (*poly)[(e + 1) % 4];
      const double nx = -(q.y - p.y);
      const double ny = q.x - p.x;
      double amin = INFINITY, amax = -INFINITY, bmin = INFINITY, bmax = -INFINITY;
      for (const RoadPoint& r : a) {
        const double s = r.x * nx + r.y * ny;
        amin = std::min(amin, s);
        amax = std::max(amax, s);
      }
      for (const RoadPoint& r : b) {
        const double s = r.x * nx + r.y * ny;
        bmin = std::min(bmin, s);
        bmax = std::max(bmax, s);
      }
      if (amax < bmin || bmax < amin) return false;
    }
  }
  return true;
}

NavigationCommand MirrorCommand(NavigationCommand g) {
  switch (g) {
    case NavigationCommand::kChangeToLeft: return NavigationCommand::kChangeToRight;
    case NavigationCommand::kChangeToRight: return NavigationCommand::kChangeToLeft;
    case NavigationCommand::kStayInLane: break;
  }
  return g;
}

std::string Num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

}  // namespace

CameraModel ScenarioConfig::DefaultCamera() {
  CameraModel cam;
  const VehicleGeometry g;
  cam.forward_offset = g.length - g.rear_overhang;
  return cam;
}

int ScenarioConfig::TickCount() const {
  return static_cast<int>(std::floor(horizon / dt + 1e-9));
}

void ScenarioConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kConfigInvalid, what);
  };
  if (!(dt > 0.0 && dt <= 0.1)) fail("dt must be in (0, 0.1]");
  if (!(horizon > 0.0)) fail("horizon must be positive");
  if (road.num_lanes < 1) fail("road needs at least one lane");
  if (!(road.lane_width > 2.5)) fail("lane_width must exceed 2.5 m");
  if (!(road.length > 0.0)) fail("road length must be positive");
  if (!(start.y > 0.0 && start.y < road.Width())) fail("start position off the road");
  if (!(start.v >= 0.0)) fail("start speed must be >= 0");
  if (!(speed.cruise_speed >= 0.0 && speed.brake_decel > 0.0 && speed.accel_limit > 0.0)) {
    fail("speed rule values out of range");
  }
  if (!(geometry.wheelbase > 0.0 && geometry.length > 0.0 && geometry.width > 0.0)) {
    fail("vehicle geometry must be positive");
  }
  for (const ObstacleSpec& o : obstacles) {
    if (!road.HasLane(o.lane)) fail("obstacle lane " + std::to_string(o.lane) + " not on road");
    if (!(o.appear_time >= 0.0)) fail("obstacle appear_time must be >= 0");
  }
  if (!(appear_jitter >= 0.0)) fail("appear_jitter must be >= 0");
  if (!(perception.noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (!(safety.min_distance > 0.0 && safety.time_headway >= 0.0)) fail("safety params out of range");
  if (!(planner.boundary_ratio > 1.0 && planner.boundary_tolerance > 0.0)) {
    fail("planner params out of range");
  }
  for (std::size_t i = 1; i < navi.size(); ++i) {
    if (navi[i].t < navi[i - 1].t) fail("navigation schedule must be sorted by time");
  }
  gains.Validate();
  camera.Validate();
}

ScenarioConfig MirrorScenario(const ScenarioConfig& cfg) {
  ScenarioConfig m = cfg;
  m.name = cfg.name + "_mirror";
  m.start.y = cfg.road.Width() - cfg.start.y;
  m.start.psi = -cfg.start.psi;
  m.start.steering = -cfg.start.steering;
  for (ObstacleSpec& o : m.obstacles) o.lane = cfg.road.num_lanes - 1 - o.lane;
  for (NaviEvent& e : m.navi) e.command = MirrorCommand(e.command);
  m.camera.lateral_offset = -cfg.camera.lateral_offset;
  return m;
}

VehicleState Step(const VehicleState& v, double steering, double accel,
                  double wheelbase, double dt) {
  VehicleState n = v;
  n.x += v.v * std::cos(v.psi) * dt;
  n.y += v.v * std::sin(v.psi) * dt;
  n.psi += v.v / wheelbase * std::tan(steering) * dt;
  n.v = std::max(0.0, v.v + accel * dt);
  n.steering = steering;
  return n;
}

bool Collides(const WorldState& w) {
  const Corners car = VehicleCorners(w.vehicle, w.geometry);
  for (const Obstacle& ob : w.obstacles) {
    if (ob.ActiveAt(w.t) && Overlap(car, ObstacleCorners(ob, w.road))) return true;
  }
  return false;
}

std::size_t BitMask::Count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

BitMask RenderLaneMask(const WorldState& w, const CameraModel& cam,
                       CameraSlot slot, const PerceptionOptions& options) {
  BitMask mask(cam.image_w, cam.image_h);
  const LaneSpan span = DesignatedLanes(w, slot, options);
  if (span.empty()) return mask;
  const double left = w.road.LaneLeft(span.lo);
  const double right = w.road.LaneRight(span.hi);

  double cut = INFINITY;
  for (const Obstacle& ob : w.obstacles) {
    if (!ob.ActiveAt(w.t) || ob.lane < span.lo || ob.lane > span.hi) continue;
    const VehiclePoint p =
        RoadToVehicle(w.vehicle, {ob.x, w.road.LaneCenter(ob.lane)});
    if (p.forward - cam.forward_offset > 0.0) cut = std::min(cut, ob.x);
  }

  const int first_row = static_cast<int>(std::floor(cam.u0)) + 1;
  for (int row = std::max(first_row, 0); row < cam.image_h; ++row) {
    const double Z = cam.f * cam.H / (row - cam.u0);
    for (int col = 0; col < cam.image_w; ++col) {
      const GroundPoint g{(col - cam.v0) * Z / cam.f, Z};
      const RoadPoint r = VehicleToRoad(w.vehicle, CameraToVehicle(g, cam));
      if (r.y >= left && r.y <= right && r.x < cut) mask.set(col, row, true);
    }
  }
  return mask;
}

void WritePgm(const BitMask& mask, std::ostream& out) {
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  for (std::uint8_t b : mask.bits) out.put(b ? char(255) : char(0));
}

void WriteTrajectoryCsv(const Trajectory& traj, std::ostream& out) {
  out << "t,x,y,psi,v,steering,accel,intention,phase,D_o,O_C,O_L,O_R,event\n";
  for (const TickRecord& r : traj.ticks) {
    std::string events;
    for (const std::string& e : r.events) {
      if (!events.empty()) events += ';';
      events += e;
    }
    out << Num(r.t) << ',' << Num(r.vehicle.x) << ',' << Num(r.vehicle.y) << ','
        << Num(r.vehicle.psi) << ',' << Num(r.vehicle.v) << ',' << Num(r.steering)
        << ',' << Num(r.accel) << ',' << ToString(r.intention) << ','
        << ToString(r.phase) << ',' << Num(r.D_o) << ','
        << Num(r.measurements.O_C_line) << ',' << Num(r.measurements.O_L_line) << ','
        << Num(r.measurements.O_R_line) << ',' << events << '\n';
  }
}

Trajectory ReadTrajectoryCsv(std::istream& in, const Road& road) {
  constexpr std::string_view kHeader =
      "t,x,y,psi,v,steering,accel,intention,phase,D_o,O_C,O_L,O_R,event";
  Trajectory traj;
  traj.road = road;
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw Error(ErrorCode::kIoError, "trajectory csv: bad header");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    auto bad = [&](std::string_view what) {
      return Error(ErrorCode::kIoError,
                   fmt::format("trajectory csv line {}: {}", line_no, what));
    };
    if (f.size() != 14) throw bad("expected 14 fields");
    auto num = [&](const std::string& s) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || *end != '\0') throw bad("not a number: " + s);
      return v;
    };
    TickRecord r;
    r.k = static_cast<int>(traj.ticks.size());
    r.t = num(f[0]);
    r.vehicle = {num(f[1]), num(f[2]), num(f[3]), num(f[4]), 0.0};
    r.steering = num(f[5]);
    r.vehicle.steering = r.steering;
    r.accel = num(f[6]);
    const auto intention = ParseDrivingIntention(f[7]);
    if (!intention) throw bad("unknown intention " + f[7]);
    r.intention = *intention;
    bool phase_ok = false;
    for (ManeuverPhase p : {ManeuverPhase::kLanekeep, ManeuverPhase::kChangingInLane,
                            ManeuverPhase::kChangingOnBoundary}) {
      if (ToString(p) == f[8]) {
        r.phase = p;
        phase_ok = true;
      }
    }
    if (!phase_ok) throw bad("unknown phase " + f[8]);
    r.D_o = num(f[9]);
    r.map.D_o = r.D_o;
    r.measurements.O_C_line = num(f[10]);
    r.measurements.O_L_line = num(f[11]);
    r.measurements.O_R_line = num(f[12]);
    for (std::size_t a = 0; a < f[13].size();) {
      const std::size_t b = std::min(f[13].find(';', a), f[13].size());
      r.events.push_back(f[13].substr(a, b - a));
      a = b + 1;
    }
    traj.collided = traj.collided || std::find(r.events.begin(), r.events.end(),
                                               "collision") != r.events.end();
    traj.ticks.push_back(std::move(r));
  }
  if (traj.ticks.empty()) throw Error(ErrorCode::kEmptyInput, "trajectory csv has no rows");
  if (traj.ticks.size() >= 2) traj.dt = traj.ticks[1].t - traj.ticks[0].t;
  return traj;
}

double TeacherController::Steer(const CognitiveMap& map, const LaneMeasurements& m,
                                double dt) {
  const double raw =
      TeacherSteer(gains_, map.D_o, m.V_a.value_or(0.0), map.vstate.speed);
  return RateLimit(map.vstate.prev_steering, raw, gains_.steer_rate_limit, dt);
}

LstmController::LstmController(LstmParams params, NormalizationTable norm,
                               std::string id, double steer_limit)
    : params_(std::move(params)),
      norm_(norm),
      id_(std::move(id)),
      steer_limit_(steer_limit) {
  params_.CheckShapes();
}

double LstmController::Steer(const CognitiveMap& map, const LaneMeasurements&,
                             double) {
  const FlatMap f = Flatten(map, norm_);
  if (history_.empty()) history_.assign(kSequenceLength, f);
  history_.erase(history_.begin());
  history_.push_back(f);
  return std::clamp(Forward(params_, history_), -steer_limit_, steer_limit_);
}

ClosedLoop::ClosedLoop(ScenarioConfig cfg,
                       std::shared_ptr<SteeringController> controller,
                       RunOptions options)
    : cfg_(std::move(cfg)),
      rig_(cfg_.Rig()),
      controller_(std::move(controller)),
      options_(options) {
  cfg_.Validate();
  if (!controller_) throw Error(ErrorCode::kConfigInvalid, "no controller");
  Reset();
}

void ClosedLoop::Reset() {
  world_ = WorldState{};
  world_.road = cfg_.road;
  world_.geometry = cfg_.geometry;
  world_.vehicle = cfg_.start;
  maneuver_ = {};
  navigation_ = NavigationCommand::kStayInLane;
  next_navi_ = 0;
  live_override_ = false;
  collided_ = false;
  k_ = 0;
  perturb_ = 0.0;
  controller_->Reset();

  std::mt19937_64 rng(SplitMix(cfg_.seed));
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  appear_times_.clear();
  for (const ObstacleSpec& o : cfg_.obstacles) {
    appear_times_.push_back(o.appear_time + cfg_.appear_jitter * jitter(rng));
  }
  placed_.assign(cfg_.obstacles.size(), false);
}

void ClosedLoop::SetNavigation(NavigationCommand g) {
  live_override_ = true;
  navigation_ = g;
}

void ClosedLoop::SetCruiseSpeed(double speed) {
  if (!(speed >= 0.0) || !std::isfinite(speed)) {
    throw Error(ErrorCode::kConfigInvalid, "cruise speed must be finite and >= 0");
  }
  cfg_.speed.cruise_speed = speed;
}

bool ClosedLoop::finished() const {
  return collided_ || k_ >= cfg_.TickCount();
}

void ClosedLoop::PlaceObstacles(std::vector<std::string>& events) {
  const double bumper = cfg_.geometry.length - cfg_.geometry.rear_overhang;
  for (std::size_t i = 0; i < cfg_.obstacles.size(); ++i) {
    if (placed_[i] || world_.t + 1e-9 < appear_times_[i]) continue;
    const ObstacleSpec& s = cfg_.obstacles[i];
    Obstacle ob;
    ob.lane = s.lane;
    ob.x = s.relative ? world_.vehicle.x + bumper + s.x : s.x;
    ob.appear_time = world_.t;
    world_.obstacles.push_back(ob);
    placed_[i] = true;
    events.push_back(fmt::format("obstacle_appear:{}@{}", s.lane, Num(ob.x)));
  }
}

void ClosedLoop::ApplySchedule(std::vector<std::string>& events) {
  while (next_navi_ < cfg_.navi.size() &&
         cfg_.navi[next_navi_].t <= world_.t + 1e-9) {
    if (!live_override_) {
      navigation_ = cfg_.navi[next_navi_].command;
      events.push_back(fmt::format("navigation:{}", ToString(navigation_)));
    }
    ++next_navi_;
  }
}

const TickRecord& ClosedLoop::Tick() {
  if (finished()) throw Error(ErrorCode::kConfigInvalid, "scenario already finished");
  TickRecord rec;
  rec.k = k_;
  world_.t = k_ * cfg_.dt;
  rec.t = world_.t;
  PlaceObstacles(rec.events);
  ApplySchedule(rec.events);
  rec.vehicle = world_.vehicle;

  const PerceptionVector Xm = Perceive(world_, rig_.middle, CameraSlot::kMiddle,
                                       cfg_.perception,
                                       PerceptionSeed(cfg_.seed, k_, CameraSlot::kMiddle));
  const PerceptionVector Xl = Perceive(world_, rig_.left, CameraSlot::kLeft,
                                       cfg_.perception,
                                       PerceptionSeed(cfg_.seed, k_, CameraSlot::kLeft));
  const PerceptionVector Xr = Perceive(world_, rig_.right, CameraSlot::kRight,
                                       cfg_.perception,
                                       PerceptionSeed(cfg_.seed, k_, CameraSlot::kRight));
  rec.measurements = MeasurementsFrom(Xm, Xl, Xr, rig_);
  const LaneMeasurements& m = rec.measurements;

  const VehicleState& v = world_.vehicle;
  DrivingIntention intention;
  if (maneuver_.active()) {
    intention = maneuver_.direction == ManeuverDirection::kLeft
                    ? DrivingIntention::kChangeToLeft
                    : DrivingIntention::kChangeToRight;
  } else {
    intention = DeriveIntention(navigation_, m, SafetyDistance(cfg_.safety, v.v));
  }

  const bool was_active = maneuver_.active();
  const PlanResult plan = Plan(maneuver_, intention, m, cfg_.planner);
  if (!was_active && plan.next.active()) {
    rec.events.push_back(fmt::format("lane_change_start:{}", ToString(plan.next.direction)));
  }
  if (plan.missing_lane) rec.events.emplace_back("missing_lane");
  if (plan.completed) {
    // The requested change is done; navigation falls back to lane keeping.
    rec.events.emplace_back("lane_change_complete");
    navigation_ = NavigationCommand::kStayInLane;
  }
  maneuver_ = plan.next;
  rec.navigation = navigation_;
  rec.intention = intention;
  rec.phase = maneuver_.phase;
  rec.D_o = plan.D_o;

  const VehicleStateRecord vstate{
      v.v, v.v / cfg_.geometry.wheelbase * std::tan(v.steering), v.steering};
  rec.map = BuildMap(Xm, Xl, Xr, intention, vstate, plan.D_o);

  double steering = controller_->Steer(rec.map, m, cfg_.dt);
  TeacherController shadow(cfg_.gains);
  rec.teacher_steering = shadow.Steer(rec.map, m, cfg_.dt);
  if (options_.perturb_sigma > 0.0) {
    const int hold = std::max(1, static_cast<int>(std::lround(options_.perturb_hold / cfg_.dt)));
    if (k_ % hold == 0) {
      std::mt19937_64 rng(SplitMix(options_.perturb_seed ^ SplitMix(std::uint64_t(k_))));
      std::normal_distribution<double> n(0.0, options_.perturb_sigma);
      perturb_ = n(rng);
    }
    steering += perturb_;
  }
  steering = std::clamp(steering, -cfg_.gains.steer_limit, cfg_.gains.steer_limit);
  rec.steering = steering;
  rec.accel = SpeedCommand(cfg_.speed, cfg_.gains, intention, v.v);
  if (intention == DrivingIntention::kBrakeAndStayInLane) rec.events.emplace_back("brake");

  world_.vehicle = Step(v, steering, rec.accel, cfg_.geometry.wheelbase, cfg_.dt);
  ++k_;
  world_.t = k_ * cfg_.dt;
  if (Collides(world_)) {
    collided_ = true;
    rec.events.emplace_back("collision");
  }
  const double y = world_.vehicle.y;
  if (y < 0.0 || y > world_.road.Width()) rec.events.emplace_back("off_road");
  last_ = std::move(rec);
  return last_;
}

Trajectory RunScenario(const ScenarioConfig& cfg,
                       std::shared_ptr<SteeringController> controller,
                       const RunOptions& options) {
  ClosedLoop loop(cfg, std::move(controller), options);
  Trajectory traj;
  traj.scenario = cfg.name;
  traj.controller = loop.controller()->Id();
  traj.dt = cfg.dt;
  traj.road = cfg.road;
  traj.geometry = cfg.geometry;
  traj.ticks.reserve(cfg.TickCount());
  while (!loop.finished()) traj.ticks.push_back(loop.Tick());
  traj.obstacles = loop.placed_obstacles();
  traj.collided = loop.collided();
  return traj;
}

}  // namespace cma
