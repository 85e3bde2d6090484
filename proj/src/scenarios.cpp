#include "cma/scenarios.hpp"

#include <fmt/format.h>

#include <random>

namespace cma {

ScenarioConfig ObstacleScenario(double lane_width, double distance,
                                double appear_time) {
  ScenarioConfig cfg;
  cfg.name = fmt::format("obstacle_{}m_w{}", distance, lane_width);
  cfg.road.num_lanes = 2;
  cfg.road.lane_width = lane_width;
  cfg.start.y = cfg.road.LaneCenter(1);
  cfg.obstacles.push_back({.lane = 1, .x = distance, .appear_time = appear_time,
                           .relative = true});
  cfg.horizon = 30.0;
  return cfg;
}

std::vector<ScenarioConfig> FourDistanceBattery(std::uint64_t seed) {
  std::vector<ScenarioConfig> out;
  for (double d : {50.0, 80.0, 100.0, 200.0}) {
    ScenarioConfig cfg = ObstacleScenario(3.5, d);
    cfg.appear_jitter = 3.0;
    cfg.seed = seed + out.size();
    out.push_back(cfg);
  }
  return out;
}

std::vector<ScenarioConfig> LaneChangeBattery(std::uint64_t seed) {
  std::vector<ScenarioConfig> out = FourDistanceBattery(seed);
  ScenarioConfig e = ObstacleScenario(4.0, 100.0);
  e.appear_jitter = 3.0;
  e.seed = seed + 4;
  out.push_back(e);
  ScenarioConfig f = ObstacleScenario(4.0, 100.0);
  f.name += "_second";
  f.appear_jitter = 3.0;
  f.seed = seed + 5;
  // Blocks the left lane after the first change; the way back is free.
  f.obstacles.push_back({.lane = 0, .x = 200.0, .appear_time = 0.0, .relative = true});
  f.horizon = 40.0;
  out.push_back(f);
  return out;
}

std::vector<ScenarioConfig> DemonstrationScenarios(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };

  std::vector<ScenarioConfig> out;
  for (int i = 0; i < count; ++i) {
    ScenarioConfig cfg;
    cfg.name = fmt::format("demo_{:03d}", i);
    cfg.seed = seed * 1000 + i;
    cfg.road.num_lanes = 2;
    cfg.road.lane_width = pick(3) == 0 ? 4.0 : 3.5;
    const int lane = pick(2);
    cfg.start.y = cfg.road.LaneCenter(lane) + uniform(-0.6, 0.6);
    cfg.start.psi = uniform(-0.03, 0.03);
    cfg.speed.cruise_speed = uniform(9.0, 13.0);
    cfg.start.v = cfg.speed.cruise_speed;
    cfg.horizon = 30.0;
    switch (i % 4) {
      case 0:  // obstacle ahead in the ego lane
      case 1:
        cfg.obstacles.push_back({.lane = lane, .x = uniform(40.0, 200.0),
                                 .appear_time = uniform(0.0, 5.0), .relative = true});
        break;
      case 2:  // scripted change towards the other lane
        cfg.navi.push_back({uniform(1.0, 8.0), lane == 0 ? NavigationCommand::kChangeToRight
                                                         : NavigationCommand::kChangeToLeft});
        break;
      case 3:  // lane keeping, sometimes with an obstacle in the other lane
        if (pick(2) == 0) {
          cfg.obstacles.push_back({.lane = 1 - lane, .x = uniform(30.0, 120.0),
                                   .appear_time = 0.0, .relative = true});
        }
        break;
    }
    out.push_back(cfg);
  }
  return out;
}

}  // namespace cma
