#pragma once

// Built-in scenario families: the simulated lane-change battery and the
// randomised teacher demonstrations used for behaviour cloning.

#include <cstdint>
#include <vector>

#include "cma/simworld.hpp"

namespace cma {

// Two-lane road, vehicle centred in the right lane at 40 km/h, one obstacle
// appearing `distance` ahead in the ego lane at appear_time.
ScenarioConfig ObstacleScenario(double lane_width, double distance,
                                double appear_time = 0.0);

// Obstacles at 50, 80, 100, 200 m on 3.5 m lanes, then 100 m on 4 m lanes
// with one obstacle and with a second obstacle in the adjacent lane further
// on (two changes). Appearance times are seeded-random in [0, 3] s.
std::vector<ScenarioConfig> LaneChangeBattery(std::uint64_t seed = 7);

// The 3.5 m single-obstacle scenarios (50, 80, 100, 200 m).
std::vector<ScenarioConfig> FourDistanceBattery(std::uint64_t seed = 7);

// Randomised teacher scenarios: start offsets and headings, obstacle
// distances and lanes, lane widths, cruise speeds and scripted navigation.
std::vector<ScenarioConfig> DemonstrationScenarios(int count, std::uint64_t seed);

}  // namespace cma
