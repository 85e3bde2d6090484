#pragma once

// Scenario files (TOML, schema_version = 1). Every key is optional except
// schema_version; unknown keys and tables are rejected.
//
//   schema_version = 1
//   name = "two_lane"            seed = 1   dt = 0.05   horizon = 30.0
//   appear_jitter = 0.0
//   [road]        num_lanes, lane_width, length
//   [start]       lane (sets y to the lane centre), offset, x, y, psi, v
//   [speed]       cruise, brake_decel, accel_limit
//   [camera]      f, u0, v0, height, image_w, image_h, forward_offset,
//                 side_yaw_deg
//   [perception]  noise_sigma, max_range, straddle_half_width
//   [safety]      min_distance, time_headway
//   [planner]     boundary_ratio, boundary_tolerance
//   [teacher]     k_p, k_h, k_v, steer_limit, steer_rate_limit,
//                 lat_accel_limit
//   [controller]  kind = "teacher" | "lstm", checkpoint = "path"
//   [[obstacles]] lane, x, appear_time, relative
//   [[navi]]      t, command = "StayInLane" | "ChangeToLeft" | "ChangeToRight"

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "cma/simworld.hpp"

namespace cma {

inline constexpr int kConfigSchemaVersion = 1;

struct ControllerChoice {
  std::string kind = "teacher";
  std::filesystem::path checkpoint;  // relative paths resolve against the config file
};

struct HarnessConfig {
  ScenarioConfig scenario;
  ControllerChoice controller;
};

// Throws Error(kConfigInvalid) on schema violations and Error(kIoError) when
// the file cannot be read.
HarnessConfig ParseConfig(std::string_view toml_text,
                          const std::filesystem::path& base_dir = {});
HarnessConfig LoadConfig(const std::filesystem::path& path);

// Every field that affects a run, in a fixed key order.
nlohmann::json ScenarioToJson(const ScenarioConfig& cfg);

}  // namespace cma
