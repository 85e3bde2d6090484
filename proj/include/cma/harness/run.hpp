#pragma once

// Single scenario runs with their manifest and on-disk artifacts.

#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "cma/evalkit.hpp"
#include "cma/harness/config.hpp"

namespace cma {

std::string_view CodeVersion();

// Root for run directories: $CMA_RUN_ROOT, or ./runs when unset.
std::filesystem::path RunRoot();

struct RunManifest {
  std::string config_hash;  // covers every input that affects the trajectory
  std::uint64_t seed = 0;
  std::string code_version;
  std::string controller;  // "teacher" or "lstm"
  std::string controller_checksum;
  std::string start_time;  // ISO 8601 UTC, informational only

  nlohmann::json ToJson() const;
  // Directory name: the first 16 hex digits of config_hash.
  std::string DirName() const;
};

struct LoadedController {
  std::shared_ptr<SteeringController> controller;
  std::string checksum;
};

// Teacher, or the LSTM from the configured checkpoint.
LoadedController MakeController(const HarnessConfig& cfg);

RunManifest MakeManifest(const HarnessConfig& cfg, const std::string& controller_checksum);

struct RunArtifacts {
  RunManifest manifest;
  std::filesystem::path dir;
  Trajectory trajectory;
  TrajectoryMetrics metrics;
};

// Writes manifest.json, trajectory.csv and metrics.json under
// root / manifest.DirName().
RunArtifacts ExecuteRun(const HarnessConfig& cfg, const std::filesystem::path& root);

}  // namespace cma
