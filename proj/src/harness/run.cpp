#include "cma/harness/run.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "cma/error.hpp"
#include "cma/harness/checkpoint.hpp"
#include "cma/harness/hash.hpp"

#ifndef CMA_VERSION
#define CMA_VERSION "dev"
#endif

namespace cma {
namespace {

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", path.string()));
}

}  // namespace

std::string_view CodeVersion() { return CMA_VERSION; }

std::filesystem::path RunRoot() {
  const char* env = std::getenv("CMA_RUN_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

nlohmann::json RunManifest::ToJson() const {
  return {{"config_hash", config_hash},
          {"seed", seed},
          {"code_version", code_version},
          {"controller", controller},
          {"controller_checksum", controller_checksum},
          {"start_time", start_time}};
}

std::string RunManifest::DirName() const { return config_hash.substr(0, 16); }

LoadedController MakeController(const HarnessConfig& cfg) {
  if (cfg.controller.kind == "teacher") {
    return {std::make_shared<TeacherController>(cfg.scenario.gains), "teacher"};
  }
  if (cfg.controller.checkpoint.empty()) {
    throw Error(ErrorCode::kConfigInvalid, "controller.kind = lstm needs controller.checkpoint");
  }
  Checkpoint ckpt = LoadCheckpoint(cfg.controller.checkpoint);
  const std::string checksum = ParamsChecksum(ckpt.params);
  return {std::make_shared<LstmController>(std::move(ckpt.params), ckpt.norm, "lstm",
                                           cfg.scenario.gains.steer_limit),
          checksum};
}

RunManifest MakeManifest(const HarnessConfig& cfg, const std::string& controller_checksum) {
  RunManifest m;
  m.seed = cfg.scenario.seed;
  m.code_version = std::string(CodeVersion());
  m.controller = cfg.controller.kind;
  m.controller_checksum = controller_checksum;
  const nlohmann::json hashed = {{"scenario", ScenarioToJson(cfg.scenario)},
                                 {"controller", m.controller},
                                 {"controller_checksum", m.controller_checksum},
                                 {"code_version", m.code_version}};
  m.config_hash = Sha256Hex(hashed.dump());
  m.start_time = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}",
                             fmt::gmtime(std::chrono::system_clock::to_time_t(
                                 std::chrono::system_clock::now())));
  return m;
}

RunArtifacts ExecuteRun(const HarnessConfig& cfg, const std::filesystem::path& root) {
  LoadedController loaded = MakeController(cfg);
  RunArtifacts out;
  out.manifest = MakeManifest(cfg, loaded.checksum);
  out.dir = root / out.manifest.DirName();
  std::error_code ec;
  std::filesystem::create_directories(out.dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError,
                fmt::format("cannot create {}: {}", out.dir.string(), ec.message()));
  }
  out.trajectory = RunScenario(cfg.scenario, loaded.controller);
  out.metrics = ComputeTrajectoryMetrics(out.trajectory);

  std::ostringstream csv;
  WriteTrajectoryCsv(out.trajectory, csv);
  WriteText(out.dir / "trajectory.csv", csv.str());
  WriteText(out.dir / "metrics.json", ToJson(out.metrics).dump(2) + "\n");
  nlohmann::json manifest = out.manifest.ToJson();
  manifest["scenario"] = ScenarioToJson(cfg.scenario);
  WriteText(out.dir / "manifest.json", manifest.dump(2) + "\n");
  return out;
}

}  // namespace cma
