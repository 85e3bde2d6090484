#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cma/error.hpp"
#include "cma/harness/checkpoint.hpp"
#include "cma/harness/cloning.hpp"
#include "cma/harness/config.hpp"
#include "cma/harness/dataset.hpp"
#include "cma/harness/hash.hpp"
#include "cma/harness/run.hpp"
#include "cma/scenarios.hpp"
#include "gtest/gtest.h"

namespace cma {
namespace {

namespace fs = std::filesystem;

ErrorCode CodeOf(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIoError;
}

fs::path Scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "cma_harness_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Hash, KnownDigests) {
  EXPECT_EQ(Sha256Hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(Sha256Hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

constexpr const char* kMinimal = R"(
schema_version = 1
name = "t"
[road]
num_lanes = 3
lane_width = 3.75
[[obstacles]]
lane = 2
x = 60.0
relative = true
[[navi]]
t = 2.0
command = "ChangeToLeft"
)";

TEST(Config, ParsesAndDefaults) {
  const HarnessConfig cfg = ParseConfig(kMinimal);
  EXPECT_EQ(cfg.scenario.name, "t");
  EXPECT_EQ(cfg.scenario.road.num_lanes, 3);
  // Start defaults to the centre of the rightmost lane.
  EXPECT_DOUBLE_EQ(cfg.scenario.start.y, 2.5 * 3.75);
  ASSERT_EQ(cfg.scenario.obstacles.size(), 1u);
  EXPECT_TRUE(cfg.scenario.obstacles[0].relative);
  ASSERT_EQ(cfg.scenario.navi.size(), 1u);
  EXPECT_EQ(cfg.scenario.navi[0].command, NavigationCommand::kChangeToLeft);
  EXPECT_EQ(cfg.controller.kind, "teacher");
}

TEST(Config, Rejections) {
  auto code = [](const std::string& text) { return CodeOf([&] { ParseConfig(text); }); };
  EXPECT_EQ(code("name = \"x\"\n"), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("schema_version = 2\n"), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("schema_version = 1\nspeling = 3\n"), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("schema_version = 1\n[road]\nlanes = 3\n"), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("schema_version = 1\n[[obstacles]]\nlane = 0\nz = 1.0\n"),
            ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("schema_version = 1\n[start]\nlane = 0\ny = 1.0\n"),
            ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("schema_version = 1\n[controller]\nkind = \"pid\"\n"),
            ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("schema_version = 1\n[[navi]]\nt = 1.0\ncommand = \"Up\"\n"),
            ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("schema_version = 1\ndt = 0.5\n"), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code("schema_version = = 1\n"), ErrorCode::kConfigInvalid);
  EXPECT_EQ(CodeOf([] { LoadConfig("/nonexistent/x.toml"); }), ErrorCode::kIoError);
}

TEST(Config, CheckpointPathIsRelativeToConfig) {
  const HarnessConfig cfg = ParseConfig(
      "schema_version = 1\n[controller]\nkind = \"lstm\"\ncheckpoint = \"m/c.json\"\n",
      "/data/cfg");
  EXPECT_EQ(cfg.controller.checkpoint, fs::path("/data/cfg/m/c.json"));
}

TEST(Config, ScenarioJsonIsCanonical) {
  const HarnessConfig a = ParseConfig(kMinimal);
  const HarnessConfig b = ParseConfig(kMinimal);
  EXPECT_EQ(ScenarioToJson(a.scenario).dump(), ScenarioToJson(b.scenario).dump());
  HarnessConfig c = a;
  c.scenario.obstacles[0].x = 61.0;
  EXPECT_NE(ScenarioToJson(a.scenario).dump(), ScenarioToJson(c.scenario).dump());
}

TEST(Config, ShippedExamplesParse) {
  int n = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(CMA_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".toml") continue;
    EXPECT_NO_THROW(LoadConfig(entry.path())) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 1);
}

Checkpoint SampleCheckpoint() {
  Checkpoint c;
  c.params = LstmParams::Random(4);
  c.norm = NormalizationTable::ForCamera(ScenarioConfig::DefaultCamera());
  c.meta = {{"note", "sample"}};
  return c;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const Checkpoint c = SampleCheckpoint();
  const std::string text = SerializeCheckpoint(c);
  const Checkpoint back = ParseCheckpoint(text);
  EXPECT_EQ(ParamsChecksum(back.params), ParamsChecksum(c.params));
  EXPECT_EQ(back.norm, c.norm);
  EXPECT_EQ(back.meta, c.meta);
  EXPECT_EQ(SerializeCheckpoint(back), text);
  const fs::path dir = Scratch("ckpt");
  SaveCheckpoint(c, dir / "c.json");
  EXPECT_EQ(ParamsChecksum(LoadCheckpoint(dir / "c.json").params), ParamsChecksum(c.params));
}

TEST(Checkpoint, DetectsTamperingAndShapes) {
  const Checkpoint c = SampleCheckpoint();
  nlohmann::json j = nlohmann::json::parse(SerializeCheckpoint(c));
  nlohmann::json tampered = j;
  tampered["tensors"]["dense_out.b"]["data"][0] = 0.123;
  EXPECT_EQ(CodeOf([&] { ParseCheckpoint(tampered.dump()); }), ErrorCode::kIoError);
  nlohmann::json reshaped = j;
  reshaped["tensors"]["dense_out.b"]["rows"] = 2;
  EXPECT_EQ(CodeOf([&] { ParseCheckpoint(reshaped.dump()); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(CodeOf([] { ParseCheckpoint("{}"); }), ErrorCode::kIoError);
  EXPECT_EQ(CodeOf([] { ParseCheckpoint("not json"); }), ErrorCode::kIoError);
  EXPECT_EQ(CodeOf([] { LoadCheckpoint("/nonexistent/c.json"); }), ErrorCode::kIoError);
}

Trajectory TicksOnly(int n) {
  Trajectory traj;
  for (int k = 0; k < n; ++k) {
    TickRecord r;
    r.k = k;
    r.teacher_steering = 0.001 * k;
    r.map.D_o = 0.01 * k;
    traj.ticks.push_back(r);
  }
  return traj;
}

TEST(Dataset, WindowCounts) {
  const NormalizationTable norm = NormalizationTable::ForCamera(ScenarioConfig::DefaultCamera());
  const Trajectory traj = TicksOnly(600);
  EXPECT_EQ(TrajectoryWindows(traj, norm, 1).size(), 581u);
  EXPECT_EQ(TrajectoryWindows(traj, norm, 5).size(), 117u);
  EXPECT_EQ(TrajectoryWindows(TicksOnly(19), norm, 1).size(), 0u);
  EXPECT_EQ(TrajectoryWindows(TicksOnly(20), norm, 1).size(), 1u);
  EXPECT_EQ(CodeOf([&] { TrajectoryWindows(traj, norm, 0); }), ErrorCode::kConfigInvalid);
}

TEST(Dataset, WindowsEndAtTheLabelledTick) {
  const NormalizationTable norm = NormalizationTable::ForCamera(ScenarioConfig::DefaultCamera());
  const Trajectory traj = TicksOnly(60);
  const auto windows = TrajectoryWindows(traj, norm, 4);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const std::size_t end = 19 + 4 * i;
    EXPECT_EQ(windows[i].target, traj.ticks[end].teacher_steering);
    EXPECT_EQ(windows[i].maps.back(), Flatten(traj.ticks[end].map, norm));
    EXPECT_EQ(windows[i].maps.front(), Flatten(traj.ticks[end - 19].map, norm));
  }
}

TEST(Dataset, SplitsByScenarioAndRoundTrips) {
  EXPECT_EQ(CodeOf([] { GenerateDataset({}, {}); }), ErrorCode::kEmptyDataset);
  DatasetOptions options;
  options.stride = 20;
  options.held_out_every = 2;
  const auto configs = DemonstrationScenarios(4, 3);
  const Dataset d = GenerateDataset(configs, options);
  std::size_t expected_train = 0, expected_held = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const Trajectory t =
        RunScenario(configs[i], std::make_shared<TeacherController>(configs[i].gains));
    ((i + 1) % 2 == 0 ? expected_held : expected_train) +=
        TrajectoryWindows(t, d.norm, 20).size();
  }
  EXPECT_EQ(d.train.size(), expected_train);
  EXPECT_EQ(d.held_out.size(), expected_held);

  const fs::path dir = Scratch("dataset");
  SaveDataset(d, dir / "d.bin");
  const Dataset back = LoadDataset(dir / "d.bin");
  EXPECT_EQ(back.norm, d.norm);
  ASSERT_EQ(back.train.size(), d.train.size());
  ASSERT_EQ(back.held_out.size(), d.held_out.size());
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    EXPECT_EQ(back.train[i].target, d.train[i].target);
    EXPECT_EQ(back.train[i].maps, d.train[i].maps);
  }

  const std::string bytes = ReadFile(dir / "d.bin");
  std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_EQ(CodeOf([&] { LoadDataset(dir / "short.bin"); }), ErrorCode::kIoError);
  std::ofstream(dir / "junk.bin", std::ios::binary) << "definitely not a dataset";
  EXPECT_EQ(CodeOf([&] { LoadDataset(dir / "junk.bin"); }), ErrorCode::kIoError);
}

TEST(Cloning, EmptyTrainingSplit) {
  EXPECT_EQ(CodeOf([] { TrainOnDataset(Dataset{}, TrainHyper{}); }), ErrorCode::kEmptyDataset);
}

TEST(Run, ManifestHashCoversInputs) {
  HarnessConfig cfg;
  cfg.scenario = ObstacleScenario(3.5, 80.0);
  const RunManifest a = MakeManifest(cfg, "teacher");
  EXPECT_EQ(a.config_hash, MakeManifest(cfg, "teacher").config_hash);
  EXPECT_EQ(a.config_hash.size(), 64u);
  EXPECT_EQ(a.DirName(), a.config_hash.substr(0, 16));
  HarnessConfig b = cfg;
  b.scenario.seed += 1;
  EXPECT_NE(MakeManifest(b, "teacher").config_hash, a.config_hash);
  b = cfg;
  b.scenario.gains.k_p = 0.25;
  EXPECT_NE(MakeManifest(b, "teacher").config_hash, a.config_hash);
  EXPECT_NE(MakeManifest(cfg, "other").config_hash, a.config_hash);
}

TEST(Run, ArtifactsAreDeterministic) {
  HarnessConfig cfg;
  cfg.scenario = ObstacleScenario(3.5, 80.0, 1.0);
  const fs::path root = Scratch("runs");
  const RunArtifacts a = ExecuteRun(cfg, root / "a");
  const RunArtifacts b = ExecuteRun(cfg, root / "b");
  for (const char* f : {"manifest.json", "trajectory.csv", "metrics.json"}) {
    EXPECT_TRUE(fs::exists(a.dir / f)) << f;
  }
  EXPECT_EQ(a.dir.filename(), b.dir.filename());
  EXPECT_EQ(ReadFile(a.dir / "trajectory.csv"), ReadFile(b.dir / "trajectory.csv"));
  EXPECT_EQ(ReadFile(a.dir / "metrics.json"), ReadFile(b.dir / "metrics.json"));
  const auto manifest = nlohmann::json::parse(ReadFile(a.dir / "manifest.json"));
  EXPECT_EQ(manifest.at("config_hash"), a.manifest.config_hash);
  EXPECT_EQ(a.metrics.changes_completed, 1);
}

TEST(Run, LstmNeedsReadableCheckpoint) {
  HarnessConfig cfg;
  cfg.controller.kind = "lstm";
  EXPECT_EQ(CodeOf([&] { MakeController(cfg); }), ErrorCode::kConfigInvalid);
  cfg.controller.checkpoint = "/nonexistent/c.json";
  EXPECT_EQ(CodeOf([&] { MakeController(cfg); }), ErrorCode::kIoError);

  const fs::path dir = Scratch("lstm");
  SaveCheckpoint(SampleCheckpoint(), dir / "c.json");
  cfg.controller.checkpoint = dir / "c.json";
  const LoadedController c = MakeController(cfg);
  EXPECT_EQ(c.checksum, ParamsChecksum(SampleCheckpoint().params));
  EXPECT_EQ(c.controller->Id(), "lstm");
}

}  // namespace
}  // namespace cma
