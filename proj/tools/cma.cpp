// Command-line front end: scenario runs, data generation, training,
// gradient checks, evaluation, the telemetry service and the acceptance suite.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cma/error.hpp"
#include "cma/harness/acceptance.hpp"
#include "cma/harness/cloning.hpp"
#include "cma/harness/config.hpp"
#include "cma/harness/hash.hpp"
#include "cma/harness/run.hpp"
#include "cma/harness/serve.hpp"
#include "cma/scenarios.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cma {
namespace {

constexpr int kExitFailed = 1;
constexpr int kExitError = 2;

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
}

// Output directory named by the hash of everything that determines it.
fs::path OutputDir(const fs::path& root, json inputs) {
  inputs["code_version"] = std::string(CodeVersion());
  const std::string hash = Sha256Hex(inputs.dump());
  const fs::path dir = root / hash.substr(0, 16);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string());
  inputs["hash"] = hash;
  WriteFile(dir / "manifest.json", inputs.dump(2) + "\n");
  return dir;
}

void Print(const json& j) { std::cout << j.dump(2) << std::endl; }

int Run(const fs::path& config, const std::string& controller, const fs::path& checkpoint,
        const fs::path& root) {
  HarnessConfig cfg = LoadConfig(config);
  if (!controller.empty()) cfg.controller.kind = controller;
  if (!checkpoint.empty()) cfg.controller.checkpoint = checkpoint;
  const RunArtifacts a = ExecuteRun(cfg, root);
  Print({{"dir", a.dir.string()},
         {"config_hash", a.manifest.config_hash},
         {"metrics", ToJson(a.metrics)}});
  return 0;
}

int GenData(int scenarios, std::uint64_t seed, const DatasetOptions& options,
            const fs::path& root) {
  const fs::path dir = OutputDir(root, {{"command", "gen-data"},
                                        {"scenarios", scenarios},
                                        {"scenario_seed", seed},
                                        {"stride", options.stride},
                                        {"held_out_every", options.held_out_every}});
  const Dataset data = GenerateDataset(DemonstrationScenarios(scenarios, seed), options);
  SaveDataset(data, dir / "dataset.bin");
  Print({{"dir", dir.string()},
         {"dataset", (dir / "dataset.bin").string()},
         {"train_windows", data.train.size()},
         {"held_out_windows", data.held_out.size()}});
  return 0;
}

int TrainCmd(const fs::path& dataset, const TrainHyper& hyper, const fs::path& root) {
  const fs::path dir =
      OutputDir(root, {{"command", "train"},
                       {"dataset_sha256", Sha256Hex(ReadFile(dataset))},
                       {"optimizer", hyper.optimizer == Optimizer::kAdam ? "adam" : "sgd"},
                       {"lr", hyper.lr},
                       {"epochs", hyper.epochs},
                       {"batch", hyper.batch},
                       {"seed", hyper.seed},
                       {"clip_norm", hyper.clip_norm}});
  const CloningResult r = TrainOnDataset(LoadDataset(dataset), hyper, [](int e, double loss) {
    fmt::print(stderr, "epoch {} loss {:.4e}\n", e, loss);
  });
  SaveCheckpoint(r.checkpoint, dir / "checkpoint.json");
  std::string curve = "epoch,loss\n";
  for (std::size_t e = 0; e < r.loss_curve.size(); ++e) {
    curve += fmt::format("{},{}\n", e + 1, r.loss_curve[e]);
  }
  WriteFile(dir / "loss_curve.csv", curve);
  Print({{"dir", dir.string()},
         {"checkpoint", (dir / "checkpoint.json").string()},
         {"checksum", ParamsChecksum(r.checkpoint.params)},
         {"train_mse", r.train_mse},
         {"held_out_mse", r.held_out_mse}});
  return 0;
}

int GradCheckCmd(std::uint64_t seed, double eps) {
  LstmParams p = LstmParams::Random(seed);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LstmParams::ForEachTensor(p, [&](const std::string& name, auto& t) {
    if (name.ends_with(".b")) {
      for (Eigen::Index j = 0; j < t.size(); ++j) t.data()[j] += 0.3 * u(rng);
    }
  });
  std::vector<FlatMap> seq(kSequenceLength);
  for (FlatMap& m : seq) {
    for (double& v : m) v = u(rng);
  }
  GradCheckOptions opt;
  opt.seed = seed;
  const double err = GradCheck(p, seq, 0.4, eps, opt);
  const bool pass = err < 1e-4;
  Print({{"seed", seed}, {"eps", eps}, {"max_rel_error", err}, {"pass", pass}});
  return pass ? 0 : kExitFailed;
}

int Eval(const fs::path& trajectory, const fs::path& config, int lanes, double lane_width,
         const fs::path& root) {
  Road road;
  if (!config.empty()) {
    road = LoadConfig(config).scenario.road;
  } else {
    road.num_lanes = lanes;
    road.lane_width = lane_width;
  }
  const std::string text = ReadFile(trajectory);
  std::istringstream in(text);
  const TrajectoryMetrics m = ComputeTrajectoryMetrics(ReadTrajectoryCsv(in, road));
  const fs::path dir = OutputDir(root, {{"command", "eval"},
                                        {"trajectory_sha256", Sha256Hex(text)},
                                        {"num_lanes", road.num_lanes},
                                        {"lane_width", road.lane_width}});
  WriteFile(dir / "metrics.json", ToJson(m).dump(2) + "\n");
  Print({{"dir", dir.string()}, {"metrics", ToJson(m)}});
  return 0;
}

std::atomic<bool> g_stop{false};

int Serve(const fs::path& config, const ServeOptions& options) {
  TelemetryServer server(LoadConfig(config), options);
  server.Start();
  Print({{"listening", fmt::format("ws://{}:{}/ws", options.address, server.port())},
         {"healthz", fmt::format("http://{}:{}/healthz", options.address, server.port())}});
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.Stop();
  return 0;
}

int AcceptanceSuite(const std::vector<int>& only, const fs::path& root) {
  const fs::path dir = OutputDir(root, {{"command", "paper-suite"}, {"only", only}});
  AcceptanceOptions options;
  options.only = only;
  options.scratch = dir / "scratch";
  options.on_epoch = [](int e, double loss) {
    fmt::print(stderr, "  cloning epoch {} loss {:.4e}\n", e, loss);
  };
  options.on_result = [](const CriterionResult& r) {
    fmt::print("{}\n", FormatResult(r));
    std::fflush(stdout);
  };
  const std::vector<CriterionResult> results = RunAcceptance(options);
  json table = json::array();
  bool all = true;
  for (const CriterionResult& r : results) {
    all = all && r.pass;
    table.push_back({{"id", r.id},
                     {"name", r.name},
                     {"pass", r.pass},
                     {"seconds", r.seconds},
                     {"budget_seconds", r.budget_seconds},
                     {"detail", r.detail}});
  }
  WriteFile(dir / "results.json", table.dump(2) + "\n");
  fmt::print("{} of {} criteria passed; results in {}\n",
             std::count_if(results.begin(), results.end(), [](auto& r) { return r.pass; }),
             results.size(), (dir / "results.json").string());
  return all ? 0 : kExitFailed;
}

}  // namespace
}  // namespace cma

int main(int argc, char** argv) {
  using namespace cma;
  CLI::App app{"Cognitive-map lane-change driving harness"};
  app.require_subcommand(1);
  fs::path root;
  app.add_option("--root", root, "Output root (default $CMA_RUN_ROOT or ./runs)");

  fs::path config, checkpoint;
  std::string controller;
  auto* run = app.add_subcommand("run", "Run one scenario and write trajectory and metrics");
  run->add_option("--config", config, "Scenario TOML")->required();
  run->add_option("--controller", controller, "Override the controller")
      ->check(CLI::IsMember({"teacher", "lstm"}));
  run->add_option("--checkpoint", checkpoint, "LSTM checkpoint");

  int scenarios = 24;
  std::uint64_t scenario_seed = 11;
  DatasetOptions data_options = CloningOptions{}.data;
  auto* gen = app.add_subcommand("gen-data", "Roll out the teacher and write a window dataset");
  gen->add_option("--scenarios", scenarios)->check(CLI::PositiveNumber);
  gen->add_option("--seed", scenario_seed);
  gen->add_option("--stride", data_options.stride)->check(CLI::PositiveNumber);
  gen->add_option("--held-out-every", data_options.held_out_every)->check(CLI::PositiveNumber);

  fs::path dataset;
  TrainHyper hyper = CloningOptions{}.hyper;
  std::string optimizer = "adam";
  auto* train = app.add_subcommand("train", "Train the LSTM on a dataset file");
  train->add_option("--dataset", dataset)->required();
  train->add_option("--lr", hyper.lr);
  train->add_option("--epochs", hyper.epochs)->check(CLI::PositiveNumber);
  train->add_option("--batch", hyper.batch)->check(CLI::PositiveNumber);
  train->add_option("--seed", hyper.seed);
  train->add_option("--optimizer", optimizer)->check(CLI::IsMember({"adam", "sgd"}));

  std::uint64_t grad_seed = 0;
  double eps = 1e-5;
  auto* grad = app.add_subcommand("gradcheck", "Compare BPTT gradients with finite differences");
  grad->add_option("--seed", grad_seed);
  grad->add_option("--eps", eps);

  fs::path trajectory;
  int lanes = 2;
  double lane_width = 3.5;
  auto* eval = app.add_subcommand("eval", "Metrics for a trajectory CSV");
  eval->add_option("--trajectory", trajectory)->required();
  eval->add_option("--config", config, "Scenario TOML supplying the road")
      ;
  eval->add_option("--lanes", lanes)->check(CLI::PositiveNumber);
  eval->add_option("--lane-width", lane_width)->check(CLI::PositiveNumber);

  ServeOptions serve_options;
  auto* serve = app.add_subcommand("serve", "Live telemetry over WebSocket /ws");
  serve->add_option("--config", config)->required();
  serve->add_option("--address", serve_options.address);
  serve->add_option("--port", serve_options.port);
  serve->add_option("--time-scale", serve_options.time_scale, "<= 0 runs unpaced");

  std::vector<int> only;
  auto* suite = app.add_subcommand("paper-suite", "Run the acceptance criteria");
  suite->add_option("--only", only, "Criterion ids")->delimiter(',')->check(CLI::Range(1, 8));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", {{"code", "Usage"}, {"message", e.what()}}}}.dump() << std::endl;
    return kExitError;
  }
  if (root.empty()) root = RunRoot();
  try {
    if (*run) return Run(config, controller, checkpoint, root);
    if (*gen) return GenData(scenarios, scenario_seed, data_options, root);
    if (*train) {
      hyper.optimizer = optimizer == "sgd" ? Optimizer::kSgd : Optimizer::kAdam;
      return TrainCmd(dataset, hyper, root);
    }
    if (*grad) return GradCheckCmd(grad_seed, eps);
    if (*eval) return Eval(trajectory, config, lanes, lane_width, root);
    if (*serve) return Serve(config, serve_options);
    if (*suite) return AcceptanceSuite(only, root);
  } catch (const Error& e) {
    std::cerr << json{{"error", {{"code", ErrorCodeName(e.code())}, {"message", e.what()}}}}.dump()
              << std::endl;
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump()
              << std::endl;
    return kExitError;
  }
  return kExitError;
}
