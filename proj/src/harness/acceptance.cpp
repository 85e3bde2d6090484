#include "cma/harness/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "cma/camgeom.hpp"
#include "cma/cogmap.hpp"
#include "cma/error.hpp"
#include "cma/evalkit.hpp"
#include "cma/harness/run.hpp"
#include "cma/scenarios.hpp"

namespace cma {
namespace {

using Clock = std::chrono::steady_clock;

template <typename Fn>
CriterionResult Timed(int id, std::string name, double budget, Fn&& body) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  r.budget_seconds = budget;
  const auto start = Clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = fmt::format("exception: {}", e.what());
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (budget > 0.0 && r.seconds >= budget) {
    r.pass = false;
    r.detail += fmt::format(" runtime {:.2f} s over {:.0f} s", r.seconds, budget);
  }
  return r;
}

// Flat-road pinhole written out directly, sharing nothing with camgeom.
struct PlaneOracle {
  long double f, u0, v0, H;
  explicit PlaneOracle(const CameraModel& cam) : f(cam.f), u0(cam.u0), v0(cam.v0), H(cam.H) {}
  PixelPoint Project(long double X, long double Z) const {
    return {static_cast<double>(v0 + f * X / Z), static_cast<double>(u0 + f * H / Z)};
  }
  std::pair<long double, long double> Lift(const PixelPoint& p) const {
    const long double dy = static_cast<long double>(p.y) - u0;
    return {(static_cast<long double>(p.x) - v0) * H / dy, f * H / dy};
  }
};

long double FootDistance(const GroundPoint& m, const GroundPoint& b) {
  const long double ux = static_cast<long double>(b.X) - m.X;
  const long double uz = static_cast<long double>(b.Z) - m.Z;
  const long double t = -(m.X * ux + m.Z * uz) / (ux * ux + uz * uz);
  const long double fx = m.X + t * ux;
  const long double fz = m.Z + t * uz;
  return std::sqrt(fx * fx + fz * fz);
}

long double DirectionAngle(const GroundPoint& m, const GroundPoint& b) {
  const GroundPoint& near = m.Z <= b.Z ? m : b;
  const GroundPoint& far = m.Z <= b.Z ? b : m;
  return std::atan2(static_cast<long double>(far.X) - near.X,
                    static_cast<long double>(far.Z) - near.Z);
}

bool EveryChangeCompletes(const TrajectoryMetrics& m) {
  return m.changes_started >= 1 && m.changes_completed == m.changes_started;
}

std::string ReadBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

CriterionResult CheckGeometry() {
  return Timed(1, "geometry round trip and boundary distance", 1.0, [](CriterionResult& r) {
    const CameraModel cam;
    const PlaneOracle oracle(cam);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> lateral(-8.0, 8.0), depth(4.0, 80.0);
    double round_trip = 0.0, projection = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const GroundPoint g{lateral(rng), depth(rng)};
      const PixelPoint p = GroundToPixel(g, cam);
      const PixelPoint q = oracle.Project(g.X, g.Z);
      projection = std::max({projection, std::abs(p.x - q.x), std::abs(p.y - q.y)});
      const GroundPoint back = PixelToGround(p, cam);
      round_trip = std::max({round_trip, std::abs(back.X - g.X), std::abs(back.Z - g.Z)});
    }
    double distance = 0.0, angle = 0.0;
    int pairs = 0;
    while (pairs < 1000) {
      const GroundPoint m{lateral(rng), depth(rng)};
      const GroundPoint b{lateral(rng), depth(rng)};
      if (std::abs(b.Z - m.Z) < 0.5) continue;
      ++pairs;
      distance = std::max(
          distance, std::abs(LaneDistance(m, b) - static_cast<double>(FootDistance(m, b))));
      angle = std::max(
          angle, std::abs(VehicleLaneAngle(m, b) - static_cast<double>(DirectionAngle(m, b))));
    }
    r.pass = round_trip < 1e-9 && projection < 1e-9 && distance < 1e-12 && angle < 1e-12;
    r.detail = fmt::format("round_trip={:.2e} m projection={:.2e} px lane_distance={:.2e} m lane_angle={:.2e} rad",
                           round_trip, projection, distance, angle);
  });
}

CriterionResult CheckIntentionTable() {
  return Timed(2, "intention truth table", 1.0, [](CriterionResult& r) {
    using G = NavigationCommand;
    using D = DrivingIntention;
    struct Row {
      G g;
      bool c, l, r;
      D expected;
    };
    // Stay: keep lane if the centre is clear, else left, else right, else brake.
    // Change: go if the target side is clear, else brake.
    static constexpr Row kTable[] = {
        {G::kStayInLane, 1, 1, 1, D::kStayInLane},
        {G::kStayInLane, 1, 1, 0, D::kStayInLane},
        {G::kStayInLane, 1, 0, 1, D::kStayInLane},
        {G::kStayInLane, 1, 0, 0, D::kStayInLane},
        {G::kStayInLane, 0, 1, 1, D::kChangeToLeft},
        {G::kStayInLane, 0, 1, 0, D::kChangeToLeft},
        {G::kStayInLane, 0, 0, 1, D::kChangeToRight},
        {G::kStayInLane, 0, 0, 0, D::kBrakeAndStayInLane},
        {G::kChangeToLeft, 1, 1, 1, D::kChangeToLeft},
        {G::kChangeToLeft, 1, 1, 0, D::kChangeToLeft},
        {G::kChangeToLeft, 1, 0, 1, D::kBrakeAndStayInLane},
        {G::kChangeToLeft, 1, 0, 0, D::kBrakeAndStayInLane},
        {G::kChangeToLeft, 0, 1, 1, D::kChangeToLeft},
        {G::kChangeToLeft, 0, 1, 0, D::kChangeToLeft},
        {G::kChangeToLeft, 0, 0, 1, D::kBrakeAndStayInLane},
        {G::kChangeToLeft, 0, 0, 0, D::kBrakeAndStayInLane},
        {G::kChangeToRight, 1, 1, 1, D::kChangeToRight},
        {G::kChangeToRight, 1, 1, 0, D::kBrakeAndStayInLane},
        {G::kChangeToRight, 1, 0, 1, D::kChangeToRight},
        {G::kChangeToRight, 1, 0, 0, D::kBrakeAndStayInLane},
        {G::kChangeToRight, 0, 1, 1, D::kChangeToRight},
        {G::kChangeToRight, 0, 1, 0, D::kBrakeAndStayInLane},
        {G::kChangeToRight, 0, 0, 1, D::kChangeToRight},
        {G::kChangeToRight, 0, 0, 0, D::kBrakeAndStayInLane},
    };
    const double safety = 30.0;
    // Far from the threshold, then exactly on it (safe) and one ulp below.
    const std::pair<double, double> levels[] = {
        {100.0, 10.0}, {safety, std::nextafter(safety, 0.0)}};
    int cases = 0, mismatches = 0;
    for (const auto& [safe, unsafe] : levels) {
      for (const Row& row : kTable) {
        ++cases;
        const D got = DeriveIntention(row.g, row.c ? safe : unsafe, row.l ? safe : unsafe,
                                      row.r ? safe : unsafe, safety);
        if (got != row.expected) ++mismatches;
      }
    }
    r.pass = mismatches == 0;
    r.detail = fmt::format("{} cases, {} mismatches", cases, mismatches);
  });
}

CriterionResult CheckScenarioBattery() {
  return Timed(3, "teacher scenario battery", 10.0, [](CriterionResult& r) {
    double settle = 0.0, lat = 0.0, mirror = 0.0;
    std::vector<std::string> failed;
    for (const ScenarioConfig& cfg : LaneChangeBattery()) {
      const Trajectory a = RunScenario(cfg, std::make_shared<TeacherController>(cfg.gains));
      const ScenarioConfig mirrored = MirrorScenario(cfg);
      const Trajectory b =
          RunScenario(mirrored, std::make_shared<TeacherController>(mirrored.gains));
      const TrajectoryMetrics m = ComputeTrajectoryMetrics(a);
      const TrajectoryMetrics mm = ComputeTrajectoryMetrics(b);
      double worst = a.ticks.size() == b.ticks.size() ? 0.0 : HUGE_VAL;
      const double W = cfg.road.Width();
      for (std::size_t k = 0; k < std::min(a.ticks.size(), b.ticks.size()); ++k) {
        worst = std::max({worst, std::abs(a.ticks[k].vehicle.y - (W - b.ticks[k].vehicle.y)),
                          std::abs(a.ticks[k].vehicle.x - b.ticks[k].vehicle.x)});
      }
      settle = std::max({settle, m.settle_offset, mm.settle_offset});
      lat = std::max({lat, m.max_abs_lat_accel, mm.max_abs_lat_accel});
      mirror = std::max(mirror, worst);
      const bool ok = EveryChangeCompletes(m) && EveryChangeCompletes(mm) && !m.collided &&
                      !mm.collided && m.settle_offset < 0.2 && mm.settle_offset < 0.2 &&
                      m.max_abs_lat_accel < 3.0 && mm.max_abs_lat_accel < 3.0 &&
                      worst < 1e-6;
      if (!ok) failed.push_back(cfg.name);
    }
    r.pass = failed.empty();
    r.detail = fmt::format("settle={:.3f} m lat_accel={:.2f} m/s2 mirror={:.1e} m", settle,
                           lat, mirror);
    for (const auto& name : failed) r.detail += " failed:" + name;
  });
}

CriterionResult CheckGradients() {
  return Timed(4, "LSTM gradient check", 30.0, [](CriterionResult& r) {
    auto random_sequence = [](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      std::vector<FlatMap> seq(kSequenceLength);
      for (FlatMap& m : seq) {
        for (double& v : m) v = u(rng);
      }
      return seq;
    };
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 10; ++k) {
      LstmParams p = LstmParams::Random(100 + k);
      std::mt19937_64 rng(k);
      std::uniform_real_distribution<double> u(-0.3, 0.3);
      LstmParams::ForEachTensor(p, [&](const std::string& name, auto& t) {
        if (name.ends_with(".b")) {
          for (Eigen::Index j = 0; j < t.size(); ++j) t.data()[j] += u(rng);
        }
      });
      GradCheckOptions opt;
      opt.seed = k;
      worst = std::max(worst, GradCheck(p, random_sequence(200 + k), 0.4, 1e-5, opt));
    }
    // Two injected faults: a dropped tensor and a 1% scale error.
    const LstmParams p = LstmParams::Random(31);
    const auto seq = random_sequence(32);
    GradCheckOptions dropped;
    dropped.backward = [](const LstmParams& params, std::span<const FlatMap> s, double t) {
      LstmGradients g = Backward(params, s, t);
      g.lstm[1].W.setZero();
      return g;
    };
    GradCheckOptions scaled;
    scaled.backward = [](const LstmParams& params, std::span<const FlatMap> s, double t) {
      LstmGradients g = Backward(params, s, t);
      g.dense_in.W *= 1.01;
      return g;
    };
    const double fault_a = GradCheck(p, seq, 0.4, 1e-5, dropped);
    const double fault_b = GradCheck(p, seq, 0.4, 1e-5, scaled);
    r.pass = worst < 1e-4 && fault_a >= 1e-4 && fault_b >= 1e-4;
    r.detail = fmt::format("max_rel_error={:.2e} faults={:.2e},{:.2e}", worst, fault_a, fault_b);
  });
}

CriterionResult CheckCloning(const CloningOptions& options, const EpochCallback& on_epoch) {
  return Timed(5, "behaviour cloning", 900.0, [&](CriterionResult& r) {
    const CloningResult cloned = CloneTeacher(options, on_epoch);
    bool closed_loop = true;
    double worst_rms = 0.0, worst_bound = 0.0;
    std::vector<std::string> failed;
    for (const ScenarioConfig& cfg : FourDistanceBattery()) {
      const auto lstm = std::make_shared<LstmController>(
          cloned.checkpoint.params, cloned.checkpoint.norm, "lstm", cfg.gains.steer_limit);
      const TrajectoryMetrics m = ComputeTrajectoryMetrics(RunScenario(cfg, lstm));
      const TrajectoryMetrics t = ComputeTrajectoryMetrics(
          RunScenario(cfg, std::make_shared<TeacherController>(cfg.gains)));
      const double bound = std::max(0.3, 2.0 * t.rms_center_offset);
      worst_rms = std::max(worst_rms, m.rms_center_offset);
      worst_bound = std::max(worst_bound, bound);
      if (!EveryChangeCompletes(m) || m.collided || m.rms_center_offset > bound) {
        closed_loop = false;
        failed.push_back(cfg.name);
      }
    }
    r.pass = options.scenarios >= 20 && cloned.held_out_mse < 0.01 && closed_loop;
    r.detail = fmt::format(
        "scenarios={} windows={}/{} held_out_mse={:.2e} rad2 rms={:.3f} m bound={:.3f} m",
        options.scenarios, cloned.data.train.size(), cloned.data.held_out.size(),
        cloned.held_out_mse, worst_rms, worst_bound);
    for (const auto& name : failed) r.detail += " failed:" + name;
  });
}

CriterionResult CheckMetrics() {
  return Timed(6, "metrics oracle", 5.0, [](CriterionResult& r) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> dim(1, 40);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int pixel_mismatches = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const int w = dim(rng), h = dim(rng);
      const double dp = u(rng), dg = u(rng);
      BitMask p(w, h), g(w, h);
      std::size_t tp = 0, fp = 0, fn = 0;
      for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
          const bool a = u(rng) < dp, b = u(rng) < dg;
          p.set(col, row, a);
          g.set(col, row, b);
          tp += a && b;
          fp += a && !b;
          fn += !a && b;
        }
      }
      const PixelMetrics m = ComputePixelMetrics(p, g);
      bool ok = m.n_tp == tp && m.n_fp == fp && m.n_fn == fn;
      if (tp + fp > 0) ok = ok && m.precision == double(tp) / double(tp + fp);
      if (tp + fn > 0) ok = ok && m.recall == double(tp) / double(tp + fn);
      if (tp + fp + fn > 0) ok = ok && m.f1 == double(2 * tp) / double(2 * tp + fp + fn);
      pixel_mismatches += !ok;
    }

    const CameraModel cam;
    std::uniform_real_distribution<double> depth(2.5, 80.0);
    double row_error = 0.0;
    for (int k = 0; k < 50; ++k) {
      WorldState w;
      w.road.num_lanes = 1;
      w.vehicle = {100.0, 1.75, 0.0, 10.0, 0.0};
      const double d = depth(rng);
      w.obstacles.push_back({.lane = 0, .x = 100.0 + d});
      const BitMask mask = RenderLaneMask(w, cam);
      int top = cam.image_h;
      const int col = static_cast<int>(cam.v0);
      for (int row = cam.image_h - 1; row >= 0 && mask.at(col, row); --row) top = row;
      // Row inversion: the obstacle foot sits at row u0 + f H / d.
      const double expected = cam.u0 + cam.f * cam.H / d;
      row_error = std::max(row_error, std::abs(top - expected));
    }

    const CameraModel mounted = ScenarioConfig::DefaultCamera();
    WorldState w;
    w.vehicle = {50.0, 5.25, 0.0, 10.0, 0.0};
    const double bumper = w.geometry.length - w.geometry.rear_overhang;
    w.obstacles.push_back({.lane = 1, .x = w.vehicle.x + bumper + 10.0});
    PerceptionOptions noisy;
    noisy.noise_sigma = 1.0;
    std::vector<std::pair<double, double>> pairs;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
      const PerceptionVector p = Perceive(w, mounted, CameraSlot::kMiddle, noisy, seed);
      if (!p.p_o) throw Error(ErrorCode::kEmptyInput, "obstacle not perceived");
      pairs.emplace_back(ObstacleDistance(*p.p_o, mounted), 10.0);
    }
    const DistanceErrorStats s = ComputeDistanceErrorStats(pairs);
    r.pass = pixel_mismatches == 0 && row_error <= 1.0 && std::abs(s.mean) < 0.1;
    r.detail = fmt::format("pixel_mismatches={} mask_row_error={:.2f} px bias={:.3f} m std={:.3f} m",
                           pixel_mismatches, row_error, s.mean, s.std);
  });
}

CriterionResult CheckDeterminism(const std::filesystem::path& scratch) {
  return Timed(7, "determinism", 0.0, [&](CriterionResult& r) {
    HarnessConfig cfg;
    cfg.scenario = ObstacleScenario(3.5, 80.0, 1.0);
    const RunArtifacts a = ExecuteRun(cfg, scratch / "run_a");
    const RunArtifacts b = ExecuteRun(cfg, scratch / "run_b");
    const bool same_manifest = a.manifest.config_hash == b.manifest.config_hash;
    const bool same_csv =
        ReadBytes(a.dir / "trajectory.csv") == ReadBytes(b.dir / "trajectory.csv");

    DatasetOptions data_options;
    data_options.stride = 10;
    data_options.held_out_every = 2;
    const Dataset data = GenerateDataset(DemonstrationScenarios(2, 3), data_options);
    TrainHyper hyper = CloningOptions{}.hyper;
    hyper.epochs = 2;
    const CloningResult first = TrainOnDataset(data, hyper);
    const CloningResult second = TrainOnDataset(data, hyper);
    SaveCheckpoint(first.checkpoint, scratch / "ckpt_a.json");
    SaveCheckpoint(second.checkpoint, scratch / "ckpt_b.json");
    const bool same_ckpt =
        ReadBytes(scratch / "ckpt_a.json") == ReadBytes(scratch / "ckpt_b.json");
    r.pass = same_manifest && same_csv && same_ckpt;
    r.detail = fmt::format("manifest {} csv {} checkpoint {} ({})",
                           same_manifest ? "equal" : "differs", same_csv ? "equal" : "differs",
                           same_ckpt ? "equal" : "differs",
                           ParamsChecksum(first.checkpoint.params).substr(0, 16));
  });
}

CriterionResult CheckViewpoint() {
  return Timed(8, "viewpoint transform", 0.0, [](CriterionResult& r) {
    const CameraModel cam;
    const PlaneOracle oracle(cam);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
    double identity = 0.0, shift = 0.0, yaw = 0.0, compose = 0.0;
    for (int k = 0; k < 200; ++k) {
      const double X = 4.0 * u(rng), Z = 20.0 + 10.0 * u(rng);
      const PixelPoint p = oracle.Project(X, Z);

      const PixelPoint same = ViewpointTransform(p, cam, I, Eigen::Vector3d::Zero());
      identity = std::max({identity, std::abs(same.x - p.x), std::abs(same.y - p.y)});

      const double tx = 2.0 * u(rng), tz = 3.0 * u(rng);
      const PixelPoint shifted = ViewpointTransform(p, cam, I, Eigen::Vector3d(tx, 0.0, tz));
      const auto [gx, gz] = oracle.Lift(p);
      const PixelPoint shift_oracle = oracle.Project(gx + tx, gz + tz);
      shift = std::max({shift, std::abs(shifted.x - shift_oracle.x),
                        std::abs(shifted.y - shift_oracle.y)});

      const long double a = 0.3 * u(rng);
      const PixelPoint turned = ViewpointTransform(p, cam, YawRotation(static_cast<double>(a)),
                                                   Eigen::Vector3d::Zero());
      const PixelPoint yaw_oracle = oracle.Project(gx * std::cos(a) + gz * std::sin(a),
                                                   -gx * std::sin(a) + gz * std::cos(a));
      yaw = std::max({yaw, std::abs(turned.x - yaw_oracle.x), std::abs(turned.y - yaw_oracle.y)});

      const Eigen::Matrix3d R1 = YawRotation(0.2 * u(rng)), R2 = YawRotation(0.2 * u(rng));
      const Eigen::Vector3d T1(u(rng), 0.0, 0.5 * u(rng)), T2(u(rng), 0.0, 0.5 * u(rng));
      const PixelPoint two = ViewpointTransform(ViewpointTransform(p, cam, R1, T1), cam, R2, T2);
      const PixelPoint one = ViewpointTransform(p, cam, R2 * R1, R2 * T1 + T2);
      compose = std::max({compose, std::abs(two.x - one.x), std::abs(two.y - one.y)});
    }
    r.pass = identity < 1e-9 && shift < 1e-9 && yaw < 1e-9 && compose < 1e-9;
    r.detail = fmt::format("identity={:.1e} shift={:.1e} yaw={:.1e} compose={:.1e} px",
                           identity, shift, yaw, compose);
  });
}

std::vector<CriterionResult> RunAcceptance(const AcceptanceOptions& options) {
  auto wanted = [&](int id) {
    return options.only.empty() ||
           std::find(options.only.begin(), options.only.end(), id) != options.only.end();
  };
  std::filesystem::path scratch = options.scratch;
  if (scratch.empty()) scratch = std::filesystem::temp_directory_path() / "cma_acceptance";
  std::filesystem::create_directories(scratch);
  const std::function<CriterionResult()> checks[] = {
      CheckGeometry,
      CheckIntentionTable,
      CheckScenarioBattery,
      CheckGradients,
      [&] { return CheckCloning(options.cloning, options.on_epoch); },
      CheckMetrics,
      [&] { return CheckDeterminism(scratch); },
      CheckViewpoint,
  };
  std::vector<CriterionResult> out;
  for (int id = 1; id <= 8; ++id) {
    if (!wanted(id)) continue;
    out.push_back(checks[id - 1]());
    if (options.on_result) options.on_result(out.back());
  }
  return out;
}

std::string FormatResult(const CriterionResult& r) {
  return fmt::format("{}  criterion {}  {}  ({:.2f} s)  {}", r.pass ? "PASS" : "FAIL", r.id,
                     r.name, r.seconds, r.detail);
}

}  // namespace cma
