#include "cma/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "cma/error.hpp"

namespace cma {
namespace {

[[noreturn]] void Invalid(const std::string& msg) {
  throw Error(ErrorCode::kConfigInvalid, msg);
}

// Reads typed keys from one table and remembers which ones were used, so
// leftovers can be reported as unknown.
class TableReader {
 public:
  TableReader(const toml::table& table, std::string path)
      : table_(table), path_(std::move(path)) {}

  void Double(const char* key, double& dst) {
    const toml::node* n = Take(key);
    if (!n) return;
    if (auto v = n->value_exact<double>()) {
      dst = *v;
    } else if (auto i = n->value_exact<std::int64_t>()) {
      dst = static_cast<double>(*i);
    } else {
      Invalid(fmt::format("{} must be a number", Name(key)));
    }
    if (!std::isfinite(dst)) Invalid(fmt::format("{} must be finite", Name(key)));
  }

  void Int(const char* key, int& dst) {
    const toml::node* n = Take(key);
    if (!n) return;
    auto i = n->value_exact<std::int64_t>();
    if (!i) Invalid(fmt::format("{} must be an integer", Name(key)));
    dst = static_cast<int>(*i);
  }

  void Uint64(const char* key, std::uint64_t& dst) {
    const toml::node* n = Take(key);
    if (!n) return;
    auto i = n->value_exact<std::int64_t>();
    if (!i || *i < 0) Invalid(fmt::format("{} must be a non-negative integer", Name(key)));
    dst = static_cast<std::uint64_t>(*i);
  }

  void Bool(const char* key, bool& dst) {
    const toml::node* n = Take(key);
    if (!n) return;
    auto b = n->value_exact<bool>();
    if (!b) Invalid(fmt::format("{} must be a boolean", Name(key)));
    dst = *b;
  }

  void String(const char* key, std::string& dst) {
    const toml::node* n = Take(key);
    if (!n) return;
    auto s = n->value_exact<std::string>();
    if (!s) Invalid(fmt::format("{} must be a string", Name(key)));
    dst = *s;
  }

  bool Has(const char* key) const { return table_.contains(key); }

  const toml::table* Table(const char* key) {
    const toml::node* n = Take(key);
    if (!n) return nullptr;
    if (!n->is_table()) Invalid(fmt::format("{} must be a table", Name(key)));
    return n->as_table();
  }

  const toml::array* TableArray(const char* key) {
    const toml::node* n = Take(key);
    if (!n) return nullptr;
    if (!n->is_array_of_tables()) Invalid(fmt::format("{} must be an array of tables", Name(key)));
    return n->as_array();
  }

  std::string Name(std::string_view key) const {
    return path_.empty() ? std::string(key) : fmt::format("{}.{}", path_, key);
  }

  void RejectUnknown() const {
    for (auto&& [key, node] : table_) {
      if (!used_.contains(std::string(key.str()))) {
        Invalid(fmt::format("unknown key '{}'", Name(key.str())));
      }
    }
  }

 private:
  const toml::node* Take(const char* key) {
    used_.insert(key);
    return table_.get(key);
  }

  const toml::table& table_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename Fn>
void WithTable(TableReader& parent, const char* key, Fn&& fn) {
  if (const toml::table* t = parent.Table(key)) {
    TableReader r(*t, parent.Name(key));
    fn(r);
    r.RejectUnknown();
  }
}

NavigationCommand ParseCommand(const std::string& s, const std::string& where) {
  auto c = ParseNavigationCommand(s);
  if (!c) Invalid(fmt::format("{}: unknown navigation command '{}'", where, s));
  return *c;
}

}  // namespace

HarnessConfig ParseConfig(std::string_view toml_text,
                          const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    Invalid(fmt::format("TOML parse error at line {}: {}", e.source().begin.line,
                        e.description()));
  }

  HarnessConfig out;
  ScenarioConfig& cfg = out.scenario;
  TableReader top(root, "");
  int version = 0;
  if (!top.Has("schema_version")) Invalid("schema_version is required");
  top.Int("schema_version", version);
  if (version != kConfigSchemaVersion) {
    Invalid(fmt::format("schema_version {} is not supported (expected {})", version,
                        kConfigSchemaVersion));
  }
  top.String("name", cfg.name);
  top.Uint64("seed", cfg.seed);
  top.Double("dt", cfg.dt);
  top.Double("horizon", cfg.horizon);
  top.Double("appear_jitter", cfg.appear_jitter);

  WithTable(top, "road", [&](TableReader& r) {
    r.Int("num_lanes", cfg.road.num_lanes);
    r.Double("lane_width", cfg.road.lane_width);
    r.Double("length", cfg.road.length);
  });

  // Start pose defaults to the centre of the rightmost lane.
  int start_lane = cfg.road.num_lanes - 1;
  double start_offset = 0.0;
  bool explicit_y = false;
  WithTable(top, "start", [&](TableReader& r) {
    r.Int("lane", start_lane);
    r.Double("offset", start_offset);
    explicit_y = r.Has("y");
    if (explicit_y && (r.Has("lane") || r.Has("offset"))) {
      Invalid("start.y cannot be combined with start.lane or start.offset");
    }
    r.Double("x", cfg.start.x);
    r.Double("y", cfg.start.y);
    r.Double("psi", cfg.start.psi);
    r.Double("v", cfg.start.v);
  });
  if (!explicit_y) {
    if (!cfg.road.HasLane(start_lane)) Invalid("start.lane is not on the road");
    cfg.start.y = cfg.road.LaneCenter(start_lane) + start_offset;
  }

  WithTable(top, "speed", [&](TableReader& r) {
    r.Double("cruise", cfg.speed.cruise_speed);
    r.Double("brake_decel", cfg.speed.brake_decel);
    r.Double("accel_limit", cfg.speed.accel_limit);
  });

  WithTable(top, "camera", [&](TableReader& r) {
    r.Double("f", cfg.camera.f);
    r.Double("u0", cfg.camera.u0);
    r.Double("v0", cfg.camera.v0);
    r.Double("height", cfg.camera.H);
    r.Int("image_w", cfg.camera.image_w);
    r.Int("image_h", cfg.camera.image_h);
    r.Double("forward_offset", cfg.camera.forward_offset);
    double yaw_deg = cfg.side_yaw * 180.0 / std::numbers::pi;
    r.Double("side_yaw_deg", yaw_deg);
    cfg.side_yaw = yaw_deg * std::numbers::pi / 180.0;
  });

  WithTable(top, "perception", [&](TableReader& r) {
    r.Double("noise_sigma", cfg.perception.noise_sigma);
    r.Double("max_range", cfg.perception.max_range);
    r.Double("straddle_half_width", cfg.perception.straddle_half_width);
  });

  WithTable(top, "safety", [&](TableReader& r) {
    r.Double("min_distance", cfg.safety.min_distance);
    r.Double("time_headway", cfg.safety.time_headway);
  });

  WithTable(top, "planner", [&](TableReader& r) {
    r.Double("boundary_ratio", cfg.planner.boundary_ratio);
    r.Double("boundary_tolerance", cfg.planner.boundary_tolerance);
  });

  WithTable(top, "teacher", [&](TableReader& r) {
    r.Double("k_p", cfg.gains.k_p);
    r.Double("k_h", cfg.gains.k_h);
    r.Double("k_v", cfg.gains.k_v);
    r.Double("steer_limit", cfg.gains.steer_limit);
    r.Double("steer_rate_limit", cfg.gains.steer_rate_limit);
    r.Double("lat_accel_limit", cfg.gains.lat_accel_limit);
  });
  cfg.gains.wheelbase = cfg.geometry.wheelbase;

  WithTable(top, "controller", [&](TableReader& r) {
    r.String("kind", out.controller.kind);
    std::string ckpt;
    r.String("checkpoint", ckpt);
    if (!ckpt.empty()) {
      std::filesystem::path p(ckpt);
      out.controller.checkpoint = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    }
  });
  if (out.controller.kind != "teacher" && out.controller.kind != "lstm") {
    Invalid(fmt::format("controller.kind must be teacher or lstm, got '{}'",
                        out.controller.kind));
  }

  if (const toml::array* obs = top.TableArray("obstacles")) {
    for (std::size_t i = 0; i < obs->size(); ++i) {
      TableReader r(*obs->get(i)->as_table(), fmt::format("obstacles[{}]", i));
      ObstacleSpec s;
      r.Int("lane", s.lane);
      r.Double("x", s.x);
      r.Double("appear_time", s.appear_time);
      r.Bool("relative", s.relative);
      r.RejectUnknown();
      cfg.obstacles.push_back(s);
    }
  }

  if (const toml::array* navi = top.TableArray("navi")) {
    for (std::size_t i = 0; i < navi->size(); ++i) {
      const std::string where = fmt::format("navi[{}]", i);
      TableReader r(*navi->get(i)->as_table(), where);
      NaviEvent e;
      std::string command;
      r.Double("t", e.t);
      r.String("command", command);
      r.RejectUnknown();
      if (command.empty()) Invalid(where + ".command is required");
      e.command = ParseCommand(command, where);
      cfg.navi.push_back(e);
    }
  }

  top.RejectUnknown();
  cfg.Validate();
  return out;
}

HarnessConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot read config {}", path.string()));
  std::stringstream text;
  text << in.rdbuf();
  return ParseConfig(text.str(), path.parent_path());
}

nlohmann::json ScenarioToJson(const ScenarioConfig& cfg) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const ObstacleSpec& s : cfg.obstacles) {
    obstacles.push_back({{"lane", s.lane}, {"x", s.x}, {"appear_time", s.appear_time},
                         {"relative", s.relative}});
  }
  nlohmann::json navi = nlohmann::json::array();
  for (const NaviEvent& e : cfg.navi) {
    navi.push_back({{"t", e.t}, {"command", ToString(e.command)}});
  }
  const CameraModel& c = cfg.camera;
  return {
      {"name", cfg.name},
      {"seed", cfg.seed},
      {"dt", cfg.dt},
      {"horizon", cfg.horizon},
      {"appear_jitter", cfg.appear_jitter},
      {"road", {{"num_lanes", cfg.road.num_lanes}, {"lane_width", cfg.road.lane_width},
                {"length", cfg.road.length}}},
      {"geometry", {{"wheelbase", cfg.geometry.wheelbase}, {"length", cfg.geometry.length},
                    {"width", cfg.geometry.width},
                    {"rear_overhang", cfg.geometry.rear_overhang}}},
      {"start", {{"x", cfg.start.x}, {"y", cfg.start.y}, {"psi", cfg.start.psi},
                 {"v", cfg.start.v}, {"steering", cfg.start.steering}}},
      {"speed", {{"cruise", cfg.speed.cruise_speed}, {"brake_decel", cfg.speed.brake_decel},
                 {"accel_limit", cfg.speed.accel_limit}}},
      {"camera", {{"f", c.f}, {"u0", c.u0}, {"v0", c.v0}, {"height", c.H},
                  {"image_w", c.image_w}, {"image_h", c.image_h},
                  {"forward_offset", c.forward_offset}, {"lateral_offset", c.lateral_offset},
                  {"yaw", c.yaw}, {"side_yaw", cfg.side_yaw}}},
      {"perception", {{"noise_sigma", cfg.perception.noise_sigma},
                      {"max_range", cfg.perception.max_range},
                      {"straddle_half_width", cfg.perception.straddle_half_width}}},
      {"safety", {{"min_distance", cfg.safety.min_distance},
                  {"time_headway", cfg.safety.time_headway}}},
      {"planner", {{"boundary_ratio", cfg.planner.boundary_ratio},
                   {"boundary_tolerance", cfg.planner.boundary_tolerance}}},
      {"teacher", {{"k_p", cfg.gains.k_p}, {"k_h", cfg.gains.k_h}, {"k_v", cfg.gains.k_v},
                   {"steer_limit", cfg.gains.steer_limit},
                   {"steer_rate_limit", cfg.gains.steer_rate_limit},
                   {"lat_accel_limit", cfg.gains.lat_accel_limit},
                   {"wheelbase", cfg.gains.wheelbase}}},
      {"obstacles", obstacles},
      {"navi", navi},
  };
}

}  // namespace cma
