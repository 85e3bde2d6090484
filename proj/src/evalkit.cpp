#include "cma/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cma/error.hpp"

namespace cma {
namespace {

double Ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

bool HasEvent(const TickRecord& r, std::string_view prefix) {
  return std::any_of(r.events.begin(), r.events.end(),
                     [&](const std::string& e) { return e.starts_with(prefix); });
}

}  // namespace

PixelMetrics ComputePixelMetrics(const BitMask& pred, const BitMask& gt) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("mask {}x{} vs {}x{}", pred.width, pred.height,
                            gt.width, gt.height));
  }
  PixelMetrics m;
  for (std::size_t i = 0; i < gt.bits.size(); ++i) {
    const bool p = pred.bits[i], g = gt.bits[i];
    m.n_tp += p && g;
    m.n_fp += p && !g;
    m.n_fn += !p && g;
  }
  if (m.n_tp + m.n_fp + m.n_fn == 0) {
    m.precision = m.recall = m.f1 = 1.0;
    return m;
  }
  m.precision = Ratio(m.n_tp, m.n_tp + m.n_fp);
  m.recall = Ratio(m.n_tp, m.n_tp + m.n_fn);
  m.f1 = Ratio(2 * m.n_tp, 2 * m.n_tp + m.n_fp + m.n_fn);
  return m;
}

bool BoundaryHit(const BoundaryLine& pred, const BoundaryLine& gt,
                 double threshold) {
  return std::max(std::abs(pred.x_top - gt.x_top),
                  std::abs(pred.x_bottom - gt.x_bottom)) <= threshold;
}

DistanceErrorStats ComputeDistanceErrorStats(
    const std::vector<std::pair<double, double>>& pairs, double bin_width) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "no distance pairs");
  if (!(bin_width > 0.0)) throw Error(ErrorCode::kConfigInvalid, "bin_width must be > 0");
  DistanceErrorStats s;
  s.n = pairs.size();
  std::map<int, std::size_t> bins;
  double sum = 0.0;
  for (const auto& [pred, truth] : pairs) {
    const double e = pred - truth;
    sum += e;
    ++bins[static_cast<int>(std::floor(e / bin_width))];
  }
  s.mean = sum / s.n;
  double sq = 0.0;
  for (const auto& [pred, truth] : pairs) {
    const double d = pred - truth - s.mean;
    sq += d * d;
  }
  s.std = std::sqrt(sq / s.n);
  s.histogram.bin_width = bin_width;
  s.histogram.first_bin = bins.begin()->first;
  s.histogram.counts.assign(bins.rbegin()->first - bins.begin()->first + 1, 0);
  for (const auto& [k, c] : bins) s.histogram.counts[k - s.histogram.first_bin] = c;
  return s;
}

TrajectoryMetrics ComputeTrajectoryMetrics(const Trajectory& traj) {
  TrajectoryMetrics m;
  m.collided = traj.collided;
  const auto& ticks = traj.ticks;
  if (ticks.empty()) return m;

  auto offset = [&](const TickRecord& r) {
    const int lane = traj.road.LaneAt(r.vehicle.y + r.D_o);
    return r.vehicle.y - traj.road.LaneCenter(lane);
  };
  double sq = 0.0;
  for (const TickRecord& r : ticks) sq += offset(r) * offset(r);
  m.rms_center_offset = std::sqrt(sq / ticks.size());
  m.settle_offset = std::abs(offset(ticks.back()));
  m.final_lane = traj.road.LaneAt(ticks.back().vehicle.y);

  const double dt2 = traj.dt * traj.dt;
  for (std::size_t k = 1; k + 1 < ticks.size(); ++k) {
    const double a = (ticks[k + 1].vehicle.y - 2.0 * ticks[k].vehicle.y +
                      ticks[k - 1].vehicle.y) / dt2;
    m.max_abs_lat_accel = std::max(m.max_abs_lat_accel, std::abs(a));
  }

  double started = -1.0;
  for (const TickRecord& r : ticks) {
    if (HasEvent(r, "lane_change_start")) {
      ++m.changes_started;
      started = r.t;
    }
    if (HasEvent(r, "lane_change_complete")) {
      ++m.changes_completed;
      if (started >= 0.0) m.change_duration = std::max(m.change_duration, r.t - started);
      started = -1.0;
    }
    if (HasEvent(r, "collision")) m.collided = true;
  }
  return m;
}

nlohmann::json ToJson(const PixelMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"n_tp", m.n_tp},           {"n_fp", m.n_fp},     {"n_fn", m.n_fn}};
}

nlohmann::json ToJson(const DistanceErrorStats& s) {
  nlohmann::json bins = nlohmann::json::array();
  for (std::size_t i = 0; i < s.histogram.counts.size(); ++i) {
    const double lo = (s.histogram.first_bin + static_cast<int>(i)) * s.histogram.bin_width;
    bins.push_back({{"lo", lo}, {"count", s.histogram.counts[i]}});
  }
  return {{"n", s.n}, {"mean", s.mean}, {"std", s.std},
          {"bin_width", s.histogram.bin_width}, {"histogram", bins}};
}

nlohmann::json ToJson(const TrajectoryMetrics& m) {
  return {{"rms_center_offset", m.rms_center_offset},
          {"max_abs_lat_accel", m.max_abs_lat_accel},
          {"settle_offset", m.settle_offset},
          {"change_duration", m.change_duration},
          {"changes_started", m.changes_started},
          {"changes_completed", m.changes_completed},
          {"final_lane", m.final_lane},
          {"collided", m.collided}};
}

std::string TrajectoryMetricsCsvHeader() {
  return "run_id,rms_center_offset,max_abs_lat_accel,settle_offset,"
         "change_duration,changes_started,changes_completed,final_lane,collided";
}

std::string TrajectoryMetricsCsvRow(const std::string& run_id,
                                    const TrajectoryMetrics& m) {
  return fmt::format("{},{},{},{},{},{},{},{},{}", run_id, m.rms_center_offset,
                     m.max_abs_lat_accel, m.settle_offset, m.change_duration,
                     m.changes_started, m.changes_completed, m.final_lane,
                     m.collided ? 1 : 0);
}

}  // namespace cma
