#pragma once

// Perspective-pixel free-space metrics, lane-boundary hit test, distance
// error statistics and closed-loop trajectory quality.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cma/simworld.hpp"

namespace cma {

struct PixelMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_tp = 0;
  std::size_t n_fp = 0;
  std::size_t n_fn = 0;
};

// Both masks empty scores 1 everywhere. A ratio with a zero denominator is 0
// otherwise. Throws Error(kDimensionMismatch).
PixelMetrics ComputePixelMetrics(const BitMask& pred, const BitMask& gt);

// A boundary given by its x at the top and bottom image rows.
struct BoundaryLine {
  double x_top = 0.0;
  double x_bottom = 0.0;
};

inline constexpr double kDefaultBoundaryThreshold = 10.0;  // [px]

bool BoundaryHit(const BoundaryLine& pred, const BoundaryLine& gt,
                 double threshold = kDefaultBoundaryThreshold);

struct Histogram {
  double bin_width = 0.5;
  int first_bin = 0;  // bin k covers [k * bin_width, (k + 1) * bin_width)
  std::vector<std::size_t> counts;
};

struct DistanceErrorStats {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  Histogram histogram;
};

// Errors are predicted - true. Throws Error(kEmptyInput).
DistanceErrorStats ComputeDistanceErrorStats(
    const std::vector<std::pair<double, double>>& pairs, double bin_width = 0.5);

struct TrajectoryMetrics {
  double rms_center_offset = 0.0;  // from the active target centre line [m]
  double max_abs_lat_accel = 0.0;  // second differences of y [m/s^2]
  double settle_offset = 0.0;      // |offset| at the last tick [m]
  double change_duration = 0.0;    // longest start-to-complete span [s]
  int changes_started = 0;
  int changes_completed = 0;
  int final_lane = 0;
  bool collided = false;
};

// Target centre line at a tick: the lane containing y + D_o.
TrajectoryMetrics ComputeTrajectoryMetrics(const Trajectory& traj);

nlohmann::json ToJson(const PixelMetrics& m);
nlohmann::json ToJson(const DistanceErrorStats& s);
nlohmann::json ToJson(const TrajectoryMetrics& m);

// CSV row keyed by a run id; CsvHeader() gives the matching header line.
std::string TrajectoryMetricsCsvHeader();
std::string TrajectoryMetricsCsvRow(const std::string& run_id,
                                    const TrajectoryMetrics& m);

}  // namespace cma
