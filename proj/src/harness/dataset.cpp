#include "cma/harness/dataset.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>

#include <fmt/format.h>

#include "cma/error.hpp"

namespace cma {
namespace {

static_assert(std::endian::native == std::endian::little);
constexpr char kMagic[8] = {'C', 'M', 'A', 'D', 'S', 'E', 'T', '1'};

template <typename T>
void Put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::kIoError, "truncated dataset file");
  return v;
}

void PutSequences(std::ostream& out, const std::vector<Sequence>& seqs) {
  Put<std::uint64_t>(out, seqs.size());
  for (const Sequence& s : seqs) {
    for (const FlatMap& m : s.maps) out.write(reinterpret_cast<const char*>(m.data()), sizeof(m));
    Put(out, s.target);
  }
}

std::vector<Sequence> GetSequences(std::istream& in) {
  const auto n = Get<std::uint64_t>(in);
  // Bounds a corrupt count before allocating.
  if (n > (std::uint64_t{1} << 24)) throw Error(ErrorCode::kIoError, "implausible window count");
  std::vector<Sequence> seqs(n);
  for (Sequence& s : seqs) {
    for (FlatMap& m : s.maps) in.read(reinterpret_cast<char*>(m.data()), sizeof(m));
    s.target = Get<double>(in);
  }
  if (!in) throw Error(ErrorCode::kIoError, "truncated dataset file");
  return seqs;
}

}  // namespace

std::vector<Sequence> TrajectoryWindows(const Trajectory& traj,
                                        const NormalizationTable& norm,
                                        int stride) {
  if (stride < 1) throw Error(ErrorCode::kConfigInvalid, "stride must be >= 1");
  std::vector<FlatMap> flat;
  flat.reserve(traj.ticks.size());
  for (const TickRecord& r : traj.ticks) flat.push_back(Flatten(r.map, norm));
  std::vector<Sequence> out;
  for (std::size_t end = kSequenceLength - 1; end < flat.size(); end += stride) {
    Sequence s;
    std::copy(flat.begin() + (end + 1 - kSequenceLength), flat.begin() + end + 1,
              s.maps.begin());
    s.target = traj.ticks[end].teacher_steering;
    out.push_back(s);
  }
  return out;
}

Dataset GenerateDataset(const std::vector<ScenarioConfig>& configs,
                        const DatasetOptions& options) {
  if (configs.empty()) throw Error(ErrorCode::kEmptyDataset, "no scenarios");
  if (options.held_out_every < 0) {
    throw Error(ErrorCode::kConfigInvalid, "held_out_every must be >= 0");
  }
  Dataset data;
  data.norm = NormalizationTable::ForCamera(configs.front().camera);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const ScenarioConfig& cfg = configs[i];
    RunOptions run = options.run;
    run.perturb_seed = options.run.perturb_seed ^ cfg.seed;
    const Trajectory traj =
        RunScenario(cfg, std::make_shared<TeacherController>(cfg.gains), run);
    std::vector<Sequence> windows = TrajectoryWindows(traj, data.norm, options.stride);
    const bool held_out =
        options.held_out_every > 0 && (i + 1) % options.held_out_every == 0;
    auto& dst = held_out ? data.held_out : data.train;
    dst.insert(dst.end(), windows.begin(), windows.end());
  }
  if (data.train.empty()) throw Error(ErrorCode::kEmptyDataset, "no training windows");
  return data;
}

void SaveDataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", path.string()));
  out.write(kMagic, sizeof(kMagic));
  Put<std::uint32_t>(out, kMapSize);
  Put<std::uint32_t>(out, kSequenceLength);
  const NormalizationTable& n = data.norm;
  for (double v : {n.pixel_x_scale, n.pixel_y_scale, n.speed_scale, n.offset_scale,
                   n.absent_obstacle_row}) {
    Put(out, v);
  }
  PutSequences(out, data.train);
  PutSequences(out, data.held_out);
  if (!out) throw Error(ErrorCode::kIoError, fmt::format("write failed: {}", path.string()));
}

Dataset LoadDataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot read {}", path.string()));
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kIoError, fmt::format("{} is not a dataset file", path.string()));
  }
  if (Get<std::uint32_t>(in) != kMapSize || Get<std::uint32_t>(in) != kSequenceLength) {
    throw Error(ErrorCode::kShapeMismatch, "dataset window shape differs from the network");
  }
  Dataset data;
  NormalizationTable& n = data.norm;
  for (double* v : {&n.pixel_x_scale, &n.pixel_y_scale, &n.speed_scale, &n.offset_scale,
                    &n.absent_obstacle_row}) {
    *v = Get<double>(in);
  }
  data.train = GetSequences(in);
  data.held_out = GetSequences(in);
  return data;
}

}  // namespace cma
