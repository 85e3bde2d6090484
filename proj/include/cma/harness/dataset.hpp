#pragma once

// Behaviour-cloning data: sliding windows of flattened cognitive maps from
// teacher rollouts, labelled with the teacher's steering at the window end.

#include <filesystem>
#include <vector>

#include "cma/neuro.hpp"
#include "cma/simworld.hpp"

namespace cma {

// Windows end at ticks 19, 19 + stride, ... so a run of N ticks yields
// ceil((N - 19) / stride) windows.
std::vector<Sequence> TrajectoryWindows(const Trajectory& traj,
                                        const NormalizationTable& norm,
                                        int stride = 1);

struct DatasetOptions {
  int stride = 1;
  // Every held_out_every-th scenario (1-based) goes to the held-out split.
  int held_out_every = 5;
  RunOptions run;  // perturbation used while collecting
};

struct Dataset {
  NormalizationTable norm;
  std::vector<Sequence> train;
  std::vector<Sequence> held_out;
};

// Splits by scenario, never by window. Throws Error(kEmptyDataset) when no
// configs are given.
Dataset GenerateDataset(const std::vector<ScenarioConfig>& configs,
                        const DatasetOptions& options);

// Binary little-endian file; throws Error(kIoError) on failure.
void SaveDataset(const Dataset& data, const std::filesystem::path& path);
Dataset LoadDataset(const std::filesystem::path& path);

}  // namespace cma
