#pragma once

// Behaviour cloning of the teacher: demonstration rollouts -> windows ->
// Adam training -> checkpoint.

#include "cma/harness/checkpoint.hpp"
#include "cma/harness/dataset.hpp"

namespace cma {

struct CloningOptions {
  int scenarios = 24;
  std::uint64_t scenario_seed = 11;
  DatasetOptions data{.stride = 4, .held_out_every = 5, .run = {}};
  TrainHyper hyper{.lr = 1e-3, .epochs = 20, .batch = 32, .seed = 1, .clip_norm = 1.0,
                   .optimizer = Optimizer::kAdam, .divergence_factor = 1e6};
};

struct CloningResult {
  Dataset data;
  Checkpoint checkpoint;
  std::vector<double> loss_curve;
  double train_mse = 0.0;
  double held_out_mse = 0.0;
};

// Trains on an existing dataset. Throws Error(kEmptyDataset) when the
// training split is empty.
CloningResult TrainOnDataset(Dataset data, const TrainHyper& hyper,
                             const EpochCallback& on_epoch = {});

CloningResult CloneTeacher(const CloningOptions& options,
                           const EpochCallback& on_epoch = {});

}  // namespace cma
