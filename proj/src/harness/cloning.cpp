#include "cma/harness/cloning.hpp"

#include "cma/error.hpp"
#include "cma/scenarios.hpp"

namespace cma {

CloningResult TrainOnDataset(Dataset data, const TrainHyper& hyper,
                             const EpochCallback& on_epoch) {
  if (data.train.empty()) throw Error(ErrorCode::kEmptyDataset, "no training windows");
  CloningResult out;
  TrainResult trained = Train(data.train, hyper, nullptr, on_epoch);
  out.loss_curve = std::move(trained.loss_curve);
  out.train_mse = MeanSquaredError(trained.params, data.train);
  out.held_out_mse =
      data.held_out.empty() ? 0.0 : MeanSquaredError(trained.params, data.held_out);
  out.checkpoint.params = std::move(trained.params);
  out.checkpoint.norm = data.norm;
  out.checkpoint.meta = {
      {"optimizer", hyper.optimizer == Optimizer::kAdam ? "adam" : "sgd"},
      {"lr", hyper.lr},
      {"epochs", hyper.epochs},
      {"batch", hyper.batch},
      {"seed", hyper.seed},
      {"clip_norm", hyper.clip_norm},
      {"train_windows", data.train.size()},
      {"held_out_windows", data.held_out.size()},
      {"train_mse", out.train_mse},
      {"held_out_mse", out.held_out_mse},
  };
  out.data = std::move(data);
  return out;
}

CloningResult CloneTeacher(const CloningOptions& options, const EpochCallback& on_epoch) {
  if (options.scenarios < 1) throw Error(ErrorCode::kEmptyDataset, "no scenarios");
  Dataset data = GenerateDataset(
      DemonstrationScenarios(options.scenarios, options.scenario_seed), options.data);
  CloningResult out = TrainOnDataset(std::move(data), options.hyper, on_epoch);
  out.checkpoint.meta["scenarios"] = options.scenarios;
  out.checkpoint.meta["scenario_seed"] = options.scenario_seed;
  out.checkpoint.meta["stride"] = options.data.stride;
  return out;
}

}  // namespace cma
