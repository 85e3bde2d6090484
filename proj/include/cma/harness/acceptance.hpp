#pragma once

// The acceptance battery: each check runs its own oracle and reports one
// pass/fail line with the measured values.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cma/harness/cloning.hpp"

namespace cma {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;  // 0 = no runtime bound
};

CriterionResult CheckGeometry();
CriterionResult CheckIntentionTable();
CriterionResult CheckScenarioBattery();
CriterionResult CheckGradients();
CriterionResult CheckCloning(const CloningOptions& options = {},
                             const EpochCallback& on_epoch = {});
CriterionResult CheckMetrics();
// Writes two run directories and two checkpoints under scratch.
CriterionResult CheckDeterminism(const std::filesystem::path& scratch);
CriterionResult CheckViewpoint();

struct AcceptanceOptions {
  std::vector<int> only;  // empty = all
  std::filesystem::path scratch;
  CloningOptions cloning;
  EpochCallback on_epoch;
  std::function<void(const CriterionResult&)> on_result;
};

std::vector<CriterionResult> RunAcceptance(const AcceptanceOptions& options);

// "PASS  3  scenario battery  (2.1 s)  detail"
std::string FormatResult(const CriterionResult& r);

}  // namespace cma
