#include <cstdio>
#include <cstdlib>
#include <string>

#include <fmt/format.h>

#include "cma/harness/acceptance.hpp"

// Usage: cma_acceptance [criterion ids...]
int main(int argc, char** argv) {
  cma::AcceptanceOptions options;
  for (int i = 1; i < argc; ++i) options.only.push_back(std::atoi(argv[i]));
  options.on_epoch = [](int epoch, double loss) {
    fmt::print(stderr, "  cloning epoch {} loss {:.3e}\n", epoch, loss);
  };
  options.on_result = [](const cma::CriterionResult& r) {
    fmt::print("{}\n", cma::FormatResult(r));
    std::fflush(stdout);
  };
  bool all = true;
  for (const auto& r : cma::RunAcceptance(options)) all = all && r.pass;
  return all ? 0 : 1;
}
