#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "clidd/config.hpp"

namespace clidd {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Parameter accounting of `configs` against the published table, fused-vs-naive agreement,
/// NMS against a pairwise oracle and Procrustes optimality against random rotations.
std::vector<CheckResult> run_selfcheck(std::span<const ModelConfig> configs = presets());

/// Prints one line per check; returns true iff all passed.
bool print_selfcheck(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace clidd
