#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qcseis::cli {

struct SelftestOptions {
  // "ry" swaps the rotation matrix used by the simulator checks for one with
  // a perturbed entry, to prove the unitarity check can fail.
  std::string inject_fault;
  std::uint64_t seed = 20240601;
};

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Runs every check (never stops early) and prints one line per check.
std::vector<CheckOutcome> run_selftest(const SelftestOptions& opts, std::ostream& out);

}  // namespace qcseis::cli
