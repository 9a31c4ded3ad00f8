#pragma once

// Finite-difference verification of the reverse-mode rules. Used by the
// `selftest` command; the test suite carries its own independent checker.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qcseis/tensor.hpp"

namespace qcseis {

struct GradCheckResult {
  std::string name;
  std::string shape;
  double rel_error = 0;  // ||g_auto - g_fd|| / max(||g_auto||, ||g_fd||)
  bool passed = false;
};

using GradFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Projects f(inputs) onto a fixed random direction and compares the
/// reverse-mode gradient of that scalar with central differences on every
/// input element.
GradCheckResult gradcheck(const std::string& name, const GradFn& f, std::vector<Tensor> inputs, double h,
                          double tol, std::uint64_t seed);

/// Every differentiable op on five shapes each.
std::vector<GradCheckResult> check_all_ops(std::uint64_t seed, double tol = 1e-3);

}  // namespace qcseis
