#ifndef SARL_GRADIENT_SUITE_HPP_
#define SARL_GRADIENT_SUITE_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace sarl {

struct GradSuiteEntry {
  std::string name;
  double max_rel_error = 0;
  double tolerance = 0;
  std::string worst_input;

  bool passed() const { return max_rel_error < tolerance; }
};

/// Finite-difference checks (64-bit, central, h = 1e-5) of every
/// differentiable stage: representation ops, transport ops, each loss and the
/// full model on a tiny config. Component checks use 1e-4, full-model 1e-3.
std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed = 0);

}  // namespace sarl

#endif  // SARL_GRADIENT_SUITE_HPP_
