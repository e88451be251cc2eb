#ifndef DDGAN_GRADCHECK_HPP_
#define DDGAN_GRADCHECK_HPP_

#include "ddgan/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ddgan {

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-3;
  /// Denominator floor of the relative error, so that entries whose true
  /// gradient is ~0 are compared on an absolute scale.
  double floor = 1e-6;
};

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  Index entries_checked = 0;
  bool passed = false;
};

using ScalarFunction = std::function<Tensord(const std::vector<Tensord>&)>;

/// Compares reverse-mode gradients of `f` at `inputs` against central finite
/// differences, entry by entry, for every input with requires_grad set.
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradCheckResult check_gradients(const std::string& name, const ScalarFunction& f, std::vector<Tensord> inputs,
                                const GradCheckOptions& options = {});

/// Randomized check of every differentiable operation (and a few composites),
/// `seeds` random instances per case.
std::vector<GradCheckResult> run_gradient_suite(int seeds = 5, std::uint64_t base_seed = 2024,
                                                const GradCheckOptions& options = {});

}  // namespace ddgan

#endif  // DDGAN_GRADCHECK_HPP_
