#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace glamor {

inline constexpr double kDefaultFiniteDifferenceStep = 1e-5;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<std::pair<std::string, double>> per_parameter_errors;
  bool passed = false;
  std::size_t refined = 0;  // coordinates re-probed with a smaller step
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = kDefaultFiniteDifferenceStep;
  /// When a coordinate fails and its forward and backward one-sided quotients
  /// disagree (a ReLU or max kink inside the stencil), retry with step/10 up to
  /// this many times. A genuine gradient bug leaves the one-sided quotients in
  /// agreement, so it is never retried away.
  unsigned kink_refinements = 0;
  /// Optional per-coordinate names; "p[i]" is used when empty.
  std::vector<std::string> names;
};

using ScalarFn = std::function<double(std::span<const double>)>;
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric) noexcept;

/// Compares `gradient(params)` against central differences of `value`
/// coordinate by coordinate. The difference quotient is formed in long double
/// over the step that was actually representable around each coordinate.
/// Throws NumericalError if `value` is non-finite at any probe point.
GradCheckReport grad_check(const ScalarFn& value, const GradientFn& gradient,
                           std::span<const double> params, const GradCheckOptions& options = {});

}  // namespace glamor
