#include "glamor/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "glamor/errors.hpp"

namespace glamor {

double relative_error(double analytic, double numeric) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const ScalarFn& value, const GradientFn& gradient,
                           std::span<const double> params, const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ConfigError("grad_check step must be positive");
  if (!options.names.empty() && options.names.size() != params.size()) {
    throw ConfigError("grad_check: names do not match parameter count");
  }

  const std::vector<double> analytic = gradient(params);
  if (analytic.size() != params.size()) {
    throw ShapeError("grad_check: gradient has " + std::to_string(analytic.size()) +
                     " entries for " + std::to_string(params.size()) + " parameters");
  }

  auto name_of = [&](std::size_t i) {
    return options.names.empty() ? "p[" + std::to_string(i) + "]" : options.names[i];
  };
  auto evaluate = [&](std::span<const double> p, std::size_t i) {
    const double v = value(p);
    if (!std::isfinite(v)) {
      throw NumericalError("grad_check: non-finite function value while probing " + name_of(i));
    }
    return v;
  };

  GradCheckReport report;
  std::vector<double> probe(params.begin(), params.end());
  auto quotients = [&](std::size_t i, double h, long double& central, long double& fwd, long double& bwd) {
    const double x = params[i];
    const double plus = x + h;
    const double minus = x - h;
    probe[i] = plus;
    const long double f_plus = evaluate(probe, i);
    probe[i] = minus;
    const long double f_minus = evaluate(probe, i);
    probe[i] = x;
    central = (f_plus - f_minus) / (static_cast<long double>(plus) - minus);
    if (options.kink_refinements > 0) {
      const long double f0 = evaluate(probe, i);
      fwd = (f_plus - f0) / (static_cast<long double>(plus) - x);
      bwd = (f0 - f_minus) / (static_cast<long double>(x) - minus);
    }
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    double h = options.step;
    long double numeric = 0, fwd = 0, bwd = 0;
    quotients(i, h, numeric, fwd, bwd);
    double err = relative_error(analytic[i], static_cast<double>(numeric));
    for (unsigned r = 0; r < options.kink_refinements && err > options.tolerance; ++r) {
      if (relative_error(static_cast<double>(fwd), static_cast<double>(bwd)) <= options.tolerance) break;
      h /= 10.0;
      quotients(i, h, numeric, fwd, bwd);
      err = relative_error(analytic[i], static_cast<double>(numeric));
      if (r == 0) ++report.refined;
    }
    report.per_parameter_errors.emplace_back(name_of(i), err);
    report.max_rel_error = std::max(report.max_rel_error, err);
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace glamor
