#include "glamor/optimizer.hpp"

#include <cmath>

#include "glamor/errors.hpp"

namespace glamor {

void AdamConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
}

AdamState AdamState::for_params(const ModelParams& params) {
  AdamState s;
  for (const auto& a : named_arrays(params)) {
    const std::size_t n = a.role == ArrayRole::parameter ? a.values.size() : 0;
    s.m.emplace_back(n, 0.0);
    s.v.emplace_back(n, 0.0);
  }
  return s;
}

void adam_update(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
                 const AdamConfig& config) {
  config.validate();
  auto p = named_arrays(params);
  const auto g = named_arrays(grads);
  if (p.size() != g.size() || p.size() != state.m.size()) {
    throw ShapeError("adam_update: parameter, gradient and state layouts differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a].role != ArrayRole::parameter) continue;
    auto values = p[a].values;
    const auto grad = g[a].values;
    auto& m = state.m[a];
    auto& v = state.v[a];
    if (grad.size() != values.size() || m.size() != values.size()) {
      throw ShapeError("adam_update: array '" + p[a].name + "' has mismatched lengths");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double gi = grad[i] + config.weight_decay * values[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      const double step = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.epsilon);
      values[i] -= step;
    }
  }
}

}  // namespace glamor
