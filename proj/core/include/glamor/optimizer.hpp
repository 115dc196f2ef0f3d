#pragma once

#include <cstddef>
#include <vector>

#include "glamor/model.hpp"

namespace glamor {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;

  void validate() const;
};

/// First and second moments for every trainable array, in named_arrays order.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;

  static AdamState for_params(const ModelParams& params);
};

/// One bias-corrected Adam step; buffers are left alone. Weight decay, when
/// non-zero, is added to the gradient (L2 form).
void adam_update(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
                 const AdamConfig& config);

}  // namespace glamor
