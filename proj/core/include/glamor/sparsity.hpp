#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "glamor/model.hpp"

namespace glamor {

struct LayerSparsity {
  std::string layer;
  double fraction_zero = 0.0;
};

struct SparsityReport {
  std::vector<LayerSparsity> layers;
  std::size_t sample_count = 0;
  double threshold = 0.0;

  /// Fraction for `layer`; throws ConfigError when it was not probed.
  double fraction(std::string_view layer) const;
};

/// A channel map counts as zero when max |activation| over its spatial extent
/// is <= tau. Per layer, the zero fraction over channels is averaged over images.
SparsityReport sparsity_from_activations(const std::vector<NamedActivation>& activations, double tau);

/// Runs `sample_count` images drawn without replacement (seeded) through the
/// model in inference mode and measures every probed layer. Throws ConfigError
/// when sample_count is zero or exceeds the number of images, or tau < 0.
SparsityReport sparsity_probe(const ModelConfig& config, const ModelParams& params, const Tensor4& images,
                              double tau, std::size_t sample_count, std::uint64_t seed = 0);

std::string format_sparsity(const SparsityReport& report);

}  // namespace glamor
