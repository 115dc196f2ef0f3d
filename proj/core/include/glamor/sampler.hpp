#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace glamor {

/// P identities x K instances per batch.
struct PKSamplerConfig {
  std::size_t identities_per_batch = 6;
  std::size_t instances_per_identity = 6;
  std::uint64_t seed = 0;

  std::size_t batch_size() const noexcept { return identities_per_batch * instances_per_identity; }
  /// Throws ConfigError unless P >= 2 and K >= 2.
  void validate() const;
};

/// Sample indices of one minibatch, grouped identity by identity.
using SampleBatch = std::vector<std::size_t>;

/// One epoch of identity-balanced batches. Identities are visited in a seeded
/// permutation, P at a time, so every identity appears at least once; a short
/// final group is topped up with other identities. Identities with fewer than
/// K samples are drawn with replacement. Depends only on (seed, epoch).
/// Throws ConfigError when the dataset has fewer than P identities.
std::vector<SampleBatch> pk_sample(std::span<const std::int64_t> sample_identities,
                                   const PKSamplerConfig& config, std::size_t epoch);

}  // namespace glamor
