#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "glamor/matrix.hpp"
#include "glamor/tensor.hpp"

namespace glamor {

enum class NormKind { l2, batch, group, layer };

std::string_view to_string(NormKind kind) noexcept;
/// Accepts "l2", "batch", "group", "layer"; throws ConfigError otherwise.
NormKind parse_norm_kind(std::string_view text);

inline constexpr std::size_t kDefaultGroupSize = 16;
inline constexpr double kDefaultNormEpsilon = 1e-5;
inline constexpr double kDefaultNormMomentum = 0.1;

/// Which normalization to apply. `group_size` is the number of channels per
/// group and only matters for the group kind.
struct NormSpec {
  NormKind kind = NormKind::group;
  std::size_t group_size = kDefaultGroupSize;
  double epsilon = kDefaultNormEpsilon;

  /// Throws ConfigError when epsilon <= 0 or group_size does not divide `channels`.
  void validate(std::size_t channels) const;
};

/// Per-channel affine parameters plus batch-norm running statistics.
struct NormState {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = kDefaultNormMomentum;

  /// gamma = 1, beta = 0, running mean 0, running variance 1.
  static NormState identity(std::size_t channels);
};

enum class NormMode { training, inference };

/// What the forward pass saved for the backward pass.
struct NormContext {
  NormSpec spec;
  NormMode mode = NormMode::training;
  Tensor4 normalized;           // pre-affine output
  std::vector<double> inv_std;  // per feature set; 1/||x|| for the l2 kind
  std::vector<double> batch_mean;
  std::vector<double> batch_var;
};

struct NormGrads {
  Tensor4 input;
  std::vector<double> gamma;
  std::vector<double> beta;
};

/// L2 rescaling to unit norm. Throws DegenerateInputError when ||v|| < 1e-12.
std::vector<double> l2_normalize(std::span<const double> v);

/// Standardizes each feature set then applies gamma/beta per channel:
///   batch: one set per channel across (n, h, w); inference mode uses running stats
///   group: per sample, contiguous groups of `group_size` channels across (h, w)
///   layer: per sample, all of (c, h, w)
///   l2:    per sample, x / ||x|| over (c, h, w) without centering
/// Sums run in memory order within each set; variance is the two-pass biased estimate.
Tensor4 normalize(const Tensor4& x, const NormSpec& spec, const NormState& state, NormMode mode,
                  NormContext* context = nullptr);

/// Folds the batch statistics of a training-mode batch-kind forward into the
/// running mean/variance (unbiased variance, exponential moving average).
void update_running_stats(NormState& state, const NormContext& context);

NormGrads norm_backward(const Tensor4& upstream, const NormContext& context, const NormState& state);

/// Feature neck: layer normalization of each row over the feature dimension,
/// with per-feature affine parameters.
Matrix neck(const Matrix& features, const NormState& affine, double epsilon = kDefaultNormEpsilon,
            NormContext* context = nullptr);

struct NeckGrads {
  Matrix input;
  std::vector<double> gamma;
  std::vector<double> beta;
};

NeckGrads neck_backward(const Matrix& upstream, const NormContext& context, const NormState& affine);

}  // namespace glamor
