#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "glamor/matrix.hpp"

namespace glamor {

/// How smoothed softmax targets are formed for N identities.
enum class SmoothingMode {
  /// true class 1 - epsilon, every other class epsilon / (N - 1)
  explicit_epsilon,
  /// true class 1 - 1/N, every other class 1/N (the zero targets are replaced
  /// with 1/N outright, so rows sum to 2 - 2/N rather than 1)
  inverse_identities,
};

enum class Reduction { mean, sum };

inline constexpr double kDefaultMargin = 0.3;

struct LossConfig {
  double margin = kDefaultMargin;
  SmoothingMode smoothing = SmoothingMode::explicit_epsilon;
  double epsilon = 0.0;
  std::size_t num_identities = 0;
  bool use_hinge = true;
  Reduction reduction = Reduction::mean;

  /// Throws ConfigError for a negative margin, epsilon outside [0, 1), or N == 0.
  void validate() const;
};

/// Euclidean distance, summed in coordinate order; shared by mining and ranking.
double euclidean_distance(std::span<const double> a, std::span<const double> b) noexcept;
double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;

/// Symmetric matrix of row-to-row distances with an exact zero diagonal.
Matrix pairwise_distances(const Matrix& embeddings);
/// Distances from every row of `a` to every row of `b`.
Matrix distance_matrix(const Matrix& a, const Matrix& b);

struct MinedTriplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  double d_ap = 0.0;
  double d_an = 0.0;

  friend bool operator==(const MinedTriplet&, const MinedTriplet&) = default;
};

/// One triplet per anchor, in anchor order.
struct BatchHardResult {
  std::vector<MinedTriplet> triplets;
};

/// For every anchor, the farthest same-identity sample and the nearest
/// other-identity sample; ties go to the lowest index. Throws MiningError when
/// an identity appears only once or the batch holds a single identity.
BatchHardResult batch_hard_mine(const Matrix& embeddings, std::span<const std::int64_t> identities);

/// A loss value with its gradient w.r.t. the matrix it was computed from.
struct LossFragment {
  double value = 0.0;
  Matrix gradient;
};

/// Per-anchor term ||a-p||^2 - ||a-n||^2 + margin, clamped at zero when `hinge`.
double triplet_term(double d_ap, double d_an, double margin, bool hinge) noexcept;

/// Triplet loss over the mined triplets, computed on squared distances. The
/// selection is treated as constant when differentiating.
LossFragment triplet_loss(const Matrix& embeddings, const BatchHardResult& mined,
                          const LossConfig& config);

/// Smoothed target distribution row for `label` (length N).
std::vector<double> smoothed_targets(std::size_t label, const LossConfig& config);

/// Mean over rows of sum_i -q_i log p_i with a max-shifted log-sum-exp.
/// Throws ConfigError/ShapeError for labels outside [0, N) or N != logits.cols().
LossFragment smoothed_softmax_loss(const Matrix& logits, std::span<const std::int64_t> labels,
                                   const LossConfig& config);

struct LossValue {
  double total = 0.0;
  double triplet_part = 0.0;
  double softmax_part = 0.0;
  Matrix embedding_gradient;
  Matrix logit_gradient;
};

/// Unweighted sum of the batch-hard triplet loss on `embeddings` and the
/// smoothed softmax loss on `logits`; identities double as class labels.
LossValue trisoft_loss(const Matrix& embeddings, const Matrix& logits,
                       std::span<const std::int64_t> identities, const LossConfig& config);

}  // namespace glamor
