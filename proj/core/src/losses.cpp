#include "glamor/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "glamor/errors.hpp"

namespace glamor {

void LossConfig::validate() const {
  if (!(margin >= 0.0)) throw ConfigError("triplet margin must be non-negative");
  if (num_identities == 0) throw ConfigError("num_identities must be positive");
  if (smoothing == SmoothingMode::explicit_epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("smoothing epsilon must lie in [0, 1)");
    if (epsilon > 0.0 && num_identities < 2) {
      throw ConfigError("label smoothing needs at least two identities");
    }
  } else if (num_identities < 2) {
    throw ConfigError("1/N smoothing needs at least two identities");
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) noexcept {
  return std::sqrt(std::max(0.0, squared_distance(a, b)));
}

Matrix pairwise_distances(const Matrix& embeddings) {
  const std::size_t n = embeddings.rows();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = euclidean_distance(embeddings.row(i), embeddings.row(j));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Matrix distance_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("distance_matrix: dimension " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()));
  }
  Matrix d(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) d(i, j) = euclidean_distance(a.row(i), b.row(j));
  return d;
}

BatchHardResult batch_hard_mine(const Matrix& embeddings, std::span<const std::int64_t> identities) {
  const std::size_t n = embeddings.rows();
  if (identities.size() != n) {
    throw ShapeError("batch_hard_mine: " + std::to_string(identities.size()) + " identities for " +
                     std::to_string(n) + " embeddings");
  }
  std::map<std::int64_t, std::size_t> counts;
  for (auto id : identities) ++counts[id];
  for (const auto& [id, count] : counts) {
    if (count < 2) {
      throw MiningError("identity " + std::to_string(id) + " has a single instance in the batch", id);
    }
  }
  if (counts.size() < 2) {
    throw MiningError("batch holds a single identity (" +
                          std::to_string(counts.empty() ? 0 : counts.begin()->first) + ")",
                      counts.empty() ? 0 : counts.begin()->first);
  }

  const Matrix d = pairwise_distances(embeddings);
  BatchHardResult result;
  result.triplets.reserve(n);
  for (std::size_t a = 0; a < n; ++a) {
    MinedTriplet t;
    t.anchor = a;
    bool have_pos = false;
    bool have_neg = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      if (identities[j] == identities[a]) {
        if (!have_pos || d(a, j) > t.d_ap) {
          t.positive = j;
          t.d_ap = d(a, j);
          have_pos = true;
        }
      } else if (!have_neg || d(a, j) < t.d_an) {
        t.negative = j;
        t.d_an = d(a, j);
        have_neg = true;
      }
    }
    result.triplets.push_back(t);
  }
  return result;
}

namespace {

bool hinge_enabled(bool requested) noexcept {
#ifdef GLAMOR_INJECT_HINGE_BUG
  // Negative-control build: the clamp is dropped so oracle checks must fail.
  (void)requested;
  return false;
#else
  return requested;
#endif
}

}  // namespace

double triplet_term(double d_ap, double d_an, double margin, bool hinge) noexcept {
  const double raw = d_ap * d_ap - d_an * d_an + margin;
  return hinge_enabled(hinge) ? std::max(0.0, raw) : raw;
}

LossFragment triplet_loss(const Matrix& embeddings, const BatchHardResult& mined,
                          const LossConfig& config) {
  if (mined.triplets.empty()) throw ConfigError("triplet_loss: no mined triplets");
  LossFragment out;
  out.gradient = Matrix(embeddings.rows(), embeddings.cols());
  const double scale =
      config.reduction == Reduction::mean ? 1.0 / static_cast<double>(mined.triplets.size()) : 1.0;

  double total = 0.0;
  for (const auto& t : mined.triplets) {
    auto a = embeddings.row(t.anchor);
    auto p = embeddings.row(t.positive);
    auto n = embeddings.row(t.negative);
    const double sq_ap = squared_distance(a, p);
    const double sq_an = squared_distance(a, n);
    const double raw = sq_ap - sq_an + config.margin;
    const bool hinge = hinge_enabled(config.use_hinge);
    total += hinge ? std::max(0.0, raw) : raw;
    if (hinge && !(raw > 0.0)) continue;
    auto ga = out.gradient.row(t.anchor);
    auto gp = out.gradient.row(t.positive);
    auto gn = out.gradient.row(t.negative);
    for (std::size_t k = 0; k < a.size(); ++k) {
      ga[k] += scale * 2.0 * (n[k] - p[k]);
      gp[k] += scale * -2.0 * (a[k] - p[k]);
      gn[k] += scale * 2.0 * (a[k] - n[k]);
    }
  }
  out.value = total * scale;
  return out;
}

std::vector<double> smoothed_targets(std::size_t label, const LossConfig& config) {
  config.validate();
  const std::size_t n = config.num_identities;
  if (label >= n) {
    throw ConfigError("label " + std::to_string(label) + " outside [0, " + std::to_string(n) + ")");
  }
  std::vector<double> q(n);
  if (config.smoothing == SmoothingMode::inverse_identities) {
    const double inv = 1.0 / static_cast<double>(n);
    std::fill(q.begin(), q.end(), inv);
    q[label] = 1.0 - inv;
  } else {
    const double other = n > 1 ? config.epsilon / static_cast<double>(n - 1) : 0.0;
    std::fill(q.begin(), q.end(), other);
    q[label] = 1.0 - config.epsilon;
  }
  return q;
}

LossFragment smoothed_softmax_loss(const Matrix& logits, std::span<const std::int64_t> labels,
                                   const LossConfig& config) {
  config.validate();
  if (logits.cols() != config.num_identities) {
    throw ShapeError("softmax: logits have " + std::to_string(logits.cols()) + " columns for " +
                     std::to_string(config.num_identities) + " identities");
  }
  if (labels.size() != logits.rows()) {
    throw ShapeError("softmax: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows()) + " rows");
  }
  if (logits.rows() == 0) throw ShapeError("softmax: empty batch");

  LossFragment out;
  out.gradient = Matrix(logits.rows(), logits.cols());
  const double scale = 1.0 / static_cast<double>(logits.rows());
  std::vector<double> log_p(logits.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    if (labels[r] < 0) throw ConfigError("negative label " + std::to_string(labels[r]));
    const auto q = smoothed_targets(static_cast<std::size_t>(labels[r]), config);
    auto z = logits.row(r);
    const double m = *std::max_element(z.begin(), z.end());
    double acc = 0.0;
    for (double v : z) acc += std::exp(v - m);
    const double lse = m + std::log(acc);
    double q_sum = 0.0;
    double row_loss = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      log_p[j] = z[j] - lse;
      row_loss -= q[j] * log_p[j];
      q_sum += q[j];
    }
    total += row_loss;
    auto g = out.gradient.row(r);
    for (std::size_t j = 0; j < z.size(); ++j) g[j] = scale * (std::exp(log_p[j]) * q_sum - q[j]);
  }
  out.value = total * scale;
  return out;
}

LossValue trisoft_loss(const Matrix& embeddings, const Matrix& logits,
                       std::span<const std::int64_t> identities, const LossConfig& config) {
  const BatchHardResult mined = batch_hard_mine(embeddings, identities);
  LossFragment triplet = triplet_loss(embeddings, mined, config);
  LossFragment softmax = smoothed_softmax_loss(logits, identities, config);
  LossValue v;
  v.triplet_part = triplet.value;
  v.softmax_part = softmax.value;
  v.total = v.triplet_part + v.softmax_part;
  v.embedding_gradient = std::move(triplet.gradient);
  v.logit_gradient = std::move(softmax.gradient);
  return v;
}

}  // namespace glamor
