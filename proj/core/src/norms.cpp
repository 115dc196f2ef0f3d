#include "glamor/norms.hpp"

#include <cmath>
#include <string>

#include "glamor/errors.hpp"

namespace glamor {

namespace {

constexpr double kL2Floor = 1e-12;

/// Feature sets of the group, layer and l2 kinds are contiguous runs of
/// `length` values; there are `count` of them.
struct ContiguousSets {
  std::size_t count;
  std::size_t length;
};

ContiguousSets contiguous_sets(const NormSpec& spec, const Shape4& s) {
  switch (spec.kind) {
    case NormKind::group: {
      const std::size_t groups = s.c / spec.group_size;
      return {s.n * groups, spec.group_size * s.plane()};
    }
    case NormKind::layer:
    case NormKind::l2:
      return {s.n, s.sample_size()};
    case NormKind::batch:
      break;
  }
  throw ConfigError("batch norm feature sets are not contiguous");
}

void check_state(const NormState& state, std::size_t channels) {
  if (state.gamma.size() != channels || state.beta.size() != channels) {
    throw ShapeError("norm affine parameters sized " + std::to_string(state.gamma.size()) + "/" +
                     std::to_string(state.beta.size()) + " for " + std::to_string(channels) +
                     " channels");
  }
}

double mean_of(const double* p, std::size_t len) {
  double acc = 0.0;
  for (std::size_t i = 0; i < len; ++i) acc += p[i];
  return acc / static_cast<double>(len);
}

double variance_of(const double* p, std::size_t len, double mean) {
  double acc = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double d = p[i] - mean;
    acc += d * d;
  }
  return acc / static_cast<double>(len);
}

}  // namespace

std::string_view to_string(NormKind kind) noexcept {
  switch (kind) {
    case NormKind::l2: return "l2";
    case NormKind::batch: return "batch";
    case NormKind::group: return "group";
    case NormKind::layer: return "layer";
  }
  return "?";
}

NormKind parse_norm_kind(std::string_view text) {
  if (text == "l2") return NormKind::l2;
  if (text == "batch") return NormKind::batch;
  if (text == "group") return NormKind::group;
  if (text == "layer") return NormKind::layer;
  throw ConfigError("unknown norm kind '" + std::string(text) + "'");
}

void NormSpec::validate(std::size_t channels) const {
  if (!(epsilon > 0.0)) throw ConfigError("norm epsilon must be positive");
  if (kind == NormKind::group) {
    if (group_size == 0 || channels % group_size != 0) {
      throw ConfigError("group size " + std::to_string(group_size) + " does not divide " +
                        std::to_string(channels) + " channels");
    }
  }
}

NormState NormState::identity(std::size_t channels) {
  NormState s;
  s.gamma.assign(channels, 1.0);
  s.beta.assign(channels, 0.0);
  s.running_mean.assign(channels, 0.0);
  s.running_var.assign(channels, 1.0);
  return s;
}

std::vector<double> l2_normalize(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm >= kL2Floor)) {
    throw DegenerateInputError("l2_normalize: vector norm below 1e-12");
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
  return out;
}

Tensor4 normalize(const Tensor4& x, const NormSpec& spec, const NormState& state, NormMode mode,
                  NormContext* context) {
  const Shape4& s = x.shape();
  spec.validate(s.c);
  check_state(state, s.c);

  Tensor4 xhat(s);
  std::vector<double> inv_std;
  std::vector<double> batch_mean;
  std::vector<double> batch_var;

  if (spec.kind == NormKind::batch) {
    inv_std.resize(s.c);
    if (mode == NormMode::training) {
      const std::size_t count = s.n * s.plane();
      if (count == 0) throw ShapeError("batch norm over an empty batch");
      batch_mean.assign(s.c, 0.0);
      batch_var.assign(s.c, 0.0);
      for (std::size_t c = 0; c < s.c; ++c) {
        double acc = 0.0;
        for (std::size_t n = 0; n < s.n; ++n)
          for (double v : x.plane(n, c)) acc += v;
        const double mean = acc / static_cast<double>(count);
        double var = 0.0;
        for (std::size_t n = 0; n < s.n; ++n)
          for (double v : x.plane(n, c)) var += (v - mean) * (v - mean);
        var /= static_cast<double>(count);
        batch_mean[c] = mean;
        batch_var[c] = var;
        inv_std[c] = 1.0 / std::sqrt(var + spec.epsilon);
      }
    } else {
      if (state.running_mean.size() != s.c || state.running_var.size() != s.c) {
        throw ConfigError("batch norm inference needs running statistics for every channel");
      }
      batch_mean = state.running_mean;
      for (std::size_t c = 0; c < s.c; ++c) inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + spec.epsilon);
    }
    for (std::size_t n = 0; n < s.n; ++n) {
      for (std::size_t c = 0; c < s.c; ++c) {
        auto src = x.plane(n, c);
        auto dst = xhat.plane(n, c);
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] - batch_mean[c]) * inv_std[c];
      }
    }
    if (mode == NormMode::inference) batch_mean.clear();
  } else {
    const ContiguousSets sets = contiguous_sets(spec, s);
    inv_std.resize(sets.count);
    for (std::size_t k = 0; k < sets.count; ++k) {
      const double* src = x.data().data() + k * sets.length;
      double* dst = xhat.data().data() + k * sets.length;
      if (spec.kind == NormKind::l2) {
        double sq = 0.0;
        for (std::size_t i = 0; i < sets.length; ++i) sq += src[i] * src[i];
        const double norm = std::sqrt(sq);
        if (!(norm >= kL2Floor)) {
          throw DegenerateInputError("l2 norm: sample " + std::to_string(k) + " has norm below 1e-12");
        }
        inv_std[k] = 1.0 / norm;
        for (std::size_t i = 0; i < sets.length; ++i) dst[i] = src[i] * inv_std[k];
      } else {
        const double mean = mean_of(src, sets.length);
        const double var = variance_of(src, sets.length, mean);
        inv_std[k] = 1.0 / std::sqrt(var + spec.epsilon);
        for (std::size_t i = 0; i < sets.length; ++i) dst[i] = (src[i] - mean) * inv_std[k];
      }
    }
  }

  Tensor4 out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto src = xhat.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = state.gamma[c] * src[i] + state.beta[c];
    }
  }

  if (context != nullptr) {
    context->spec = spec;
    context->mode = mode;
    context->normalized = std::move(xhat);
    context->inv_std = std::move(inv_std);
    context->batch_mean = std::move(batch_mean);
    context->batch_var = std::move(batch_var);
  }
  return out;
}

void update_running_stats(NormState& state, const NormContext& context) {
  if (context.spec.kind != NormKind::batch || context.mode != NormMode::training) return;
  const Shape4& s = context.normalized.shape();
  const std::size_t count = s.n * s.plane();
  const double correction = count > 1 ? static_cast<double>(count) / static_cast<double>(count - 1) : 1.0;
  if (state.running_mean.size() != s.c) state.running_mean.assign(s.c, 0.0);
  if (state.running_var.size() != s.c) state.running_var.assign(s.c, 1.0);
  for (std::size_t c = 0; c < s.c; ++c) {
    state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * context.batch_mean[c];
    state.running_var[c] =
        (1.0 - state.momentum) * state.running_var[c] + state.momentum * context.batch_var[c] * correction;
  }
}

NormGrads norm_backward(const Tensor4& upstream, const NormContext& context, const NormState& state) {
  const Tensor4& xhat = context.normalized;
  const Shape4& s = xhat.shape();
  require_same_shape(upstream.shape(), s, "norm_backward");
  check_state(state, s.c);

  NormGrads grads;
  grads.gamma.assign(s.c, 0.0);
  grads.beta.assign(s.c, 0.0);
  // Gradient w.r.t. the pre-affine output.
  Tensor4 ghat(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto g = upstream.plane(n, c);
      auto xh = xhat.plane(n, c);
      auto gh = ghat.plane(n, c);
      for (std::size_t i = 0; i < g.size(); ++i) {
        grads.gamma[c] += g[i] * xh[i];
        grads.beta[c] += g[i];
        gh[i] = g[i] * state.gamma[c];
      }
    }
  }

  grads.input = Tensor4(s);
  const NormSpec& spec = context.spec;
  if (spec.kind == NormKind::batch) {
    if (context.inv_std.size() != s.c) throw ShapeError("norm_backward: context does not match input");
    if (context.mode == NormMode::inference) {
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c) {
          auto gh = ghat.plane(n, c);
          auto gi = grads.input.plane(n, c);
          for (std::size_t i = 0; i < gh.size(); ++i) gi[i] = gh[i] * context.inv_std[c];
        }
      return grads;
    }
    const double count = static_cast<double>(s.n * s.plane());
    for (std::size_t c = 0; c < s.c; ++c) {
      double g_sum = 0.0;
      double gx_sum = 0.0;
      for (std::size_t n = 0; n < s.n; ++n) {
        auto gh = ghat.plane(n, c);
        auto xh = xhat.plane(n, c);
        for (std::size_t i = 0; i < gh.size(); ++i) {
          g_sum += gh[i];
          gx_sum += gh[i] * xh[i];
        }
      }
      const double g_mean = g_sum / count;
      const double gx_mean = gx_sum / count;
      for (std::size_t n = 0; n < s.n; ++n) {
        auto gh = ghat.plane(n, c);
        auto xh = xhat.plane(n, c);
        auto gi = grads.input.plane(n, c);
        for (std::size_t i = 0; i < gh.size(); ++i) {
          gi[i] = context.inv_std[c] * (gh[i] - g_mean - xh[i] * gx_mean);
        }
      }
    }
    return grads;
  }

  const ContiguousSets sets = contiguous_sets(spec, s);
  if (context.inv_std.size() != sets.count) throw ShapeError("norm_backward: context does not match input");
  for (std::size_t k = 0; k < sets.count; ++k) {
    const double* gh = ghat.data().data() + k * sets.length;
    const double* xh = xhat.data().data() + k * sets.length;
    double* gi = grads.input.data().data() + k * sets.length;
    double g_sum = 0.0;
    double gx_sum = 0.0;
    for (std::size_t i = 0; i < sets.length; ++i) {
      g_sum += gh[i];
      gx_sum += gh[i] * xh[i];
    }
    if (spec.kind == NormKind::l2) {
      for (std::size_t i = 0; i < sets.length; ++i) gi[i] = context.inv_std[k] * (gh[i] - xh[i] * gx_sum);
    } else {
      const double len = static_cast<double>(sets.length);
      const double g_mean = g_sum / len;
      const double gx_mean = gx_sum / len;
      for (std::size_t i = 0; i < sets.length; ++i) {
        gi[i] = context.inv_std[k] * (gh[i] - g_mean - xh[i] * gx_mean);
      }
    }
  }
  return grads;
}

Matrix neck(const Matrix& features, const NormState& affine, double epsilon, NormContext* context) {
  const Tensor4 as_tensor({features.rows(), features.cols(), 1, 1},
                          std::vector<double>(features.data().begin(), features.data().end()));
  const NormSpec spec{NormKind::layer, features.cols(), epsilon};
  const Tensor4 out = normalize(as_tensor, spec, affine, NormMode::training, context);
  return Matrix(features.rows(), features.cols(), std::vector<double>(out.data().begin(), out.data().end()));
}

NeckGrads neck_backward(const Matrix& upstream, const NormContext& context, const NormState& affine) {
  const Tensor4 as_tensor({upstream.rows(), upstream.cols(), 1, 1},
                          std::vector<double>(upstream.data().begin(), upstream.data().end()));
  NormGrads g = norm_backward(as_tensor, context, affine);
  return {Matrix(upstream.rows(), upstream.cols(), std::vector<double>(g.input.data().begin(), g.input.data().end())),
          std::move(g.gamma), std::move(g.beta)};
}

}  // namespace glamor
