#include "glamor/attention.hpp"

#include <algorithm>
#include <string>

#include "glamor/errors.hpp"

namespace glamor {

namespace {

void add_conv_grads(ConvGrads& into, const ConvGrads& from) {
  add_inplace(into.weight, from.weight);
  for (std::size_t i = 0; i < into.bias.size(); ++i) into.bias[i] += from.bias[i];
}

}  // namespace

// --- global attention ------------------------------------------------------

GAParams GAParams::zeros(std::size_t channels, std::size_t mid_channels) {
  const std::size_t mid = mid_channels == 0 ? channels : mid_channels;
  GAParams p;
  p.conv1 = ConvKernel::zeros(mid, channels, 3, 1, 1);
  p.conv2 = ConvKernel::zeros(channels, mid, 3, 1, 1);
  return p;
}

void GAParams::validate(std::size_t channels) const {
  conv1.validate();
  conv2.validate();
  const bool preserves = conv1.stride == 1 && conv2.stride == 1 &&
                         conv1.padding * 2 + 1 == conv1.kernel_h() &&
                         conv1.kernel_h() == conv1.kernel_w() &&
                         conv2.padding * 2 + 1 == conv2.kernel_h() &&
                         conv2.kernel_h() == conv2.kernel_w();
  if (!preserves) throw ConfigError("global attention convs must preserve spatial dims");
  if (conv1.in_channels() != channels || conv2.out_channels() != channels ||
      conv1.out_channels() != conv2.in_channels()) {
    throw ConfigError("global attention conv chain must map " + std::to_string(channels) +
                      " channels back to " + std::to_string(channels));
  }
}

Tensor4 global_attention(const Tensor4& features, const GAParams& params, GACache* cache) {
  if (features.shape().c != params.conv1.in_channels()) {
    throw ShapeError("global attention built for " + std::to_string(params.conv1.in_channels()) +
                     " channels got " + std::to_string(features.shape().c));
  }
  params.validate(features.shape().c);
  Tensor4 pre = conv2d(features, params.conv1);
  Tensor4 hidden = leaky_relu(pre, params.leaky_slope);
  Tensor4 gate = sigmoid(conv2d(hidden, params.conv2));
  Tensor4 out = multiply(features, gate);
  if (cache != nullptr) {
    cache->input = features;
    cache->pre_activation = std::move(pre);
    cache->hidden = std::move(hidden);
    cache->gate = std::move(gate);
  }
  return out;
}

GAGrads global_attention_backward(const Tensor4& grad_output, const GAParams& params,
                                  const GACache& cache) {
  require_same_shape(grad_output.shape(), cache.input.shape(), "global_attention_backward");
  GAGrads g;
  Tensor4 grad_gate = multiply(grad_output, cache.input);
  Tensor4 grad_logit = sigmoid_backward(cache.gate, grad_gate);
  g.conv2 = conv2d_backward(cache.hidden, params.conv2, grad_logit);
  Tensor4 grad_pre = leaky_relu_backward(cache.pre_activation, g.conv2.input, params.leaky_slope);
  g.conv1 = conv2d_backward(cache.input, params.conv1, grad_pre);
  g.input = multiply(grad_output, cache.gate);
  add_inplace(g.input, g.conv1.input);
  return g;
}

// --- local attention -------------------------------------------------------

LAParams LAParams::zeros(std::size_t channels, std::size_t reduction, std::size_t spatial_kernel) {
  if (reduction == 0) throw ConfigError("channel attention reduction ratio must be positive");
  if (spatial_kernel % 2 == 0) throw ConfigError("spatial attention kernel must be odd");
  const std::size_t hidden = std::max<std::size_t>(1, channels / reduction);
  LAParams p;
  p.fc1 = ConvKernel::zeros(hidden, channels, 1);
  p.fc2 = ConvKernel::zeros(channels, hidden, 1);
  p.spatial = ConvKernel::zeros(1, 2, spatial_kernel, 1, spatial_kernel / 2);
  return p;
}

void LAParams::validate(std::size_t channels) const {
  fc1.validate();
  fc2.validate();
  spatial.validate();
  if (fc1.in_channels() != channels || fc2.out_channels() != channels ||
      fc1.out_channels() != fc2.in_channels() || fc1.kernel_h() != 1 || fc2.kernel_h() != 1) {
    throw ConfigError("channel attention bottleneck does not match " + std::to_string(channels) +
                      " channels");
  }
  if (spatial.in_channels() != 2 || spatial.out_channels() != 1 || spatial.stride != 1 ||
      spatial.padding * 2 + 1 != spatial.kernel_h() || spatial.kernel_h() != spatial.kernel_w()) {
    throw ConfigError("spatial attention must be a same-padded 2 -> 1 conv");
  }
}

Tensor4 local_attention(const Tensor4& features, const LAParams& params, LACache* cache) {
  const Shape4& s = features.shape();
  if (s.c != params.fc1.in_channels()) {
    throw ShapeError("local attention built for " + std::to_string(params.fc1.in_channels()) + " channels got " +
                     std::to_string(s.c));
  }
  params.validate(s.c);
  const std::size_t hw = s.plane();
  if (hw == 0) throw ShapeError("local attention on an empty spatial map");

  // Channel descriptors.
  Tensor4 avg_desc({s.n, s.c, 1, 1});
  Tensor4 max_desc({s.n, s.c, 1, 1});
  std::vector<std::size_t> max_index(s.n * s.c);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto p = features.plane(n, c);
      double acc = 0.0;
      std::size_t best = 0;
      for (std::size_t i = 0; i < hw; ++i) {
        acc += p[i];
        if (p[i] > p[best]) best = i;
      }
      avg_desc(n, c, 0, 0) = acc / static_cast<double>(hw);
      max_desc(n, c, 0, 0) = p[best];
      max_index[n * s.c + c] = best;
    }
  }

  Tensor4 avg_pre = conv2d(avg_desc, params.fc1);
  Tensor4 max_pre = conv2d(max_desc, params.fc1);
  Tensor4 logits = add(conv2d(relu(avg_pre), params.fc2), conv2d(relu(max_pre), params.fc2));
  Tensor4 channel_gate = sigmoid(logits);

  Tensor4 gated(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const double g = channel_gate(n, c, 0, 0);
      auto src = features.plane(n, c);
      auto dst = gated.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] * g;
    }

  // Spatial descriptors: mean and max across channels.
  Tensor4 pooled({s.n, 2, s.h, s.w});
  std::vector<std::size_t> max_channel(s.n * hw, 0);
  for (std::size_t n = 0; n < s.n; ++n) {
    auto mean_map = pooled.plane(n, 0);
    auto max_map = pooled.plane(n, 1);
    for (std::size_t i = 0; i < hw; ++i) {
      double acc = 0.0;
      std::size_t best = 0;
      for (std::size_t c = 0; c < s.c; ++c) {
        const double v = gated.plane(n, c)[i];
        acc += v;
        if (v > gated.plane(n, best)[i]) best = c;
      }
      mean_map[i] = acc / static_cast<double>(s.c);
      max_map[i] = gated.plane(n, best)[i];
      max_channel[n * hw + i] = best;
    }
  }
  Tensor4 spatial_gate = sigmoid(conv2d(pooled, params.spatial));

  Tensor4 out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    auto sg = spatial_gate.plane(n, 0);
    for (std::size_t c = 0; c < s.c; ++c) {
      auto src = gated.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] * sg[i];
    }
  }

  if (cache != nullptr) {
    cache->input = features;
    cache->avg_desc = std::move(avg_desc);
    cache->max_desc = std::move(max_desc);
    cache->max_desc_index = std::move(max_index);
    cache->avg_hidden_pre = std::move(avg_pre);
    cache->max_hidden_pre = std::move(max_pre);
    cache->channel_gate = std::move(channel_gate);
    cache->channel_gated = std::move(gated);
    cache->pooled = std::move(pooled);
    cache->pooled_max_channel = std::move(max_channel);
    cache->spatial_gate = std::move(spatial_gate);
  }
  return out;
}

LAGrads local_attention_backward(const Tensor4& grad_output, const LAParams& params,
                                 const LACache& cache) {
  const Shape4& s = cache.input.shape();
  require_same_shape(grad_output.shape(), s, "local_attention_backward");
  const std::size_t hw = s.plane();

  // Through the spatial gate.
  Tensor4 grad_gated(s);
  Tensor4 grad_spatial_gate({s.n, 1, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    auto sg = cache.spatial_gate.plane(n, 0);
    auto gsg = grad_spatial_gate.plane(n, 0);
    for (std::size_t c = 0; c < s.c; ++c) {
      auto g = grad_output.plane(n, c);
      auto cg = cache.channel_gated.plane(n, c);
      auto dst = grad_gated.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) {
        dst[i] = g[i] * sg[i];
        gsg[i] += g[i] * cg[i];
      }
    }
  }
  LAGrads grads;
  grads.spatial = conv2d_backward(cache.pooled, params.spatial,
                                  sigmoid_backward(cache.spatial_gate, grad_spatial_gate));
  const Tensor4& grad_pooled = grads.spatial.input;
  for (std::size_t n = 0; n < s.n; ++n) {
    auto gmean = grad_pooled.plane(n, 0);
    auto gmax = grad_pooled.plane(n, 1);
    for (std::size_t c = 0; c < s.c; ++c) {
      auto dst = grad_gated.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) dst[i] += gmean[i] / static_cast<double>(s.c);
    }
    for (std::size_t i = 0; i < hw; ++i) {
      grad_gated.plane(n, cache.pooled_max_channel[n * hw + i])[i] += gmax[i];
    }
  }

  // Through the channel gate.
  grads.input = Tensor4(s);
  Tensor4 grad_channel_gate({s.n, s.c, 1, 1});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const double gate = cache.channel_gate(n, c, 0, 0);
      auto g = grad_gated.plane(n, c);
      auto f = cache.input.plane(n, c);
      auto dst = grads.input.plane(n, c);
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        dst[i] = g[i] * gate;
        acc += g[i] * f[i];
      }
      grad_channel_gate(n, c, 0, 0) = acc;
    }
  const Tensor4 grad_logits = sigmoid_backward(cache.channel_gate, grad_channel_gate);

  const Tensor4 avg_hidden = relu(cache.avg_hidden_pre);
  const Tensor4 max_hidden = relu(cache.max_hidden_pre);
  grads.fc2 = conv2d_backward(avg_hidden, params.fc2, grad_logits);
  ConvGrads fc2_max = conv2d_backward(max_hidden, params.fc2, grad_logits);
  grads.fc1 = conv2d_backward(cache.avg_desc, params.fc1,
                              relu_backward(cache.avg_hidden_pre, grads.fc2.input));
  ConvGrads fc1_max = conv2d_backward(cache.max_desc, params.fc1,
                                      relu_backward(cache.max_hidden_pre, fc2_max.input));
  const Tensor4 grad_avg_desc = grads.fc1.input;
  const Tensor4 grad_max_desc = fc1_max.input;
  add_conv_grads(grads.fc2, fc2_max);
  add_conv_grads(grads.fc1, fc1_max);
  // The input grads of the shared bottleneck are branch-specific; drop them.
  grads.fc1.input = Tensor4();
  grads.fc2.input = Tensor4();

  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      auto dst = grads.input.plane(n, c);
      const double ga = grad_avg_desc(n, c, 0, 0) / static_cast<double>(hw);
      for (std::size_t i = 0; i < hw; ++i) dst[i] += ga;
      dst[cache.max_desc_index[n * s.c + c]] += grad_max_desc(n, c, 0, 0);
    }
  return grads;
}

// --- fusion ----------------------------------------------------------------

ChannelMasks make_channel_masks(std::size_t channels) {
  ChannelMasks m;
  m.global.assign(channels, 0.0);
  m.local.assign(channels, 0.0);
  const std::size_t split = channels / 2;
  for (std::size_t i = 0; i < channels; ++i) {
    m.global[i] = i < split ? 0.0 : 1.0;
    m.local[i] = 1.0 - m.global[i];
  }
  return m;
}

Tensor4 fuse(const Tensor4& global_features, const Tensor4& local_features, const ChannelMasks& masks) {
  require_same_shape(global_features.shape(), local_features.shape(), "fuse");
  const Shape4& s = global_features.shape();
  if (masks.global.size() != s.c || masks.local.size() != s.c) {
    throw ShapeError("fuse: masks of length " + std::to_string(masks.global.size()) + " for " +
                     std::to_string(s.c) + " channels");
  }
  Tensor4 out(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      auto g = global_features.plane(n, c);
      auto l = local_features.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] = masks.global[c] * g[i] + masks.local[c] * l[i];
    }
  return out;
}

FuseGrads fuse_backward(const Tensor4& grad_output, const ChannelMasks& masks) {
  const Shape4& s = grad_output.shape();
  if (masks.global.size() != s.c || masks.local.size() != s.c) {
    throw ShapeError("fuse_backward: masks do not match channel count");
  }
  FuseGrads g{Tensor4(s), Tensor4(s)};
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      auto src = grad_output.plane(n, c);
      auto gg = g.global_features.plane(n, c);
      auto gl = g.local_features.plane(n, c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        gg[i] = masks.global[c] * src[i];
        gl[i] = masks.local[c] * src[i];
      }
    }
  return g;
}

}  // namespace glamor
