#pragma once

#include <cstddef>
#include <vector>

#include "glamor/conv.hpp"
#include "glamor/tensor.hpp"

namespace glamor {

// ---------------------------------------------------------------------------
// Global attention: GA(F) = F * sigmoid(conv2(leaky_relu(conv1(F))))
// Both convolutions are 3x3 with padding 1 and stride 1, so the gate has the
// same shape as F. No pooling anywhere in the module.
// ---------------------------------------------------------------------------

struct GAParams {
  ConvKernel conv1;  // C -> C_mid
  ConvKernel conv2;  // C_mid -> C
  double leaky_slope = kDefaultLeakySlope;

  /// Zero weights; `mid_channels == 0` means C_mid = C.
  static GAParams zeros(std::size_t channels, std::size_t mid_channels = 0);

  /// Throws ConfigError unless the conv chain maps C -> C with unchanged spatial extent.
  void validate(std::size_t channels) const;
};

struct GACache {
  Tensor4 input;
  Tensor4 pre_activation;  // conv1(F)
  Tensor4 hidden;          // leaky_relu(conv1(F))
  Tensor4 gate;            // sigmoid(conv2(hidden))
};

struct GAGrads {
  Tensor4 input;
  ConvGrads conv1;
  ConvGrads conv2;
};

Tensor4 global_attention(const Tensor4& features, const GAParams& params, GACache* cache = nullptr);
GAGrads global_attention_backward(const Tensor4& grad_output, const GAParams& params,
                                  const GACache& cache);

// ---------------------------------------------------------------------------
// Local attention: channel gates then spatial gates.
//   channel: avg- and max-pooled descriptors pass through a shared two-layer
//            bottleneck (1x1 convs, ReLU between), summed, sigmoid
//   spatial: channel-wise mean and max maps -> one k x k conv -> sigmoid
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDefaultReductionRatio = 16;
inline constexpr std::size_t kDefaultSpatialKernel = 7;

struct LAParams {
  ConvKernel fc1;      // C -> hidden, 1x1
  ConvKernel fc2;      // hidden -> C, 1x1
  ConvKernel spatial;  // 2 -> 1, k x k, padding k/2

  /// hidden = max(1, C / reduction).
  static LAParams zeros(std::size_t channels, std::size_t reduction = kDefaultReductionRatio,
                        std::size_t spatial_kernel = kDefaultSpatialKernel);

  void validate(std::size_t channels) const;
};

struct LACache {
  Tensor4 input;
  Tensor4 avg_desc;  // N x C x 1 x 1
  Tensor4 max_desc;
  std::vector<std::size_t> max_desc_index;  // argmax pixel per (n, c)
  Tensor4 avg_hidden_pre;
  Tensor4 max_hidden_pre;
  Tensor4 channel_gate;  // N x C x 1 x 1
  Tensor4 channel_gated;
  Tensor4 pooled;  // N x 2 x H x W
  std::vector<std::size_t> pooled_max_channel;
  Tensor4 spatial_gate;  // N x 1 x H x W
};

struct LAGrads {
  Tensor4 input;
  ConvGrads fc1;
  ConvGrads fc2;
  ConvGrads spatial;
};

Tensor4 local_attention(const Tensor4& features, const LAParams& params, LACache* cache = nullptr);
LAGrads local_attention_backward(const Tensor4& grad_output, const LAParams& params,
                                 const LACache& cache);

// ---------------------------------------------------------------------------
// Channel-masked fusion: F = M_G * F_G + M_L * F_L with M_L = 1 - M_G and
// M_G[i] = 0 for i < floor(C/2), 1 otherwise.
// ---------------------------------------------------------------------------

struct ChannelMasks {
  std::vector<double> global;
  std::vector<double> local;
};

ChannelMasks make_channel_masks(std::size_t channels);

Tensor4 fuse(const Tensor4& global_features, const Tensor4& local_features, const ChannelMasks& masks);

struct FuseGrads {
  Tensor4 global_features;
  Tensor4 local_features;
};

FuseGrads fuse_backward(const Tensor4& grad_output, const ChannelMasks& masks);

}  // namespace glamor
