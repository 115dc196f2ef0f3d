#pragma once

#include <cstddef>
#include <vector>

#include "glamor/tensor.hpp"

namespace glamor {

/// Convolution weights (out_channels, in_channels, kh, kw) with per-output bias.
struct ConvKernel {
  Tensor4 weight;
  std::vector<double> bias;
  std::size_t stride = 1;
  std::size_t padding = 0;

  /// Zero weights and bias; `kernel` is used for both spatial extents.
  static ConvKernel zeros(std::size_t out_channels, std::size_t in_channels, std::size_t kernel,
                          std::size_t stride = 1, std::size_t padding = 0);

  std::size_t out_channels() const noexcept { return weight.shape().n; }
  std::size_t in_channels() const noexcept { return weight.shape().c; }
  std::size_t kernel_h() const noexcept { return weight.shape().h; }
  std::size_t kernel_w() const noexcept { return weight.shape().w; }

  /// Throws ConfigError for even kernels, zero stride or a bias of the wrong length.
  void validate() const;

  /// floor((in + 2*padding - k) / stride) + 1 per spatial axis; throws ShapeError
  /// when the input channel count differs or an output extent would be empty.
  Shape4 output_shape(const Shape4& input) const;
};

/// Gradients of conv2d with respect to input, weight and bias.
struct ConvGrads {
  Tensor4 input;
  Tensor4 weight;
  std::vector<double> bias;
};

/// Direct cross-correlation. Every output element starts from its bias and
/// accumulates products in kh -> kw -> in_channel order, so results are
/// bit-reproducible regardless of the thread count.
Tensor4 conv2d(const Tensor4& input, const ConvKernel& kernel);

/// Weight and bias gradients are summed per sample first, then across samples
/// in index order.
ConvGrads conv2d_backward(const Tensor4& input, const ConvKernel& kernel,
                          const Tensor4& grad_output);

}  // namespace glamor
