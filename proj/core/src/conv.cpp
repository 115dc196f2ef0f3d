#include "glamor/conv.hpp"

#include <algorithm>
#include <cstdint>

#include "glamor/errors.hpp"
#include "glamor/parallel.hpp"

namespace glamor {

namespace {

/// Output indices o in [lo, hi) satisfy 0 <= o*stride + k - pad < in_extent.
struct ValidRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

ValidRange valid_outputs(std::size_t k, std::size_t pad, std::size_t stride, std::size_t in_extent,
                         std::size_t out_extent) {
  const auto s = static_cast<std::int64_t>(stride);
  const auto shift = static_cast<std::int64_t>(k) - static_cast<std::int64_t>(pad);
  std::int64_t lo = 0;
  if (shift < 0) lo = (-shift + s - 1) / s;
  const std::int64_t last_in = static_cast<std::int64_t>(in_extent) - 1 - shift;
  std::int64_t hi = last_in < 0 ? 0 : last_in / s + 1;
  hi = std::min<std::int64_t>(hi, static_cast<std::int64_t>(out_extent));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

ConvKernel ConvKernel::zeros(std::size_t out_channels, std::size_t in_channels, std::size_t kernel,
                             std::size_t stride, std::size_t padding) {
  ConvKernel k;
  k.weight = Tensor4({out_channels, in_channels, kernel, kernel});
  k.bias.assign(out_channels, 0.0);
  k.stride = stride;
  k.padding = padding;
  return k;
}

void ConvKernel::validate() const {
  const auto& s = weight.shape();
  if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0) {
    throw ConfigError("conv kernel has an empty dimension: " + s.str());
  }
  if (s.h % 2 == 0 || s.w % 2 == 0) {
    throw ConfigError("conv kernel extents must be odd, got " + s.str());
  }
  if (stride == 0) throw ConfigError("conv stride must be positive");
  if (bias.size() != s.n) {
    throw ConfigError("conv bias length " + std::to_string(bias.size()) + " does not match " +
                      std::to_string(s.n) + " output channels");
  }
}

Shape4 ConvKernel::output_shape(const Shape4& input) const {
  validate();
  if (input.c != in_channels()) {
    throw ShapeError("conv2d: input has " + std::to_string(input.c) + " channels, kernel expects " +
                     std::to_string(in_channels()) + " (input " + input.str() + ", kernel " +
                     weight.shape().str() + ")");
  }
  const std::size_t padded_h = input.h + 2 * padding;
  const std::size_t padded_w = input.w + 2 * padding;
  if (padded_h < kernel_h() || padded_w < kernel_w()) {
    throw ShapeError("conv2d: kernel " + weight.shape().str() + " larger than padded input " +
                     input.str());
  }
  return {input.n, out_channels(), (padded_h - kernel_h()) / stride + 1,
          (padded_w - kernel_w()) / stride + 1};
}

Tensor4 conv2d(const Tensor4& input, const ConvKernel& kernel) {
  const Shape4 out_shape = kernel.output_shape(input.shape());
  const Shape4& in = input.shape();
  const std::size_t kh_n = kernel.kernel_h();
  const std::size_t kw_n = kernel.kernel_w();
  const std::size_t s = kernel.stride;
  const std::size_t p = kernel.padding;
  Tensor4 out(out_shape);

  parallel_for(out_shape.n * out_shape.c, [&](std::size_t job) {
    const std::size_t n = job / out_shape.c;
    const std::size_t oc = job % out_shape.c;
    auto dst = out.plane(n, oc);
    std::fill(dst.begin(), dst.end(), kernel.bias[oc]);
    for (std::size_t kh = 0; kh < kh_n; ++kh) {
      const ValidRange rows = valid_outputs(kh, p, s, in.h, out_shape.h);
      for (std::size_t kw = 0; kw < kw_n; ++kw) {
        const ValidRange cols = valid_outputs(kw, p, s, in.w, out_shape.w);
        for (std::size_t ic = 0; ic < in.c; ++ic) {
          const double wv = kernel.weight(oc, ic, kh, kw);
          auto src = input.plane(n, ic);
          for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
            const std::size_t ih = oh * s + kh - p;
            double* drow = dst.data() + oh * out_shape.w;
            const double* srow = src.data() + ih * in.w;
            for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) {
              drow[ow] += wv * srow[ow * s + kw - p];
            }
          }
        }
      }
    }
  });
  return out;
}

ConvGrads conv2d_backward(const Tensor4& input, const ConvKernel& kernel,
                          const Tensor4& grad_output) {
  const Shape4 out_shape = kernel.output_shape(input.shape());
  require_same_shape(grad_output.shape(), out_shape, "conv2d_backward grad_output");
  const Shape4& in = input.shape();
  const std::size_t kh_n = kernel.kernel_h();
  const std::size_t kw_n = kernel.kernel_w();
  const std::size_t s = kernel.stride;
  const std::size_t p = kernel.padding;

  ConvGrads grads;
  grads.input = Tensor4(in);
  grads.weight = Tensor4(kernel.weight.shape());
  grads.bias.assign(kernel.out_channels(), 0.0);

  std::vector<Tensor4> weight_parts(in.n, Tensor4(kernel.weight.shape()));
  std::vector<std::vector<double>> bias_parts(in.n, std::vector<double>(kernel.out_channels(), 0.0));

  parallel_for(in.n, [&](std::size_t n) {
    Tensor4& gw = weight_parts[n];
    for (std::size_t oc = 0; oc < out_shape.c; ++oc) {
      auto g = grad_output.plane(n, oc);
      double bsum = 0.0;
      for (double v : g) bsum += v;
      bias_parts[n][oc] = bsum;

      for (std::size_t kh = 0; kh < kh_n; ++kh) {
        const ValidRange rows = valid_outputs(kh, p, s, in.h, out_shape.h);
        for (std::size_t kw = 0; kw < kw_n; ++kw) {
          const ValidRange cols = valid_outputs(kw, p, s, in.w, out_shape.w);
          for (std::size_t ic = 0; ic < in.c; ++ic) {
            const double wv = kernel.weight(oc, ic, kh, kw);
            auto src = input.plane(n, ic);
            auto gin = grads.input.plane(n, ic);
            double wacc = 0.0;
            for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
              const std::size_t ih = oh * s + kh - p;
              const double* grow = g.data() + oh * out_shape.w;
              const double* srow = src.data() + ih * in.w;
              double* girow = gin.data() + ih * in.w;
              for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) {
                const std::size_t iw = ow * s + kw - p;
                wacc += grow[ow] * srow[iw];
                girow[iw] += wv * grow[ow];
              }
            }
            gw(oc, ic, kh, kw) += wacc;
          }
        }
      }
    }
  });

  for (std::size_t n = 0; n < in.n; ++n) {
    add_inplace(grads.weight, weight_parts[n]);
    for (std::size_t oc = 0; oc < grads.bias.size(); ++oc) grads.bias[oc] += bias_parts[n][oc];
  }
  return grads;
}

}  // namespace glamor
