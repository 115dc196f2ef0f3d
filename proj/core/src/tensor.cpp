#include "glamor/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "glamor/errors.hpp"

namespace glamor {

std::string Shape4::str() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
         std::to_string(w);
}

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor4::Tensor4(Shape4 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_.str());
  }
}

std::span<double> Tensor4::plane(std::size_t n, std::size_t c) noexcept {
  return std::span<double>(data_).subspan(offset(n, c, 0, 0), shape_.plane());
}

std::span<const double> Tensor4::plane(std::size_t n, std::size_t c) const noexcept {
  return std::span<const double>(data_).subspan(offset(n, c, 0, 0), shape_.plane());
}

std::span<double> Tensor4::sample(std::size_t n) noexcept {
  return std::span<double>(data_).subspan(n * shape_.sample_size(), shape_.sample_size());
}

std::span<const double> Tensor4::sample(std::size_t n) const noexcept {
  return std::span<const double>(data_).subspan(n * shape_.sample_size(), shape_.sample_size());
}

Tensor4 Tensor4::gather(std::span<const std::size_t> indices) const {
  Tensor4 out({indices.size(), shape_.c, shape_.h, shape_.w});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= shape_.n) {
      throw ShapeError("gather index " + std::to_string(indices[i]) + " out of range for " +
                       shape_.str());
    }
    auto src = sample(indices[i]);
    std::copy(src.begin(), src.end(), out.sample(i).begin());
  }
  return out;
}

void Tensor4::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

void require_same_shape(const Shape4& a, const Shape4& b, const char* context) {
  if (!(a == b)) {
    throw ShapeError(std::string(context) + ": shape " + a.str() + " vs " + b.str());
  }
}

namespace {

template <typename Op>
Tensor4 zip(const Tensor4& a, const Tensor4& b, const char* context, Op op) {
  require_same_shape(a.shape(), b.shape(), context);
  Tensor4 out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
  return out;
}

template <typename Op>
Tensor4 map(const Tensor4& a, Op op) {
  Tensor4 out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i]);
  return out;
}

void check_slope(double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw ConfigError("leaky relu slope must lie in (0, 1), got " + std::to_string(slope));
  }
}

}  // namespace

Tensor4 add(const Tensor4& a, const Tensor4& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor4 multiply(const Tensor4& a, const Tensor4& b) {
  return zip(a, b, "multiply", [](double x, double y) { return x * y; });
}

Tensor4 scale(const Tensor4& a, double factor) {
  return map(a, [factor](double x) { return x * factor; });
}

void add_inplace(Tensor4& dst, const Tensor4& src) {
  require_same_shape(dst.shape(), src.shape(), "add_inplace");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

double sum(const Tensor4& t) noexcept {
  double acc = 0.0;
  for (double v : t.data()) acc += v;
  return acc;
}

double max_abs(const Tensor4& t) noexcept {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(const Tensor4& t) noexcept {
  return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor4 leaky_relu(const Tensor4& x, double slope) {
  check_slope(slope);
  return map(x, [slope](double v) { return v >= 0.0 ? v : slope * v; });
}

Tensor4 leaky_relu_backward(const Tensor4& input, const Tensor4& grad_output, double slope) {
  check_slope(slope);
  return zip(input, grad_output, "leaky_relu_backward",
             [slope](double x, double g) { return x >= 0.0 ? g : slope * g; });
}

Tensor4 relu(const Tensor4& x) {
  return map(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_output) {
  return zip(input, grad_output, "relu_backward",
             [](double x, double g) { return x > 0.0 ? g : 0.0; });
}

Tensor4 sigmoid(const Tensor4& x) {
  return map(x, [](double v) { return sigmoid(v); });
}

Tensor4 sigmoid_backward(const Tensor4& output, const Tensor4& grad_output) {
  return zip(output, grad_output, "sigmoid_backward",
             [](double s, double g) { return g * s * (1.0 - s); });
}

}  // namespace glamor
