#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace glamor {

/// Dimensions of an NCHW tensor.
struct Shape4 {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t numel() const noexcept { return n * c * h * w; }
  constexpr std::size_t plane() const noexcept { return h * w; }
  constexpr std::size_t sample_size() const noexcept { return c * h * w; }

  friend constexpr bool operator==(const Shape4&, const Shape4&) = default;

  std::string str() const;
};

/// Dense 4-axis array of doubles stored row-major in n -> c -> h -> w order.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, double fill = 0.0);
  Tensor4(Shape4 shape, std::vector<double> data);

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[offset(n, c, h, w)];
  }
  double operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[offset(n, c, h, w)];
  }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  /// One H x W channel plane of sample n.
  std::span<double> plane(std::size_t n, std::size_t c) noexcept;
  std::span<const double> plane(std::size_t n, std::size_t c) const noexcept;

  /// All C x H x W values of sample n.
  std::span<double> sample(std::size_t n) noexcept;
  std::span<const double> sample(std::size_t n) const noexcept;

  /// Copy of the samples listed in `indices`, in that order.
  Tensor4 gather(std::span<const std::size_t> indices) const;

  void fill(double value) noexcept;

 private:
  Shape4 shape_;
  std::vector<double> data_;
};

/// Throws ShapeError naming `context` when the shapes differ.
void require_same_shape(const Shape4& a, const Shape4& b, const char* context);

Tensor4 add(const Tensor4& a, const Tensor4& b);
Tensor4 multiply(const Tensor4& a, const Tensor4& b);
Tensor4 scale(const Tensor4& a, double factor);
void add_inplace(Tensor4& dst, const Tensor4& src);

double sum(const Tensor4& t) noexcept;
double max_abs(const Tensor4& t) noexcept;
bool all_finite(const Tensor4& t) noexcept;

inline constexpr double kDefaultLeakySlope = 0.01;

double sigmoid(double x) noexcept;

/// out = x for x >= 0, slope * x otherwise. slope must lie in (0, 1).
Tensor4 leaky_relu(const Tensor4& x, double slope = kDefaultLeakySlope);
Tensor4 leaky_relu_backward(const Tensor4& input, const Tensor4& grad_output, double slope);

Tensor4 relu(const Tensor4& x);
Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_output);

Tensor4 sigmoid(const Tensor4& x);
/// Gradient through sigmoid given its forward output.
Tensor4 sigmoid_backward(const Tensor4& output, const Tensor4& grad_output);

}  // namespace glamor
