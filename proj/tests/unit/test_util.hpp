#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "glamor/matrix.hpp"
#include "glamor/random.hpp"
#include "glamor/tensor.hpp"

namespace glamor::test {

inline void fill_normal(std::span<double> values, Rng& rng, double sd = 1.0) {
  for (double& v : values) v = rng.normal(0.0, sd);
}

inline Tensor4 random_tensor(Shape4 shape, Rng& rng, double sd = 1.0) {
  Tensor4 t(shape);
  fill_normal(t.data(), rng, sd);
  return t;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double sd = 1.0) {
  Matrix m(rows, cols);
  fill_normal(m.data(), rng, sd);
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  if (!(a.shape() == b.shape())) return INFINITY;
  return max_abs_diff(a.data(), b.data());
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  return max_abs_diff(a.data(), b.data());
}

}  // namespace glamor::test
