#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "glamor/conv.hpp"
#include "glamor/errors.hpp"
#include "glamor/grad_check.hpp"
#include "glamor/random.hpp"
#include "glamor/tensor.hpp"
#include "glamor/tensor_io.hpp"
#include "glamor/testing/oracles.hpp"
#include "test_util.hpp"

namespace glamor {
namespace {

TEST(Conv2d, OnesKernelOverOnesGivesNine) {
  Tensor4 x({1, 1, 3, 3}, 1.0);
  ConvKernel k = ConvKernel::zeros(1, 1, 3);
  k.weight.fill(1.0);
  const Tensor4 y = conv2d(x, k);
  ASSERT_EQ(y.shape(), (Shape4{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 9.0);
}

TEST(Conv2d, ZeroWeightsGiveBias) {
  Rng rng(3);
  const Tensor4 x = test::random_tensor({2, 3, 6, 5}, rng);
  ConvKernel k = ConvKernel::zeros(4, 3, 3, 1, 1);
  k.bias = {0.5, -1.0, 2.0, 0.0};
  const Tensor4 y = conv2d(x, k);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 4; ++c)
      for (double v : y.plane(n, c)) EXPECT_EQ(v, k.bias[c]);
}

TEST(Conv2d, MatchesDirectLoops) {
  Rng rng(7);
  const Tensor4 x = test::random_tensor({2, 3, 8, 8}, rng);
  ConvKernel k = ConvKernel::zeros(4, 3, 3, 1, 1);
  test::fill_normal(k.weight.data(), rng);
  test::fill_normal(k.bias, rng);
  const Tensor4 y = conv2d(x, k);
  const Tensor4 ref = testing::conv2d_reference(x, k);
  EXPECT_LE(test::max_abs_diff(y, ref), 1e-12);
}

TEST(Conv2d, StridePaddingShapes) {
  ConvKernel k = ConvKernel::zeros(2, 3, 3, 2, 1);
  EXPECT_EQ(k.output_shape({1, 3, 8, 8}), (Shape4{1, 2, 4, 4}));
  EXPECT_EQ(k.output_shape({1, 3, 7, 7}), (Shape4{1, 2, 4, 4}));
  ConvKernel big = ConvKernel::zeros(1, 1, 7);
  EXPECT_THROW(big.output_shape({1, 1, 5, 5}), ShapeError);
  EXPECT_THROW(k.output_shape({1, 2, 8, 8}), ShapeError);
}

TEST(Conv2d, RejectsEvenKernel) {
  ConvKernel k = ConvKernel::zeros(1, 1, 2);
  EXPECT_THROW(k.validate(), ConfigError);
}

// conv(aX + bY) = a conv(X) + b conv(Y) - (a + b - 1) bias
TEST(Conv2d, AffineInInput) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor4 x = test::random_tensor({1, 2, 5, 6}, rng);
    const Tensor4 y = test::random_tensor({1, 2, 5, 6}, rng);
    ConvKernel k = ConvKernel::zeros(3, 2, 3, 1, 1);
    test::fill_normal(k.weight.data(), rng);
    test::fill_normal(k.bias, rng);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    const Tensor4 lhs = conv2d(add(scale(x, a), scale(y, b)), k);
    Tensor4 rhs = add(scale(conv2d(x, k), a), scale(conv2d(y, k), b));
    for (std::size_t c = 0; c < 3; ++c)
      for (double& v : rhs.plane(0, c)) v -= (a + b - 1.0) * k.bias[c];
    EXPECT_LE(test::max_abs_diff(lhs, rhs), 1e-10);
  }
}

TEST(Conv2d, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  const Tensor4 x = test::random_tensor({2, 2, 5, 5}, rng);
  ConvKernel k = ConvKernel::zeros(3, 2, 3, 2, 1);
  test::fill_normal(k.weight.data(), rng);
  test::fill_normal(k.bias, rng);
  const Tensor4 up = test::random_tensor(k.output_shape(x.shape()), rng);
  const ConvGrads g = conv2d_backward(x, k, up);
  auto value = [&](std::span<const double> p) {
    Tensor4 xi(x.shape(), std::vector<double>(p.begin(), p.end()));
    const Tensor4 y = conv2d(xi, k);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
    return s;
  };
  auto grad = [&](std::span<const double>) {
    return std::vector<double>(g.input.data().begin(), g.input.data().end());
  };
  EXPECT_TRUE(grad_check(value, grad, x.data()).passed);
}

TEST(Activations, LeakyRelu) {
  const Tensor4 x({1, 1, 1, 3}, std::vector<double>{2.0, -2.0, 0.0});
  const Tensor4 y = leaky_relu(x, 0.01);
  EXPECT_EQ(y[0], 2.0);
  EXPECT_DOUBLE_EQ(y[1], -0.02);
  EXPECT_EQ(y[2], 0.0);
}

TEST(Activations, Sigmoid) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(40.0), 1.0, 1e-15);
  Rng rng(2);
  const Tensor4 x = test::random_tensor({2, 3, 4, 4}, rng, 5.0);
  const Tensor4 a = sigmoid(x);
  const Tensor4 b = sigmoid(scale(x, -1.0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(a[i], 1.0 - b[i], 1e-12);
    EXPECT_GT(a[i], 0.0);
    EXPECT_LT(a[i], 1.0);
  }
}

TEST(Activations, SigmoidExtremesStayFinite) {
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
}

TEST(GradCheck, Quadratic) {
  const std::vector<double> x{3.0};
  const auto r = grad_check([](auto p) { return p[0] * p[0]; },
                            [](auto p) { return std::vector<double>{2.0 * p[0]}; }, x);
  EXPECT_LE(r.max_rel_error, 1e-9);
  EXPECT_TRUE(r.passed);
}

TEST(GradCheck, QuadraticsAlwaysPass) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(6), x(6);
    test::fill_normal(a, rng);
    test::fill_normal(x, rng);
    auto f = [&](std::span<const double> p) {
      double s = 0;
      for (std::size_t i = 0; i < p.size(); ++i) s += a[i] * p[i] * p[i];
      return s;
    };
    auto g = [&](std::span<const double> p) {
      std::vector<double> out(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) out[i] = 2.0 * a[i] * p[i];
      return out;
    };
    EXPECT_TRUE(grad_check(f, g, x).passed);
  }
}

TEST(GradCheck, WrongGradientFails) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(4);
    test::fill_normal(x, rng);
    auto f = [](std::span<const double> p) { return p[0] * p[0] + std::sin(p[1]) + p[2] * p[3]; };
    auto g = [](std::span<const double> p) {
      return std::vector<double>{4.0 * p[0], 2.0 * std::cos(p[1]), 2.0 * p[3], 2.0 * p[2]};
    };
    const auto r = grad_check(f, g, x);
    EXPECT_FALSE(r.passed);
  }
}

TEST(GradCheck, NamesAndNonFinite) {
  const std::vector<double> x{1.0, 2.0};
  GradCheckOptions opt;
  opt.names = {"a", "b"};
  const auto r = grad_check([](auto p) { return p[0] + p[1]; },
                            [](auto) { return std::vector<double>{1.0, 1.0}; }, x, opt);
  ASSERT_EQ(r.per_parameter_errors.size(), 2u);
  EXPECT_EQ(r.per_parameter_errors[1].first, "b");
  EXPECT_THROW(grad_check([](auto p) { return p[0] > 1.0 ? NAN : 0.0; },
                          [](auto) { return std::vector<double>{0.0, 0.0}; }, x),
               NumericalError);
}

// |x| at 0 + 1e-6: the default step straddles the kink, the refined one does not
TEST(GradCheck, KinkRefinementOnlyWhenOneSidedQuotientsDisagree) {
  const std::vector<double> x{3e-6};
  auto f = [](std::span<const double> p) { return std::abs(p[0]); };
  auto g = [](std::span<const double> p) { return std::vector<double>{p[0] > 0 ? 1.0 : -1.0}; };
  EXPECT_FALSE(grad_check(f, g, x).passed);
  GradCheckOptions opt;
  opt.kink_refinements = 2;
  const auto r = grad_check(f, g, x, opt);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.refined, 1u);
  // a smooth function with a wrong gradient is not rescued
  auto wrong = [](std::span<const double> p) { return std::vector<double>{3.0 * p[0] * p[0] * 1.5}; };
  const auto r2 = grad_check([](auto p) { return p[0] * p[0] * p[0]; }, wrong, std::vector<double>{1.0}, opt);
  EXPECT_FALSE(r2.passed);
  EXPECT_EQ(r2.refined, 0u);
}

TEST(TensorIo, RoundTripIsByteIdentical) {
  Rng rng(9);
  Tensor4 t = test::random_tensor({2, 3, 2, 4}, rng);
  t[0] = 0.1;
  t[1] = -0.0;
  t[2] = 5e-324;
  t[3] = 1e300;
  std::ostringstream a;
  write_tensor(a, t);
  std::istringstream in(a.str());
  const Tensor4 back = read_tensor(in);
  std::ostringstream b;
  write_tensor(b, back);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(std::signbit(back[1]), true);
  EXPECT_EQ(a.str().substr(0, 29), "#tensor4 v1 shape=2,3,2,4\n0.1");
}

TEST(TensorIo, MalformedInputNamesLine) {
  std::istringstream bad("#tensor4 v1 shape=1,1,1,2\n1.0 nope\n");
  try {
    read_tensor(bad);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream short_data("#tensor4 v1 shape=1,1,1,3\n1 2\n");
  EXPECT_THROW(read_tensor(short_data), DataError);
  std::istringstream header("#tensor3 v1 shape=1,1,1\n");
  EXPECT_THROW(read_tensor(header), DataError);
}

TEST(Tensor, GatherAndShapes) {
  Tensor4 t({3, 1, 1, 2}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::vector<std::size_t> idx{2, 0};
  const Tensor4 g = t.gather(idx);
  EXPECT_EQ(g.shape(), (Shape4{2, 1, 1, 2}));
  EXPECT_EQ(g[0], 5);
  EXPECT_EQ(g[3], 2);
  EXPECT_THROW(Tensor4({1, 1, 1, 2}, std::vector<double>{1}), ShapeError);
  EXPECT_THROW(add(t, g), ShapeError);
}

}  // namespace
}  // namespace glamor
