#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "vsrlab/autograd.hpp"
#include "vsrlab/errors.hpp"
#include "vsrlab/nn.hpp"
#include "vsrlab/resample.hpp"

using namespace vsrlab;
using testkit::gradient_error;
using testkit::normal_tensor;
using testkit::random_tensor;

namespace {

// Reduces any output to a scalar through a fixed random projection so every
// output element contributes a distinct weight to the gradient.
testkit::ScalarFn projected(std::function<ag::Var(const ag::Var&)> op, Shape out_shape, std::uint64_t seed) {
  const auto proj = ag::constant(normal_tensor(out_shape, seed));
  return [op, proj](const ag::Var& x) { return ag::sum(ag::mul(op(x), proj)); };
}

float replicate_at(const Tensor& x, int n, int c, int h, int w) {
  h = std::clamp(h, 0, x.h() - 1);
  w = std::clamp(w, 0, x.w() - 1);
  return x.at(n, c, h, w);
}

// Cubic convolution kernel, a = -0.75.
double cubic(double t) {
  const double a = -0.75;
  t = std::abs(t);
  if (t <= 1) return (a + 2) * t * t * t - (a + 3) * t * t + 1;
  if (t < 2) return a * t * t * t - 5 * a * t * t + 8 * a * t - 4 * a;
  return 0;
}

}  // namespace

TEST(Tensor, BasicArithmetic) {
  Tensor a({1, 1, 1, 3}, std::vector<float>{1, -2, 3});
  Tensor b({1, 1, 1, 3}, std::vector<float>{1, 1, 1});
  a += b;
  EXPECT_EQ(a, (Tensor({1, 1, 1, 3}, std::vector<float>{2, -1, 4})));
  a *= 2.0f;
  EXPECT_DOUBLE_EQ(a.sum(), 10.0);
  EXPECT_DOUBLE_EQ(a.squared_norm(), 16 + 4 + 64);
  EXPECT_EQ(a.max_abs(), 8.0f);
  EXPECT_THROW(max_abs_diff(a, Tensor({1, 1, 3, 1})), ShapeError);
}

TEST(Rng, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, "clip", 0), derive_seed(1, "clip", 0));
  EXPECT_NE(derive_seed(1, "clip", 0), derive_seed(1, "clip", 1));
  EXPECT_NE(derive_seed(1, "clip", 0), derive_seed(1, "clap", 0));
  EXPECT_NE(derive_seed(1, "clip", 0), derive_seed(2, "clip", 0));
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const int v = uniform_int(rng, -2, 2);
    EXPECT_GE(v, -2);
    EXPECT_LE(v, 2);
  }
}

TEST(LeakyRelu, Examples) {
  const auto y = nn::lrelu(ag::constant(Tensor({1, 1, 1, 3}, std::vector<float>{2.0f, -1.0f, 0.0f}))).value();
  EXPECT_FLOAT_EQ(y[0], 2.0f);
  EXPECT_FLOAT_EQ(y[1], -0.1f);
  EXPECT_FLOAT_EQ(y[2], 0.0f);
}

TEST(Conv2d, ZeroWeightsGiveZeros) {
  const auto conv = nn::Conv2d::zeros(3, 5, 3);
  const auto y = conv(ag::constant(random_tensor({2, 3, 6, 6}, 1))).value();
  EXPECT_EQ(y.shape(), (Shape{2, 5, 6, 6}));
  EXPECT_EQ(y.max_abs(), 0.0f);
}

TEST(Conv2d, PermutationKernelPermutesChannels) {
  auto conv = nn::Conv2d::zeros(3, 3, 1);
  Tensor w({3, 3, 1, 1});
  w.at(0, 2, 0, 0) = w.at(1, 0, 0, 0) = w.at(2, 1, 0, 0) = 1.0f;
  conv.weight.mutable_value() = w;
  const Tensor x = random_tensor({1, 3, 4, 4}, 2);
  const auto y = conv(ag::constant(x)).value();
  for (int h = 0; h < 4; ++h)
    for (int v = 0; v < 4; ++v) {
      EXPECT_EQ(y.at(0, 0, h, v), x.at(0, 2, h, v));
      EXPECT_EQ(y.at(0, 1, h, v), x.at(0, 0, h, v));
      EXPECT_EQ(y.at(0, 2, h, v), x.at(0, 1, h, v));
    }
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  Rng rng(3);
  const auto conv = nn::Conv2d::create(3, 4, 3, rng);
  auto bias = normal_tensor({1, 4, 1, 1}, 4);
  conv.bias.node()->value = bias;
  const Tensor x = random_tensor({2, 3, 8, 8}, 5);
  const auto y = conv(ag::constant(x)).value();
  const Tensor& w = conv.weight.value();
  double worst = 0.0;
  for (int n = 0; n < 2; ++n)
    for (int o = 0; o < 4; ++o)
      for (int h = 0; h < 8; ++h)
        for (int v = 0; v < 8; ++v) {
          double acc = bias.at(0, o, 0, 0);
          for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 3; ++i)
              for (int j = 0; j < 3; ++j) acc += w.at(o, c, i, j) * replicate_at(x, n, c, h + i - 1, v + j - 1);
          worst = std::max(worst, std::abs(acc - y.at(n, o, h, v)));
        }
  EXPECT_LE(worst, 1e-5);
}

TEST(Conv2d, ChannelMismatchIsShapeError) {
  const auto conv = nn::Conv2d::zeros(3, 4, 3);
  EXPECT_THROW((void)conv(ag::constant(Tensor({1, 2, 4, 4}))), ShapeError);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  Rng rng(6);
  const auto conv = nn::Conv2d::create(3, 4, 3, rng);
  const Tensor x = random_tensor({2, 3, 5, 6}, 7, -1.0f, 1.0f);
  const auto wc = conv.weight, bc = conv.bias;
  EXPECT_LE(gradient_error(x, projected([&](const ag::Var& v) { return ag::conv2d(v, wc, bc); }, {2, 4, 5, 6}, 8),
                           1e-2f),
            1e-3);
  const auto xc = ag::constant(x);
  EXPECT_LE(gradient_error(conv.weight.value(),
                           projected([&](const ag::Var& w) { return ag::conv2d(xc, w, bc); }, {2, 4, 5, 6}, 9), 1e-2f),
            1e-3);
  EXPECT_LE(gradient_error(normal_tensor({1, 4, 1, 1}, 10),
                           projected([&](const ag::Var& b) { return ag::conv2d(xc, wc, b); }, {2, 4, 5, 6}, 11), 1e-2f),
            1e-3);
}

TEST(Autograd, ElementwiseGradients) {
  const Tensor a = random_tensor({1, 2, 3, 4}, 12, 0.5f, 1.5f);
  const auto b = ag::constant(random_tensor({1, 2, 3, 4}, 13, 0.5f, 1.5f));
  const Shape s = a.shape();
  struct Case {
    const char* name;
    std::function<ag::Var(const ag::Var&)> op;
  };
  const std::vector<Case> cases{
      {"add", [&](const ag::Var& v) { return ag::add(v, b); }},
      {"sub", [&](const ag::Var& v) { return ag::sub(b, v); }},
      {"mul", [&](const ag::Var& v) { return ag::mul(v, b); }},
      {"div_num", [&](const ag::Var& v) { return ag::div(v, b); }},
      {"div_den", [&](const ag::Var& v) { return ag::div(b, v); }},
      {"scale", [&](const ag::Var& v) { return ag::scale(v, -2.5f); }},
      {"axpby", [&](const ag::Var& v) { return ag::axpby(v, 0.3f, b, 2.0f); }},
      {"square", [&](const ag::Var& v) { return ag::square(v); }},
      {"sqrt", [&](const ag::Var& v) { return ag::sqrt(v); }},
      {"softplus", [&](const ag::Var& v) { return ag::softplus(ag::add_scalar(v, -1.0f)); }},
      {"clamp_interior", [&](const ag::Var& v) { return ag::clamp(v, 0.0f, 2.0f); }},
      {"leaky_positive", [&](const ag::Var& v) { return ag::leaky_relu(v, 0.1f); }},
      {"leaky_negative", [&](const ag::Var& v) { return ag::leaky_relu(ag::scale(v, -1.0f), 0.1f); }},
      {"abs", [&](const ag::Var& v) { return ag::abs(ag::add_scalar(v, -2.0f)); }},
      {"mean", [&](const ag::Var& v) { return ag::scale(ag::mean(ag::square(v)), 10.0f); }},
  };
  for (const auto& c : cases) {
    EXPECT_LE(gradient_error(a, projected(c.op, c.name == std::string("mean") ? Shape{1, 1, 1, 1} : s, 14), 1e-2f),
              1e-3)
        << c.name;
  }
}

TEST(Autograd, StructuralOpGradients) {
  const Tensor x = random_tensor({2, 4, 4, 6}, 15, -1.0f, 1.0f);
  const auto other = ag::constant(random_tensor({2, 2, 4, 6}, 16));
  EXPECT_LE(gradient_error(x, projected([&](const ag::Var& v) { return ag::concat_channels({other, v, other}); },
                                        {2, 8, 4, 6}, 17),
                           1e-2f),
            1e-3);
  EXPECT_LE(gradient_error(x, projected([](const ag::Var& v) { return ag::pixel_shuffle(v, 2); }, {2, 1, 8, 12}, 18),
                           1e-2f),
            1e-3);
  EXPECT_LE(gradient_error(x, projected([](const ag::Var& v) { return ag::forward_diff(v, 3); }, {2, 4, 4, 5}, 19),
                           1e-2f),
            1e-3);
  EXPECT_LE(gradient_error(x, projected([](const ag::Var& v) { return ag::forward_diff(v, 2); }, {2, 4, 3, 6}, 20),
                           1e-2f),
            1e-3);
  const auto k = normal_tensor({1, 1, 3, 3}, 21);
  for (auto pad : {Padding::replicate, Padding::circular}) {
    EXPECT_LE(gradient_error(x, projected([&](const ag::Var& v) { return ag::kernel2d(v, k, pad); }, {2, 4, 4, 6}, 22),
                             1e-2f),
              1e-3);
  }
  EXPECT_LE(gradient_error(x, projected([&](const ag::Var& v) { return ag::kernel2d(v, k, Padding::valid); },
                                        {2, 4, 2, 4}, 23),
                           1e-2f),
            1e-3);
  const auto rows = LinearMap1D::resize(4, 8, Interpolation::bicubic);
  const auto cols = LinearMap1D::resize(6, 3, Interpolation::bilinear);
  EXPECT_LE(gradient_error(x, projected([&](const ag::Var& v) { return ag::separable(v, rows, cols); }, {2, 4, 8, 3}, 24),
                           1e-2f),
            1e-3);
}

TEST(Autograd, AssembleGridPlacesPatchesAndRoutesGradients) {
  std::vector<ag::Var> patches;
  for (int i = 0; i < 6; ++i) patches.push_back(ag::parameter(Tensor({1, 2, 2, 2}, static_cast<float>(i))));
  const auto out = ag::assemble_grid(patches, 2, 3);
  EXPECT_EQ(out.shape(), (Shape{1, 2, 4, 6}));
  EXPECT_EQ(out.value().at(0, 1, 3, 5), 5.0f);
  EXPECT_EQ(out.value().at(0, 0, 0, 2), 1.0f);
  EXPECT_EQ(out.value().at(0, 0, 2, 0), 3.0f);
  Tensor w(out.shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(i);
  ag::backward(ag::sum(ag::mul(out, ag::constant(w))));
  // Patch 4 is grid row 1, column 1: rows 2..3, columns 2..3.
  EXPECT_EQ(patches[4].grad().at(0, 0, 0, 0), w.at(0, 0, 2, 2));
  EXPECT_EQ(patches[4].grad().at(0, 1, 1, 1), w.at(0, 1, 3, 3));
}

TEST(Autograd, PixelShuffleChannelOrder) {
  Tensor t({1, 4, 1, 1}, std::vector<float>{1, 2, 3, 4});
  const auto y = ag::pixel_shuffle(ag::constant(t), 2).value();
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(y.at(0, 0, 0, 0), 1.0f);
  EXPECT_EQ(y.at(0, 0, 0, 1), 2.0f);
  EXPECT_EQ(y.at(0, 0, 1, 0), 3.0f);
  EXPECT_EQ(y.at(0, 0, 1, 1), 4.0f);
}

TEST(Autograd, NonLocalAggregateGradients) {
  const Tensor a = normal_tensor({2, 3, 2, 2}, 25, 0.5f);
  const auto b = ag::constant(normal_tensor({2, 3, 2, 2}, 26, 0.5f));
  const auto g = ag::constant(normal_tensor({2, 4, 2, 2}, 27));
  const auto wa = ag::constant(normal_tensor({1, 3, 1, 1}, 28));
  const auto wb = ag::constant(normal_tensor({1, 3, 1, 1}, 29));
  for (auto kind : {ag::Affinity::gaussian, ag::Affinity::embedded_gaussian, ag::Affinity::dot_product}) {
    EXPECT_LE(gradient_error(a, projected([&](const ag::Var& v) { return ag::nonlocal_aggregate(v, b, g, kind); },
                                          {2, 4, 2, 2}, 30),
                             1e-2f),
              1e-3)
        << static_cast<int>(kind);
    EXPECT_LE(gradient_error(a, projected([&](const ag::Var& v) { return ag::nonlocal_aggregate(b, v, g, kind); },
                                          {2, 4, 2, 2}, 31),
                             1e-2f),
              1e-3)
        << static_cast<int>(kind);
  }
  // ReLU inside the concatenation affinity: check away from its kink by
  // shifting the inputs so every pairwise argument is positive.
  const auto shifted = [&](const ag::Var& v) {
    return ag::nonlocal_aggregate(ag::add_scalar(v, 3.0f), b, g, ag::Affinity::concatenation,
                                  ag::constant(Tensor({1, 3, 1, 1}, 1.0f)), ag::constant(Tensor({1, 3, 1, 1}, 0.2f)));
  };
  EXPECT_LE(gradient_error(a, projected(shifted, {2, 4, 2, 2}, 32), 1e-2f), 1e-3);
  const auto gv = g.value();
  EXPECT_LE(gradient_error(gv, projected([&](const ag::Var& v) {
                                           return ag::nonlocal_aggregate(ag::constant(a), b, v, ag::Affinity::concatenation,
                                                                         wa, wb);
                                         },
                                         {2, 4, 2, 2}, 33),
                           1e-2f),
            1e-3);
}

TEST(Autograd, SharedInputsAccumulate) {
  auto x = ag::parameter(Tensor({1, 1, 1, 1}, 3.0f));
  ag::backward(ag::add(ag::mul(x, x), x));  // d/dx (x^2 + x) = 2x + 1
  EXPECT_FLOAT_EQ(x.grad().item(), 7.0f);
  auto frozen = ag::constant(Tensor({1, 1, 1, 1}, 2.0f));
  auto y = ag::parameter(Tensor({1, 1, 1, 1}, 5.0f));
  ag::backward(ag::mul(frozen, ag::detach(y)));
  EXPECT_FALSE(y.has_grad());
}

TEST(Resample, GaussianTaps) {
  const auto impulse = gaussian_taps(5, 0.0);
  EXPECT_EQ(impulse, (std::vector<float>{0, 0, 1, 0, 0}));
  const auto taps = gaussian_taps(7, 1.2);
  double sum = 0;
  for (float t : taps) sum += t;
  EXPECT_NEAR(sum, 1.0, 1e-6);
  EXPECT_FLOAT_EQ(taps[0], taps[6]);
  EXPECT_NEAR(taps[4] / taps[3], std::exp(-1.0 / (2 * 1.2 * 1.2)), 1e-6);
  EXPECT_EQ(gaussian_size_for(1.0), 7);
  EXPECT_EQ(gaussian_size_for(0.0), 1);
}

TEST(Resample, BicubicUpsampleWeightsMatchCubicKernel) {
  const auto map = LinearMap1D::resize(8, 16, Interpolation::bicubic);
  for (int o = 4; o < 12; ++o) {
    const double src = (o + 0.5) / 2.0 - 0.5;
    std::vector<double> expected(8, 0.0);
    for (int i = 0; i < 8; ++i) expected[i] = cubic(src - i);
    std::vector<double> got(8, 0.0);
    for (int k = map.row_start[o]; k < map.row_start[o + 1]; ++k) got[map.index[k]] += map.weight[k];
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(got[i], expected[i], 1e-6) << o << " " << i;
  }
}

TEST(Resample, RowsSumToOne) {
  for (auto kind : {Interpolation::bicubic, Interpolation::bilinear}) {
    for (auto [in, out] : {std::pair{16, 8}, {16, 4}, {5, 10}, {7, 3}}) {
      const auto map = LinearMap1D::resize(in, out, kind);
      for (int o = 0; o < out; ++o) {
        double s = 0;
        for (int k = map.row_start[o]; k < map.row_start[o + 1]; ++k) s += map.weight[k];
        EXPECT_NEAR(s, 1.0, 1e-6);
      }
    }
  }
}

TEST(Resample, SeparableAdjointIdentity) {
  // <A x, y> = <x, A^T y>
  const auto rows = LinearMap1D::resize(6, 12, Interpolation::bicubic);
  const auto cols = LinearMap1D::filter(5, std::vector<float>{0.25f, 0.5f, 0.25f}, Padding::circular);
  const Tensor x = normal_tensor({2, 3, 6, 5}, 34);
  const Tensor y = normal_tensor({2, 3, 12, 5}, 35);
  const Tensor ax = apply_separable(x, rows, cols);
  const Tensor aty = apply_separable_adjoint(y, rows, cols);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < ax.size(); ++i) lhs += static_cast<double>(ax[i]) * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += static_cast<double>(x[i]) * aty[i];
  EXPECT_NEAR(lhs, rhs, 1e-4 * std::max(1.0, std::abs(lhs)));
}

TEST(Resample, ComposedMapsMatchSequentialApplication) {
  const auto a = LinearMap1D::resize(16, 8, Interpolation::bicubic);
  const auto b = LinearMap1D::resize(8, 4, Interpolation::bilinear);
  const Tensor x = random_tensor({1, 1, 16, 16}, 36);
  const Tensor two = apply_separable(apply_separable(x, a, a), b, b);
  const Tensor one = apply_separable(x, a.then(b), a.then(b));
  EXPECT_LE(max_abs_diff(one, two), 1e-6);
}
