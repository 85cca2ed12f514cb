#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "vsrlab/errors.hpp"
#include "vsrlab/loss.hpp"

using namespace vsrlab;
using testkit::random_tensor;
using ag::constant;

namespace {

double scalar(const ag::Var& v) { return v.value().item(); }

Tensor ramp(int h, int w, double step, bool horizontal) {
  Tensor t({1, 1, h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) t.at(0, 0, i, j) = static_cast<float>(step * (horizontal ? j : i));
  return t;
}

Tensor kernel_response(const Tensor& x, const Tensor& k) {
  return ag::kernel2d(constant(x), k, Padding::replicate).value();
}

void expect_interior(const Tensor& t, double expected, double tol) {
  for (int n = 0; n < t.n(); ++n)
    for (int c = 0; c < t.c(); ++c)
      for (int i = 1; i + 1 < t.h(); ++i)
        for (int j = 1; j + 1 < t.w(); ++j) EXPECT_NEAR(t.at(n, c, i, j), expected, tol);
}

}  // namespace

TEST(Mse, Examples) {
  const Tensor y = random_tensor({2, 3, 8, 8}, 1);
  EXPECT_EQ(scalar(loss::mse(constant(y), constant(y))), 0.0);
  Tensor shifted = y;
  for (float& v : shifted.values()) v -= 0.1f;
  EXPECT_NEAR(scalar(loss::mse(constant(y), constant(shifted))), 0.01, 1e-7);

  const Tensor z = random_tensor({2, 3, 8, 8}, 2);
  double acc = 0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += (double(y[i]) - z[i]) * (double(y[i]) - z[i]);
  EXPECT_NEAR(scalar(loss::mse(constant(y), constant(z))), acc / y.size(), 1e-7);
  EXPECT_THROW(loss::mse(constant(y), constant(Tensor({2, 3, 8, 4}))), ShapeError);
}

TEST(Mse, Symmetric) {
  const Tensor a = random_tensor({1, 3, 6, 6}, 3), b = random_tensor({1, 3, 6, 6}, 4);
  EXPECT_EQ(scalar(loss::mse(constant(a), constant(b))), scalar(loss::mse(constant(b), constant(a))));
}

TEST(Charbonnier, FloorLimitAndSmoothOrigin) {
  const Tensor y = random_tensor({1, 3, 4, 4}, 5);
  EXPECT_NEAR(scalar(loss::charbonnier(constant(y), constant(y), 1e-3)), 1e-3, 1e-9);
  const Tensor a({1, 1, 1, 1}, 3.0f), b({1, 1, 1, 1}, 0.0f);
  EXPECT_NEAR(scalar(loss::charbonnier(constant(a), constant(b), 1e-6)), 3.0, 1e-6);

  auto yh = ag::parameter(y);
  ag::backward(loss::charbonnier(constant(y), yh, 1e-3));
  EXPECT_EQ(yh.grad().max_abs(), 0.0f);
  EXPECT_THROW(loss::charbonnier(constant(y), constant(y), 0.0), ConfigError);
}

TEST(Perceptual, Examples) {
  const loss::ConvFeatureExtractor ex(9);
  const Tensor y = random_tensor({2, 3, 8, 8}, 6), z = random_tensor({2, 3, 8, 8}, 7);
  EXPECT_EQ(scalar(loss::perceptual(constant(y), constant(y), ex, loss::Norm::l2)), 0.0);
  const double a = scalar(loss::perceptual(constant(y), constant(z), ex, loss::Norm::l2));
  const loss::ConvFeatureExtractor ex2(9);
  EXPECT_EQ(a, scalar(loss::perceptual(constant(y), constant(z), ex2, loss::Norm::l2)));
  const double feature_mse = scalar(loss::mse(ex.features(constant(y)), ex.features(constant(z))));
  EXPECT_NEAR(a, feature_mse, 1e-6);
  EXPECT_FALSE(ex.pretrained());
}

TEST(EdgeKernels, Facts) {
  for (const auto& k : {loss::kernels::laplacian_k1(), loss::kernels::laplacian_k2()}) {
    EXPECT_EQ(k.sum(), 0.0);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_EQ(k.at(0, 0, i, j), k.at(0, 0, j, i));
  }
  const Tensor kh = loss::kernels::sobel_h(), kv = loss::kernels::sobel_v();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(kv.at(0, 0, i, j), kh.at(0, 0, j, i));
  const Tensor r = loss::kernels::ricker();
  EXPECT_FLOAT_EQ(r.at(0, 0, 1, 1), 3.4786f);
  EXPECT_FLOAT_EQ(r.at(0, 0, 0, 1), -0.4349f);
  EXPECT_FLOAT_EQ(r.at(0, 0, 0, 0), -0.2941f);
}

TEST(EdgeKernels, SobelRampResponses) {
  const double d = 0.05;
  const Tensor hr = ramp(6, 7, d, true), vr = ramp(6, 7, d, false);
  expect_interior(kernel_response(hr, loss::kernels::sobel_h()), 8 * d, 1e-6);
  expect_interior(kernel_response(hr, loss::kernels::sobel_v()), 0.0, 1e-6);
  expect_interior(kernel_response(vr, loss::kernels::sobel_v()), 8 * d, 1e-6);
  expect_interior(kernel_response(vr, loss::kernels::sobel_h()), 0.0, 1e-6);
}

TEST(EdgeLoss, ConstantsAndRicker) {
  const Tensor a({1, 3, 6, 6}, 0.2f), b({1, 3, 6, 6}, 0.7f);
  EXPECT_EQ(scalar(loss::edge_loss(constant(a), constant(b), loss::kernels::laplacian_k1())), 0.0);
  EXPECT_EQ(scalar(loss::edge_loss(constant(a), constant(b), loss::kernels::laplacian_k2())), 0.0);
  const Tensor r = loss::kernels::ricker();
  double s = 0;
  for (float v : r.values()) s += v;
  EXPECT_NEAR(s, 0.5626, 1e-4);
  expect_interior(kernel_response(b, r), s * 0.7, 1e-5);
  const Tensor y = random_tensor({1, 3, 6, 6}, 8);
  EXPECT_EQ(scalar(loss::edge_loss(constant(y), constant(y), r)), 0.0);
  EXPECT_EQ(scalar(loss::sobel(constant(y), constant(y))), 0.0);
}

TEST(Pyramid, ConstantsReconstructionAndErrors) {
  const Tensor c({1, 3, 16, 16}, 0.4f);
  const auto pc = loss::build_pyramid(c, 3);
  ASSERT_EQ(pc.laplacian.size(), 3u);
  for (const auto& l : pc.laplacian) EXPECT_LE(l.max_abs(), 1e-6);
  EXPECT_EQ(pc.residual.shape(), (Shape{1, 3, 2, 2}));

  const Tensor x = random_tensor({2, 3, 16, 16}, 9);
  EXPECT_LE(max_abs_diff(loss::collapse_pyramid(loss::build_pyramid(x, 3)), x), 1e-5);
  // Manual rebuild, independent of collapse_pyramid.
  const auto p = loss::build_pyramid(x, 2);
  Tensor g = p.residual;
  for (int i = 1; i >= 0; --i) {
    Tensor up = loss::pyramid_upsample(g);
    for (std::size_t k = 0; k < up.size(); ++k) up[k] += p.laplacian[static_cast<std::size_t>(i)][k];
    g = up;
  }
  EXPECT_LE(max_abs_diff(g, x), 1e-5);

  EXPECT_EQ(scalar(loss::laplacian_pyramid(constant(x), constant(x), 3)), 0.0);
  EXPECT_THROW(loss::laplacian_pyramid(constant(Tensor({1, 3, 12, 12})), constant(Tensor({1, 3, 12, 12})), 3),
               ShapeError);
}

TEST(GradientLoss, Examples) {
  const Tensor a({1, 1, 5, 5}, 0.1f), b({1, 1, 5, 5}, 0.9f);
  EXPECT_EQ(scalar(loss::gradient(constant(a), constant(b))), 0.0);
  const double d = 0.1;
  const Tensor r = ramp(5, 5, d, true);
  // Every W-direction difference is d; every H-direction difference is 0.
  EXPECT_NEAR(scalar(loss::gradient(constant(r), constant(a))), d * d, 1e-7);
  EXPECT_NEAR(scalar(loss::gradient(constant(ramp(5, 5, d, false)), constant(a))), d * d, 1e-7);
}

TEST(Ssim, Examples) {
  const Tensor y = random_tensor({2, 3, 16, 16}, 10), z = random_tensor({2, 3, 16, 16}, 11);
  EXPECT_NEAR(scalar(loss::ssim(constant(y), constant(y))), 1.0, 1e-6);
  EXPECT_NEAR(scalar(loss::ssim(constant(y), constant(z))), scalar(loss::ssim(constant(z), constant(y))), 1e-7);
  const Tensor zero({1, 3, 16, 16}, 0.0f), one({1, 3, 16, 16}, 1.0f);
  const double c1 = 0.01 * 0.01;
  const double closed = c1 / (1.0 + c1);  // luminance term; structure term is 1 for constants
  const double v = scalar(loss::ssim(constant(zero), constant(one)));
  EXPECT_LT(v, 0.01);
  EXPECT_NEAR(v, closed, 1e-6);
  EXPECT_NEAR(loss::ssim_value(y, y), 1.0, 1e-6);
  EXPECT_THROW(loss::ssim(constant(Tensor({1, 3, 8, 8})), constant(Tensor({1, 3, 8, 8}))), ShapeError);
}

TEST(Psnr, Examples) {
  EXPECT_DOUBLE_EQ(loss::psnr_from_mse(0.01), 20.0);
  EXPECT_DOUBLE_EQ(loss::psnr_from_mse(1.0), 0.0);
  const Tensor y = random_tensor({1, 3, 4, 4}, 12);
  EXPECT_EQ(loss::psnr(y, y), 100.0);
  Tensor z = y;
  for (float& v : z.values()) v += 0.1f;
  EXPECT_NEAR(loss::psnr(y, z), 20.0, 1e-4);
  EXPECT_THROW((void)loss::psnr(y, Tensor({1, 3, 4, 5})), ShapeError);
}

TEST(Adversarial, Examples) {
  const Tensor zero({2, 1, 4, 4}, 0.0f);
  const double ln2 = std::log(2.0);
  EXPECT_NEAR(scalar(loss::adversarial(constant(zero), constant(zero), loss::Side::generator)), ln2, 1e-6);
  EXPECT_NEAR(scalar(loss::adversarial(constant(zero), constant(zero), loss::Side::discriminator)), 2 * ln2, 1e-6);
  double prev = 1e9;
  for (float l : {-3.0f, -1.0f, 0.0f, 1.0f, 3.0f}) {
    const double v = scalar(loss::adversarial(constant(Tensor({1, 1, 2, 2}, l)), constant(zero), loss::Side::generator));
    EXPECT_LT(v, prev);
    prev = v;
  }
  const double sep = scalar(loss::adversarial(constant(Tensor({1, 1, 2, 2}, -40.0f)),
                                              constant(Tensor({1, 1, 2, 2}, 40.0f)), loss::Side::discriminator));
  EXPECT_LT(sep, 1e-12);
}

TEST(TotalLoss, Examples) {
  const Tensor y = random_tensor({1, 3, 16, 16}, 13), z = random_tensor({1, 3, 16, 16}, 14);
  auto only_mse = loss::LossConfig::only({loss::Term::mse});
  const auto b = loss::total_loss(constant(y), constant(z), only_mse);
  EXPECT_DOUBLE_EQ(b.total, b.values.at(loss::Term::mse));
  EXPECT_EQ(b.values.size(), 1u);
  EXPECT_NEAR(b.total, scalar(loss::mse(constant(y), constant(z))), 1e-7);

  const auto cb = loss::total_loss(constant(y), constant(z), loss::LossConfig::only({loss::Term::charbonnier}));
  EXPECT_NEAR(cb.total, scalar(loss::charbonnier(constant(y), constant(z), 1e-3)), 1e-7);

  auto cfg = loss::LossConfig::defaults();
  cfg.weights[loss::Term::adversarial] = 0.0;
  cfg.weights[loss::Term::charbonnier] = 0.5;
  const loss::ConvFeatureExtractor ex(1);
  loss::LossInputs in;
  in.extractor = &ex;
  const auto floor = loss::total_loss(constant(y), constant(y), cfg, in);
  EXPECT_NEAR(floor.total, 0.5 * 1e-3, 1e-7);

  const auto full = loss::total_loss(constant(y), constant(z), cfg, in);
  double weighted = 0;
  for (const auto& [t, v] : full.values) weighted += cfg.weight(t) * v;
  EXPECT_NEAR(full.total, weighted, 1e-6);
  EXPECT_NEAR(full.total_var.value().item(), full.total, 1e-5);
}

TEST(LossConfig, Validation) {
  auto cfg = loss::LossConfig::only({});
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = loss::LossConfig::defaults();
  cfg.weights[loss::Term::mse] = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = loss::LossConfig::defaults();
  cfg.charbonnier_epsilon = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  for (auto t : loss::all_terms()) EXPECT_EQ(loss::parse_term(loss::to_string(t)), t);
  EXPECT_THROW(loss::parse_term("tv"), ConfigError);
  EXPECT_DOUBLE_EQ(loss::LossConfig::defaults().weight(loss::Term::ricker), 0.02);
}
