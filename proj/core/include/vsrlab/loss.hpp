#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsrlab/nn.hpp"

namespace vsrlab::loss {

using ag::Var;

enum class Term {
  mse,
  charbonnier,
  perceptual,
  ssim_loss,  // 1 - ssim
  sobel,
  laplacian,
  ricker,
  pyramid,
  gradient,
  adversarial,
};

std::string_view to_string(Term t);
Term parse_term(std::string_view s);  // ConfigError
const std::vector<Term>& all_terms();

enum class Norm { l1, l2 };
enum class LaplacianKernel { k1, k2 };

struct LossConfig {
  std::map<Term, double> weights;
  double charbonnier_epsilon = 1e-3;
  int pyramid_levels = 3;
  Norm perceptual_norm = Norm::l2;
  LaplacianKernel laplacian_kernel = LaplacianKernel::k1;

  // mse 1, charbonnier 0, perceptual .1, ssim .2, sobel .05, laplacian .05,
  // ricker .02, pyramid .05, gradient .05, adversarial .005.
  static LossConfig defaults();
  // Every weight zero except the listed terms at weight 1.
  static LossConfig only(std::initializer_list<Term> terms);

  [[nodiscard]] double weight(Term t) const;
  void validate() const;  // ConfigError
  [[nodiscard]] nlohmann::json to_json() const;
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

// Fixed 3x3 correlation kernels, stored (1, 1, 3, 3).
namespace kernels {
Tensor laplacian_k1();  // von Neumann: 4-neighbour
Tensor laplacian_k2();  // Moore: 8-neighbour
Tensor sobel_h();       // responds to change along W
Tensor sobel_v();       // responds to change along H
Tensor ricker();
}  // namespace kernels

// Deterministic feature map used by the perceptual term and LPIPS column.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  // (B, 3, H, W) -> (B, C_l, H_l, W_l). Differentiable in the input.
  [[nodiscard]] virtual Var features(const Var& frames) const = 0;
  // True when the weights came from a trained file rather than a seed.
  [[nodiscard]] virtual bool pretrained() const = 0;
};

// Small frozen conv stack: conv3x3+LReLU layers with a 2x average pool after
// every second layer. Seeded weights, or loaded from a checkpoint archive
// whose meta lists "channels".
class ConvFeatureExtractor final : public FeatureExtractor {
 public:
  explicit ConvFeatureExtractor(std::uint64_t seed, std::vector<int> channels = {16, 16, 32});
  static ConvFeatureExtractor load(const std::filesystem::path& file);  // DependencyError
  void save(const std::filesystem::path& file) const;

  [[nodiscard]] Var features(const Var& frames) const override;
  [[nodiscard]] bool pretrained() const override { return pretrained_; }
  [[nodiscard]] nn::ParamList parameters() const;

 private:
  std::vector<int> channels_;
  std::vector<nn::Conv2d> layers_;
  bool pretrained_ = false;
};

// --- terms (scalar Vars) ------------------------------------------------------

Var mse(const Var& y, const Var& y_hat);
Var charbonnier(const Var& y, const Var& y_hat, double epsilon);
Var perceptual(const Var& y, const Var& y_hat, const FeatureExtractor& extractor, Norm norm);
// mse between responses to a fixed kernel, replicate padding.
Var edge_loss(const Var& y, const Var& y_hat, const Tensor& kernel);
Var sobel(const Var& y, const Var& y_hat);
Var laplacian_pyramid(const Var& y, const Var& y_hat, int levels);
Var gradient(const Var& y, const Var& y_hat);
// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), valid region only.
Var ssim(const Var& y, const Var& y_hat);

enum class Side { generator, discriminator };
// BCE on logits. Generator side reads only `fake`.
Var adversarial(const Var& fake, const Var& real, Side side);

// --- pyramid pieces (exposed for reconstruction checks) -------------------------

struct Pyramid {
  std::vector<Tensor> laplacian;  // L_0 .. L_{n-1}
  Tensor residual;                // G_n
};
Pyramid build_pyramid(const Tensor& x, int levels);
Tensor collapse_pyramid(const Pyramid& p);
Tensor pyramid_upsample(const Tensor& x);  // 2x bilinear

// --- metrics --------------------------------------------------------------------

double psnr(const Tensor& y, const Tensor& y_hat, double max_val = 1.0);
// 100 dB cap below mse 1e-10.
double psnr_from_mse(double mse_value, double max_val = 1.0);
double ssim_value(const Tensor& y, const Tensor& y_hat);

// --- aggregation --------------------------------------------------------------

struct LossBundle {
  std::map<Term, double> values;  // unweighted per-term scalars
  double total = 0.0;
  Var total_var;  // differentiable weighted sum; empty when no term ran

  [[nodiscard]] nlohmann::json to_json() const;
};

struct LossInputs {
  const FeatureExtractor* extractor = nullptr;  // needed when perceptual > 0
  std::optional<Var> fake_logits;               // needed when adversarial > 0
  // Restrict evaluation to these terms (still only the positively weighted ones).
  std::optional<std::vector<Term>> subset;
};

LossBundle total_loss(const Var& y, const Var& y_hat, const LossConfig& config, const LossInputs& inputs = {});

}  // namespace vsrlab::loss
