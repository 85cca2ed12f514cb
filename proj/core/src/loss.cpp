#include "vsrlab/loss.hpp"

#include <algorithm>
#include <cmath>

#include "vsrlab/checkpoint.hpp"
#include "vsrlab/errors.hpp"

namespace vsrlab::loss {
namespace {

struct TermName {
  Term term;
  const char* name;
};

constexpr TermName kTermNames[] = {
    {Term::mse, "mse"},         {Term::charbonnier, "charbonnier"}, {Term::perceptual, "perceptual"},
    {Term::ssim_loss, "ssim_loss"}, {Term::sobel, "sobel"},       {Term::laplacian, "laplacian"},
    {Term::ricker, "ricker"},   {Term::pyramid, "pyramid"},         {Term::gradient, "gradient"},
    {Term::adversarial, "adversarial"},
};

void check_same(const Var& y, const Var& y_hat, const char* what) {
  if (y.shape() != y_hat.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + y.shape().str() + " vs " +
                     y_hat.shape().str());
  }
}

Tensor kernel3(std::initializer_list<float> v) { return Tensor({1, 1, 3, 3}, std::vector<float>(v)); }

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr float kSsimC1 = 0.01f * 0.01f;
constexpr float kSsimC2 = 0.03f * 0.03f;

const std::vector<float>& ssim_taps() {
  static const std::vector<float> taps = gaussian_taps(kSsimWindow, kSsimSigma);
  return taps;
}

const std::vector<float>& binomial5() {
  static const std::vector<float> taps = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};
  return taps;
}

LinearMap1D reduce_map(int n) {
  return LinearMap1D::filter(n, binomial5(), Padding::replicate).then(LinearMap1D::decimate(n, 2));
}

LinearMap1D expand_map(int n) { return LinearMap1D::resize(n, 2 * n, Interpolation::bilinear); }

void check_pyramid(const Shape& s, int levels) {
  if (levels < 1) throw ConfigError("pyramid needs at least one level");
  const int div = 1 << levels;
  if (s.h % div != 0 || s.w % div != 0) {
    throw ShapeError("pyramid with " + std::to_string(levels) + " levels needs H, W divisible by " +
                     std::to_string(div) + ", got " + s.str());
  }
}

}  // namespace

std::string_view to_string(Term t) {
  for (const auto& e : kTermNames)
    if (e.term == t) return e.name;
  return "?";
}

Term parse_term(std::string_view s) {
  for (const auto& e : kTermNames)
    if (s == e.name) return e.term;
  throw ConfigError("unknown loss term '" + std::string(s) + "'");
}

const std::vector<Term>& all_terms() {
  static const std::vector<Term> terms = [] {
    std::vector<Term> t;
    for (const auto& e : kTermNames) t.push_back(e.term);
    return t;
  }();
  return terms;
}

// --- config ---------------------------------------------------------------------

LossConfig LossConfig::defaults() {
  LossConfig c;
  c.weights = {{Term::mse, 1.0},      {Term::charbonnier, 0.0}, {Term::perceptual, 0.1},
               {Term::ssim_loss, 0.2}, {Term::sobel, 0.05},      {Term::laplacian, 0.05},
               {Term::ricker, 0.02},   {Term::pyramid, 0.05},    {Term::gradient, 0.05},
               {Term::adversarial, 0.005}};
  return c;
}

LossConfig LossConfig::only(std::initializer_list<Term> terms) {
  LossConfig c;
  for (Term t : all_terms()) c.weights[t] = 0.0;
  for (Term t : terms) c.weights[t] = 1.0;
  return c;
}

double LossConfig::weight(Term t) const {
  auto it = weights.find(t);
  return it == weights.end() ? 0.0 : it->second;
}

void LossConfig::validate() const {
  bool any = false;
  for (const auto& [t, w] : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("loss weight for " + std::string(to_string(t)) + " must be finite and >= 0");
    }
    any = any || w > 0.0;
  }
  if (!any) throw ConfigError("loss config needs at least one positive weight");
  if (!(charbonnier_epsilon > 0.0)) throw ConfigError("charbonnier epsilon must be > 0");
  if (pyramid_levels < 1) throw ConfigError("pyramid_levels must be >= 1");
}

nlohmann::json LossConfig::to_json() const {
  nlohmann::json w = nlohmann::json::object();
  for (Term t : all_terms()) w[std::string(to_string(t))] = weight(t);
  return {{"weights", w},
          {"charbonnier_epsilon", charbonnier_epsilon},
          {"pyramid_levels", pyramid_levels},
          {"perceptual_norm", perceptual_norm == Norm::l1 ? "l1" : "l2"},
          {"laplacian_kernel", laplacian_kernel == LaplacianKernel::k1 ? "k1" : "k2"}};
}

// --- kernels ----------------------------------------------------------------------

namespace kernels {
Tensor laplacian_k1() { return kernel3({0, 1, 0, 1, -4, 1, 0, 1, 0}); }
Tensor laplacian_k2() { return kernel3({1, 1, 1, 1, -8, 1, 1, 1, 1}); }
Tensor sobel_h() { return kernel3({-1, 0, 1, -2, 0, 2, -1, 0, 1}); }
Tensor sobel_v() { return kernel3({-1, -2, -1, 0, 0, 0, 1, 2, 1}); }
Tensor ricker() {
  const float c = 3.4786f, e = -0.4349f, k = -0.2941f;
  return kernel3({k, e, k, e, c, e, k, e, k});
}
}  // namespace kernels

// --- feature extractor --------------------------------------------------------------

ConvFeatureExtractor::ConvFeatureExtractor(std::uint64_t seed, std::vector<int> channels)
    : channels_(std::move(channels)) {
  if (channels_.empty()) throw ConfigError("feature extractor needs at least one layer");
  Rng rng(seed);
  int in = 3;
  for (int c : channels_) {
    layers_.push_back(nn::Conv2d::create(in, c, 3, rng));
    in = c;
  }
  nn::set_trainable(parameters(), false);
}

ConvFeatureExtractor ConvFeatureExtractor::load(const std::filesystem::path& file) {
  try {
    const auto archive = ckpt::load(file);
    auto channels = archive.meta.at("channels").get<std::vector<int>>();
    ConvFeatureExtractor fx(0, channels);
    ckpt::restore(archive, fx.parameters());
    fx.pretrained_ = true;
    return fx;
  } catch (const Error& e) {
    throw DependencyError("cannot load feature extractor " + file.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw DependencyError("cannot load feature extractor " + file.string() + ": " + e.what());
  }
}

void ConvFeatureExtractor::save(const std::filesystem::path& file) const {
  ckpt::Archive a;
  a.meta = {{"kind", "conv_feature_extractor"}, {"channels", channels_}};
  ckpt::append(a, parameters());
  ckpt::save(file, a);
}

Var ConvFeatureExtractor::features(const Var& frames) const {
  if (frames.shape().c != 3) throw DependencyError("feature extractor expects 3-channel frames");
  Var h = frames;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = nn::conv_lrelu(h, layers_[i]);
    const Shape s = h.shape();
    if (i % 2 == 1 && i + 1 < layers_.size() && s.h % 2 == 0 && s.w % 2 == 0) {
      h = ag::separable(h, LinearMap1D::box_down(s.h, 2), LinearMap1D::box_down(s.w, 2));
    }
  }
  return h;
}

nn::ParamList ConvFeatureExtractor::parameters() const {
  nn::ParamList out;
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect("layer" + std::to_string(i), out);
  return out;
}

// --- terms ----------------------------------------------------------------------------

Var mse(const Var& y, const Var& y_hat) {
  check_same(y, y_hat, "mse");
  return ag::mean(ag::square(ag::sub(y, y_hat)));
}

Var charbonnier(const Var& y, const Var& y_hat, double epsilon) {
  check_same(y, y_hat, "charbonnier");
  if (!(epsilon > 0.0)) throw ConfigError("charbonnier epsilon must be > 0");
  const auto eps2 = static_cast<float>(epsilon * epsilon);
  return ag::mean(ag::sqrt(ag::add_scalar(ag::square(ag::sub(y, y_hat)), eps2)));
}

Var perceptual(const Var& y, const Var& y_hat, const FeatureExtractor& extractor, Norm norm) {
  check_same(y, y_hat, "perceptual");
  const Var d = ag::sub(extractor.features(y), extractor.features(y_hat));
  return ag::mean(norm == Norm::l2 ? ag::square(d) : ag::abs(d));
}

Var edge_loss(const Var& y, const Var& y_hat, const Tensor& kernel) {
  check_same(y, y_hat, "edge loss");
  return ag::mean(ag::square(ag::kernel2d(ag::sub(y, y_hat), kernel, Padding::replicate)));
}

Var sobel(const Var& y, const Var& y_hat) {
  return ag::add(edge_loss(y, y_hat, kernels::sobel_h()), edge_loss(y, y_hat, kernels::sobel_v()));
}

Var laplacian_pyramid(const Var& y, const Var& y_hat, int levels) {
  check_same(y, y_hat, "pyramid");
  check_pyramid(y.shape(), levels);
  // Every pyramid stage is linear, so the level differences are the levels of
  // the difference image.
  Var g = ag::sub(y, y_hat);
  Var total;
  for (int l = 0; l < levels; ++l) {
    const Shape s = g.shape();
    const Var next = ag::separable(g, reduce_map(s.h), reduce_map(s.w));
    const Var lap = ag::sub(g, ag::separable(next, expand_map(s.h / 2), expand_map(s.w / 2)));
    const Var term = ag::mean(ag::square(lap));
    total = total ? ag::add(total, term) : term;
    g = next;
  }
  return ag::add(total, ag::mean(ag::square(g)));
}

Var gradient(const Var& y, const Var& y_hat) {
  check_same(y, y_hat, "gradient");
  const Var d = ag::sub(y, y_hat);
  return ag::add(ag::mean(ag::square(ag::forward_diff(d, 3))), ag::mean(ag::square(ag::forward_diff(d, 2))));
}

Var ssim(const Var& y, const Var& y_hat) {
  check_same(y, y_hat, "ssim");
  const Shape s = y.shape();
  if (s.h < kSsimWindow || s.w < kSsimWindow) {
    throw ShapeError("ssim needs frames of at least 11x11, got " + s.str());
  }
  const LinearMap1D rows = LinearMap1D::filter(s.h, ssim_taps(), Padding::valid);
  const LinearMap1D cols = LinearMap1D::filter(s.w, ssim_taps(), Padding::valid);
  auto blur = [&](const Var& v) { return ag::separable(v, rows, cols); };

  const Var mx = blur(y), my = blur(y_hat);
  const Var mxx = ag::square(mx), myy = ag::square(my), mxy = ag::mul(mx, my);
  const Var sxx = ag::sub(blur(ag::square(y)), mxx);
  const Var syy = ag::sub(blur(ag::square(y_hat)), myy);
  const Var sxy = ag::sub(blur(ag::mul(y, y_hat)), mxy);

  const Var num = ag::mul(ag::add_scalar(ag::scale(mxy, 2.0f), kSsimC1), ag::add_scalar(ag::scale(sxy, 2.0f), kSsimC2));
  const Var den = ag::mul(ag::add_scalar(ag::add(mxx, myy), kSsimC1), ag::add_scalar(ag::add(sxx, syy), kSsimC2));
  return ag::mean(ag::div(num, den));
}

Var adversarial(const Var& fake, const Var& real, Side side) {
  // BCE(l, 1) = softplus(-l); BCE(l, 0) = softplus(l).
  if (side == Side::generator) return ag::mean(ag::softplus(ag::scale(fake, -1.0f)));
  return ag::add(ag::mean(ag::softplus(ag::scale(real, -1.0f))), ag::mean(ag::softplus(fake)));
}

// --- pyramid pieces -----------------------------------------------------------------------

Tensor pyramid_upsample(const Tensor& x) { return apply_separable(x, expand_map(x.h()), expand_map(x.w())); }

Pyramid build_pyramid(const Tensor& x, int levels) {
  check_pyramid(x.shape(), levels);
  Pyramid p;
  Tensor g = x;
  for (int l = 0; l < levels; ++l) {
    Tensor next = apply_separable(g, reduce_map(g.h()), reduce_map(g.w()));
    Tensor lap = g;
    const Tensor up = pyramid_upsample(next);
    for (std::size_t i = 0; i < lap.size(); ++i) lap[i] -= up[i];
    p.laplacian.push_back(std::move(lap));
    g = std::move(next);
  }
  p.residual = std::move(g);
  return p;
}

Tensor collapse_pyramid(const Pyramid& p) {
  Tensor g = p.residual;
  for (auto it = p.laplacian.rbegin(); it != p.laplacian.rend(); ++it) {
    Tensor up = pyramid_upsample(g);
    up += *it;
    g = std::move(up);
  }
  return g;
}

// --- metrics -----------------------------------------------------------------------------

double psnr(const Tensor& y, const Tensor& y_hat, double max_val) {
  if (y.shape() != y_hat.shape()) {
    throw ShapeError("psnr: shape mismatch " + y.shape().str() + " vs " + y_hat.shape().str());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = static_cast<double>(y[i]) - y_hat[i];
    acc += d * d;
  }
  return psnr_from_mse(acc / static_cast<double>(y.size()), max_val);
}

double psnr_from_mse(double mse_value, double max_val) {
  if (mse_value < 1e-10) return 100.0;
  return 10.0 * std::log10(max_val * max_val / mse_value);
}

double ssim_value(const Tensor& y, const Tensor& y_hat) {
  return ssim(ag::constant(y), ag::constant(y_hat)).value().item();
}

// --- aggregation ----------------------------------------------------------------------------

nlohmann::json LossBundle::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [t, v] : values) j[std::string(to_string(t))] = v;
  j["total"] = total;
  return j;
}

LossBundle total_loss(const Var& y, const Var& y_hat, const LossConfig& config, const LossInputs& inputs) {
  config.validate();
  LossBundle bundle;
  for (Term t : all_terms()) {
    const double w = config.weight(t);
    if (w <= 0.0) continue;
    if (inputs.subset && std::find(inputs.subset->begin(), inputs.subset->end(), t) == inputs.subset->end()) {
      continue;
    }
    Var v;
    switch (t) {
      case Term::mse: v = mse(y, y_hat); break;
      case Term::charbonnier: v = charbonnier(y, y_hat, config.charbonnier_epsilon); break;
      case Term::perceptual:
        if (!inputs.extractor) throw DependencyError("perceptual loss needs a feature extractor");
        v = perceptual(y, y_hat, *inputs.extractor, config.perceptual_norm);
        break;
      case Term::ssim_loss: v = ag::add_scalar(ag::scale(ssim(y, y_hat), -1.0f), 1.0f); break;
      case Term::sobel: v = sobel(y, y_hat); break;
      case Term::laplacian:
        v = edge_loss(y, y_hat,
                      config.laplacian_kernel == LaplacianKernel::k1 ? kernels::laplacian_k1() : kernels::laplacian_k2());
        break;
      case Term::ricker: v = edge_loss(y, y_hat, kernels::ricker()); break;
      case Term::pyramid: v = laplacian_pyramid(y, y_hat, config.pyramid_levels); break;
      case Term::gradient: v = gradient(y, y_hat); break;
      case Term::adversarial:
        if (!inputs.fake_logits) throw ConfigError("adversarial loss needs discriminator logits");
        v = adversarial(*inputs.fake_logits, Var{}, Side::generator);
        break;
    }
    const double value = v.value().item();
    if (!std::isfinite(value)) throw RangeError("loss term " + std::string(to_string(t)) + " is not finite");
    bundle.values[t] = value;
    bundle.total += w * value;
    const Var weighted = ag::scale(v, static_cast<float>(w));
    bundle.total_var = bundle.total_var ? ag::add(bundle.total_var, weighted) : weighted;
  }
  return bundle;
}

}  // namespace vsrlab::loss
