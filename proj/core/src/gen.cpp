#include "vsrlab/gen.hpp"

#include <algorithm>
#include <cmath>

#include "vsrlab/errors.hpp"

namespace vsrlab::gen {
namespace {

template <typename E>
struct Names {
  E value;
  const char* name;
};

constexpr Names<Variant> kVariants[] = {{Variant::rrdb_based, "rrdb_based"},
                                        {Variant::residual_based, "residual_based"}};
constexpr Names<Affinity> kAffinities[] = {{Affinity::gaussian, "gaussian"},
                                           {Affinity::embedded_gaussian, "embedded_gaussian"},
                                           {Affinity::dot_product, "dot_product"},
                                           {Affinity::concatenation, "concatenation"}};
constexpr Names<InputSkip> kSkips[] = {{InputSkip::none, "none"},
                                       {InputSkip::bilinear, "bilinear"},
                                       {InputSkip::bicubic, "bicubic"}};

template <typename E, std::size_t N>
std::string_view name_of(const Names<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "?";
}

template <typename E, std::size_t N>
E parse(const Names<E> (&table)[N], std::string_view s, const char* what) {
  for (const auto& e : table)
    if (s == e.name) return e.value;
  throw ConfigError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr float kTailGain = 0.1f;

}  // namespace

std::string_view to_string(Variant v) { return name_of(kVariants, v); }
std::string_view to_string(Affinity a) { return name_of(kAffinities, a); }
std::string_view to_string(InputSkip s) { return name_of(kSkips, s); }
Variant parse_variant(std::string_view s) { return parse(kVariants, s, "generator variant"); }
Affinity parse_affinity(std::string_view s) { return parse(kAffinities, s, "pairwise function"); }
InputSkip parse_input_skip(std::string_view s) { return parse(kSkips, s, "input skip"); }

GeneratorSpec GeneratorSpec::defaults(Variant variant) {
  GeneratorSpec s;
  s.variant = variant;
  if (variant == Variant::residual_based) {
    s.base_channels = 48;
    s.num_blocks = 6;
    s.nonlocal_positions = {6};
  }
  return s;
}

void GeneratorSpec::validate() const {
  if (base_channels < 2 || base_channels % 2 != 0) {
    throw ConfigError("generator base_channels must be even and >= 2");
  }
  if (num_blocks < 1) throw ConfigError("generator num_blocks must be >= 1");
  std::vector<int> seen;
  for (int p : nonlocal_positions) {
    if (p < 0 || p > num_blocks) {
      throw ConfigError("non-local position " + std::to_string(p) + " outside [0, " +
                        std::to_string(num_blocks) + "]");
    }
    if (std::find(seen.begin(), seen.end(), p) != seen.end()) {
      throw ConfigError("duplicate non-local position " + std::to_string(p));
    }
    seen.push_back(p);
  }
}

nlohmann::json GeneratorSpec::to_json() const {
  return {{"variant", to_string(variant)},
          {"base_channels", base_channels},
          {"num_blocks", num_blocks},
          {"nonlocal_positions", nonlocal_positions},
          {"pairwise", to_string(pairwise)},
          {"input_skip", to_string(input_skip)}};
}

GeneratorSpec GeneratorSpec::from_json(const nlohmann::json& j) {
  try {
    GeneratorSpec s;
    s.variant = parse_variant(j.at("variant").get<std::string>());
    s.base_channels = j.at("base_channels").get<int>();
    s.num_blocks = j.at("num_blocks").get<int>();
    s.nonlocal_positions = j.at("nonlocal_positions").get<std::vector<int>>();
    s.pairwise = parse_affinity(j.at("pairwise").get<std::string>());
    s.input_skip = parse_input_skip(j.value("input_skip", std::string("none")));
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generator spec: ") + e.what());
  }
}

// --- blocks -----------------------------------------------------------------

ResidualBlock ResidualBlock::create(int channels, Rng& rng) {
  ResidualBlock b;
  b.channels = channels;
  const int growth = channels / 2;
  for (int i = 0; i < 5; ++i) b.dense[i] = nn::Conv2d::create(channels + i * growth, growth, 3, rng);
  b.fuse = nn::Conv2d::create(channels + 5 * growth, channels, 1, rng);
  return b;
}

ResidualBlock ResidualBlock::zeros(int channels) {
  ResidualBlock b;
  b.channels = channels;
  const int growth = channels / 2;
  for (int i = 0; i < 5; ++i) b.dense[i] = nn::Conv2d::zeros(channels + i * growth, growth, 3);
  b.fuse = nn::Conv2d::zeros(channels + 5 * growth, channels, 1);
  return b;
}

ag::Var ResidualBlock::operator()(const ag::Var& x) const {
  std::vector<ag::Var> features{x};
  for (const auto& conv : dense) features.push_back(nn::conv_lrelu(ag::concat_channels(features), conv));
  const ag::Var z = nn::conv_lrelu(ag::concat_channels(features), fuse);
  return ag::axpby(z, 1.0f / 3.0f, x, 2.0f / 3.0f);
}

void ResidualBlock::collect(const std::string& prefix, nn::ParamList& out) const {
  for (int i = 0; i < 5; ++i) dense[i].collect(prefix + ".dense" + std::to_string(i), out);
  fuse.collect(prefix + ".fuse", out);
}

Rrdb Rrdb::create(int channels, Rng& rng) {
  Rrdb r;
  for (auto& s : r.stages) s = ResidualBlock::create(channels, rng);
  return r;
}

Rrdb Rrdb::zeros(int channels) {
  Rrdb r;
  for (auto& s : r.stages) s = ResidualBlock::zeros(channels);
  return r;
}

ag::Var Rrdb::operator()(const ag::Var& x) const {
  return ag::add(stages[2](stages[1](stages[0](x))), x);
}

void Rrdb::collect(const std::string& prefix, nn::ParamList& out) const {
  for (int i = 0; i < 3; ++i) stages[i].collect(prefix + ".res" + std::to_string(i), out);
}

NonLocalBlock NonLocalBlock::create(const NonLocalSpec& spec, Rng& rng) {
  if (spec.channels < 1) throw ConfigError("non-local block needs channels >= 1");
  NonLocalBlock b;
  b.spec = spec;
  const int d = spec.inner();
  if (spec.pairwise != Affinity::gaussian) {
    b.theta = nn::Conv2d::create(spec.channels, d, 1, rng);
    b.phi = nn::Conv2d::create(spec.channels, d, 1, rng);
  }
  if (spec.pairwise == Affinity::concatenation) {
    Tensor wa({1, d, 1, 1}), wb({1, d, 1, 1});
    const double std = 1.0 / std::sqrt(2.0 * d);
    for (auto& v : wa.values()) v = static_cast<float>(std * normal(rng));
    for (auto& v : wb.values()) v = static_cast<float>(std * normal(rng));
    b.w_theta = ag::parameter(std::move(wa));
    b.w_phi = ag::parameter(std::move(wb));
  }
  b.g = nn::Conv2d::create(spec.channels, d, 1, rng);
  b.out = nn::Conv2d::zeros(d, spec.channels, 1);
  return b;
}

ag::Var NonLocalBlock::operator()(const ag::Var& x) const {
  if (x.shape().c != spec.channels) {
    throw ShapeError("non-local block expects " + std::to_string(spec.channels) + " channels, got " +
                     std::to_string(x.shape().c));
  }
  ag::Var y;
  if (spec.pairwise == Affinity::gaussian) {
    y = ag::nonlocal_aggregate(x, x, g(x), spec.pairwise);
  } else {
    y = ag::nonlocal_aggregate(theta(x), phi(x), g(x), spec.pairwise, w_theta, w_phi);
  }
  return ag::add(out(y), x);
}

void NonLocalBlock::collect(const std::string& prefix, nn::ParamList& out_params) const {
  if (spec.pairwise != Affinity::gaussian) {
    theta.collect(prefix + ".theta", out_params);
    phi.collect(prefix + ".phi", out_params);
  }
  g.collect(prefix + ".g", out_params);
  out.collect(prefix + ".out", out_params);
  if (spec.pairwise == Affinity::concatenation) {
    out_params.push_back({prefix + ".w_theta", w_theta});
    out_params.push_back({prefix + ".w_phi", w_phi});
  }
}

Upsampler Upsampler::create(int channels, Rng& rng) {
  return Upsampler{nn::Conv2d::create(channels, 4 * channels, 3, rng)};
}

ag::Var Upsampler::operator()(const ag::Var& x) const {
  return nn::lrelu(ag::pixel_shuffle(expand(x), 2));
}

void Upsampler::collect(const std::string& prefix, nn::ParamList& out) const {
  expand.collect(prefix + ".expand", out);
}

// --- generator --------------------------------------------------------------

Generator::Generator(GeneratorSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  Rng rng(seed);
  const int c = spec_.base_channels;
  head_ = nn::Conv2d::create(3, c, 3, rng);
  nonlocal_.resize(static_cast<std::size_t>(spec_.num_blocks) + 1);
  auto make_nonlocal = [&](int pos) {
    if (std::find(spec_.nonlocal_positions.begin(), spec_.nonlocal_positions.end(), pos) !=
        spec_.nonlocal_positions.end()) {
      nonlocal_[pos] = NonLocalBlock::create({c, 0, spec_.pairwise}, rng);
    }
  };
  make_nonlocal(0);
  for (int i = 1; i <= spec_.num_blocks; ++i) {
    if (spec_.variant == Variant::rrdb_based) {
      rrdbs_.push_back(Rrdb::create(c, rng));
    } else {
      blocks_.push_back(ResidualBlock::create(c, rng));
    }
    make_nonlocal(i);
  }
  recon_ = nn::Conv2d::create(c, c, 3, rng);
  up_ = Upsampler::create(c, rng);
  tail_ = nn::Conv2d::create(c, 3, 3, rng, kTailGain);
  if (spec_.input_skip == InputSkip::none) tail_.bias.mutable_value().fill(0.5f);
}

ag::Var Generator::forward(const ag::Var& x) const {
  if (x.shape().c != 3) throw ShapeError("generator expects 3-channel frames, got " + x.shape().str());
  ag::Var h = nn::conv_lrelu(x, head_);
  if (nonlocal_[0]) h = (*nonlocal_[0])(h);
  for (int i = 1; i <= spec_.num_blocks; ++i) {
    h = spec_.variant == Variant::rrdb_based ? rrdbs_[i - 1](h) : blocks_[i - 1](h);
    if (nonlocal_[i]) h = (*nonlocal_[i])(h);
  }
  h = nn::conv_lrelu(h, recon_);
  ag::Var y = tail_(up_(h));
  if (spec_.input_skip != InputSkip::none) {
    const auto kind = spec_.input_skip == InputSkip::bicubic ? Interpolation::bicubic : Interpolation::bilinear;
    const int hh = x.shape().h, ww = x.shape().w;
    const ag::Var base = ag::separable(ag::detach(x), LinearMap1D::resize(hh, 2 * hh, kind),
                                       LinearMap1D::resize(ww, 2 * ww, kind));
    y = ag::add(y, base);
  }
  return ag::clamp(y, 0.0f, 1.0f);
}

seq::FrameSequence Generator::upscale(const seq::FrameSequence& lr) const {
  return seq::FrameSequence::clamped(forward(ag::constant(lr.tensor())).value(), lr.frame_rate_hint());
}

seq::FrameSequence Generator::upscale(const seq::FrameSequence& lr, int scale) const {
  if (scale < 2 || (scale & (scale - 1)) != 0) {
    throw ConfigError("upscale factor must be a power of two >= 2, got " + std::to_string(scale));
  }
  seq::FrameSequence cur = lr;
  for (int s = 1; s < scale; s *= 2) cur = upscale(cur);
  return cur;
}

nn::ParamList Generator::parameters() const {
  nn::ParamList out;
  head_.collect("head", out);
  auto nl = [&](int pos) {
    if (nonlocal_[pos]) nonlocal_[pos]->collect("nonlocal" + std::to_string(pos), out);
  };
  nl(0);
  for (int i = 1; i <= spec_.num_blocks; ++i) {
    const std::string prefix = "block" + std::to_string(i);
    if (spec_.variant == Variant::rrdb_based) {
      rrdbs_[i - 1].collect(prefix, out);
    } else {
      blocks_[i - 1].collect(prefix, out);
    }
    nl(i);
  }
  recon_.collect("recon", out);
  up_.collect("up", out);
  tail_.collect("tail", out);
  return out;
}

std::size_t Generator::parameter_count() const { return nn::count_parameters(parameters()); }

}  // namespace vsrlab::gen
