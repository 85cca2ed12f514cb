#include "vsrlab/disc.hpp"

#include "vsrlab/errors.hpp"

namespace vsrlab::disc {

void DiscriminatorSpec::validate() const {
  if (base_channels < 1) throw ConfigError("discriminator base_channels must be >= 1");
  if (depth < 1 || depth > 8) throw ConfigError("discriminator depth must be in [1, 8]");
}

nlohmann::json DiscriminatorSpec::to_json() const {
  return {{"base_channels", base_channels}, {"depth", depth}};
}

DiscriminatorSpec DiscriminatorSpec::from_json(const nlohmann::json& j) {
  try {
    DiscriminatorSpec s{j.at("base_channels").get<int>(), j.at("depth").get<int>()};
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("discriminator spec: ") + e.what());
  }
}

Discriminator::Discriminator(DiscriminatorSpec spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  Rng rng(seed);
  int in = 3;
  for (int l = 0; l < spec_.depth; ++l) {
    const int c = spec_.base_channels << l;
    down_.push_back({nn::Conv2d::create(in, c, 3, rng), nn::Conv2d::create(c, c, 3, rng)});
    in = c;
  }
  const int cb = spec_.base_channels << spec_.depth;
  bottom_ = {nn::Conv2d::create(in, cb, 3, rng), nn::Conv2d::create(cb, cb, 3, rng)};
  in = cb;
  for (int l = spec_.depth - 1; l >= 0; --l) {
    const int c = spec_.base_channels << l;
    up_.push_back({nn::Conv2d::create(in + c, c, 3, rng), nn::Conv2d::create(c, c, 3, rng)});
    in = c;
  }
  head_ = nn::Conv2d::create(in, 1, 1, rng);
}

ag::Var Discriminator::run(const ag::Var& x, std::vector<LayerShape>* trace) const {
  const Shape s = x.shape();
  const int div = 1 << spec_.depth;
  if (s.c != 3) throw ShapeError("discriminator expects 3-channel frames, got " + s.str());
  if (s.h % div != 0 || s.w % div != 0) {
    throw ShapeError("discriminator input " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                     " not divisible by " + std::to_string(div));
  }
  auto record = [&](const std::string& name, const ag::Var& v) {
    if (trace) trace->push_back({name, v.shape()});
  };
  auto block = [](const DoubleConv& d, const ag::Var& v) {
    return nn::conv_lrelu(nn::conv_lrelu(v, d.a), d.b);
  };

  std::vector<ag::Var> skips;
  ag::Var h = x;
  for (int l = 0; l < spec_.depth; ++l) {
    h = block(down_[l], h);
    record("enc" + std::to_string(l), h);
    skips.push_back(h);
    const Shape hs = h.shape();
    h = ag::separable(h, LinearMap1D::box_down(hs.h, 2), LinearMap1D::box_down(hs.w, 2));
    record("pool" + std::to_string(l), h);
  }
  h = block(bottom_, h);
  record("bottleneck", h);
  for (int i = 0; i < spec_.depth; ++i) {
    const int l = spec_.depth - 1 - i;
    const Shape hs = h.shape();
    h = ag::separable(h, LinearMap1D::nearest_up(hs.h, 2), LinearMap1D::nearest_up(hs.w, 2));
    h = block(up_[i], ag::concat_channels({h, skips[l]}));
    record("dec" + std::to_string(l), h);
  }
  h = head_(h);
  record("logits", h);
  return h;
}

ag::Var Discriminator::forward(const ag::Var& x) const { return run(x, nullptr); }

std::vector<LayerShape> Discriminator::layer_shapes(Shape input) const {
  std::vector<LayerShape> trace;
  (void)run(ag::constant(Tensor(input)), &trace);
  return trace;
}

nn::ParamList Discriminator::parameters() const {
  nn::ParamList out;
  for (int l = 0; l < spec_.depth; ++l) {
    down_[l].a.collect("enc" + std::to_string(l) + ".conv0", out);
    down_[l].b.collect("enc" + std::to_string(l) + ".conv1", out);
  }
  bottom_.a.collect("bottleneck.conv0", out);
  bottom_.b.collect("bottleneck.conv1", out);
  for (int i = 0; i < spec_.depth; ++i) {
    const int l = spec_.depth - 1 - i;
    up_[i].a.collect("dec" + std::to_string(l) + ".conv0", out);
    up_[i].b.collect("dec" + std::to_string(l) + ".conv1", out);
  }
  head_.collect("head", out);
  return out;
}

}  // namespace vsrlab::disc
