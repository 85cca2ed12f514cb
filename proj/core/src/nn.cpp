#include "vsrlab/nn.hpp"

#include <cmath>

#include "vsrlab/errors.hpp"

namespace vsrlab::nn {

Conv2d Conv2d::create(int in, int out, int kernel, Rng& rng, float gain) {
  if (in < 1 || out < 1) throw ConfigError("conv: channel counts must be positive");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("conv: kernel must be odd");
  Tensor w({out, in, kernel, kernel});
  const double fan_in = static_cast<double>(in) * kernel * kernel;
  const double std = gain * std::sqrt(2.0 / ((1.0 + kLeakySlope * kLeakySlope) * fan_in));
  for (auto& v : w.values()) v = static_cast<float>(std * normal(rng));
  Conv2d c;
  c.in_channels = in;
  c.out_channels = out;
  c.kernel = kernel;
  c.weight = ag::parameter(std::move(w));
  c.bias = ag::parameter(Tensor({1, out, 1, 1}));
  return c;
}

Conv2d Conv2d::zeros(int in, int out, int kernel) {
  Conv2d c;
  c.in_channels = in;
  c.out_channels = out;
  c.kernel = kernel;
  c.weight = ag::parameter(Tensor({out, in, kernel, kernel}));
  c.bias = ag::parameter(Tensor({1, out, 1, 1}));
  return c;
}

ag::Var Conv2d::operator()(const ag::Var& x) const { return ag::conv2d(x, weight, bias); }

void Conv2d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

ag::Var lrelu(const ag::Var& x) { return ag::leaky_relu(x, kLeakySlope); }

ag::Var conv_lrelu(const ag::Var& x, const Conv2d& conv) { return lrelu(conv(x)); }

void set_trainable(const ParamList& params, bool trainable) {
  for (const auto& p : params) {
    auto v = p.var;
    v.set_requires_grad(trainable);
  }
}

std::size_t count_parameters(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.var.value().size();
  return n;
}

void zero_grads(const ParamList& params) {
  for (const auto& p : params) {
    auto v = p.var;
    v.zero_grad();
  }
}

}  // namespace vsrlab::nn
