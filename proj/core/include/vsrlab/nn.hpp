#pragma once

#include <string>
#include <vector>

#include "vsrlab/autograd.hpp"
#include "vsrlab/rng.hpp"

// Small building blocks shared by the generator, discriminator and the
// perceptual feature extractor.
namespace vsrlab::nn {

inline constexpr float kLeakySlope = 0.1f;

struct NamedParam {
  std::string name;
  ag::Var var;
};
using ParamList = std::vector<NamedParam>;

// Square-kernel convolution with edge-replicate same padding. Weight
// (out, in, k, k), bias (1, out, 1, 1).
struct Conv2d {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  ag::Var weight;
  ag::Var bias;

  // He-normal weights scaled by `gain`, zero bias.
  static Conv2d create(int in, int out, int kernel, Rng& rng, float gain = 1.0f);
  static Conv2d zeros(int in, int out, int kernel);

  [[nodiscard]] ag::Var operator()(const ag::Var& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

[[nodiscard]] ag::Var lrelu(const ag::Var& x);
[[nodiscard]] ag::Var conv_lrelu(const ag::Var& x, const Conv2d& conv);

void set_trainable(const ParamList& params, bool trainable);
std::size_t count_parameters(const ParamList& params);
void zero_grads(const ParamList& params);

}  // namespace vsrlab::nn
