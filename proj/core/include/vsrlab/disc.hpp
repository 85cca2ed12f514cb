#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsrlab/nn.hpp"

namespace vsrlab::disc {

struct DiscriminatorSpec {
  int base_channels = 32;
  int depth = 3;

  void validate() const;  // ConfigError
  [[nodiscard]] nlohmann::json to_json() const;
  static DiscriminatorSpec from_json(const nlohmann::json& j);
  friend bool operator==(const DiscriminatorSpec&, const DiscriminatorSpec&) = default;
};

// Output shape of one layer for an (B, 3, H, W) input, for introspection.
struct LayerShape {
  std::string name;
  Shape shape;
};

// U-Net: per level two conv+LReLU at 2^l * base channels, 2x average pooling
// between levels, a bottleneck, and a mirrored decoder (nearest 2x upsample,
// concat with the encoder skip, two conv+LReLU), then a 1x1 conv to one
// logit channel. Frames are scored independently.
class Discriminator {
 public:
  explicit Discriminator(DiscriminatorSpec spec, std::uint64_t seed = 0);

  // (B, 3, H, W) -> (B, 1, H, W) logits. H and W must be divisible by 2^depth.
  [[nodiscard]] ag::Var forward(const ag::Var& x) const;
  [[nodiscard]] std::vector<LayerShape> layer_shapes(Shape input) const;

  [[nodiscard]] const DiscriminatorSpec& spec() const { return spec_; }
  [[nodiscard]] nn::ParamList parameters() const;

 private:
  struct DoubleConv {
    nn::Conv2d a;
    nn::Conv2d b;
  };
  [[nodiscard]] ag::Var run(const ag::Var& x, std::vector<LayerShape>* trace) const;

  DiscriminatorSpec spec_;
  std::vector<DoubleConv> down_;
  DoubleConv bottom_;
  std::vector<DoubleConv> up_;
  nn::Conv2d head_;
};

}  // namespace vsrlab::disc
