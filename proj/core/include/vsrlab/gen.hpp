#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsrlab/nn.hpp"
#include "vsrlab/seqcore.hpp"

namespace vsrlab::gen {

using ag::Affinity;

enum class Variant { rrdb_based, residual_based };

// Interpolated copy of the input added to the network output before the
// final clamp; `none` makes the network predict the frame on its own.
enum class InputSkip { none, bilinear, bicubic };

std::string_view to_string(Variant v);
std::string_view to_string(Affinity a);
std::string_view to_string(InputSkip s);
Variant parse_variant(std::string_view s);
Affinity parse_affinity(std::string_view s);
InputSkip parse_input_skip(std::string_view s);

struct GeneratorSpec {
  Variant variant = Variant::rrdb_based;
  int base_channels = 64;
  int num_blocks = 8;
  // A non-local block follows each listed block index (1-based); 0 places one
  // right after the channel-expanding head.
  std::vector<int> nonlocal_positions{4, 8};
  Affinity pairwise = Affinity::dot_product;
  InputSkip input_skip = InputSkip::bicubic;

  // rrdb_based: 8 RRDBs, 64 channels, non-local after 4 and 8.
  // residual_based: 6 residual blocks, 48 channels, non-local after 6.
  static GeneratorSpec defaults(Variant variant);
  void validate() const;  // ConfigError

  [[nodiscard]] nlohmann::json to_json() const;
  static GeneratorSpec from_json(const nlohmann::json& j);
  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

// Five dense conv+LReLU stages, each reading [x, z1, ..., z_{k-1}] and adding
// channels/2 features, closed by a 1x1 conv+LReLU back to `channels`.
// out = z / 3 + 2x / 3.
struct ResidualBlock {
  int channels = 0;
  std::array<nn::Conv2d, 5> dense;
  nn::Conv2d fuse;

  static ResidualBlock create(int channels, Rng& rng);
  static ResidualBlock zeros(int channels);
  [[nodiscard]] ag::Var operator()(const ag::Var& x) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

// Three chained residual blocks plus an outer skip.
struct Rrdb {
  std::array<ResidualBlock, 3> stages;

  static Rrdb create(int channels, Rng& rng);
  static Rrdb zeros(int channels);
  [[nodiscard]] ag::Var operator()(const ag::Var& x) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

struct NonLocalSpec {
  int channels = 0;
  int bottleneck = 0;  // 0 means channels / 2
  Affinity pairwise = Affinity::dot_product;
  [[nodiscard]] int inner() const { return bottleneck > 0 ? bottleneck : std::max(1, channels / 2); }
};

// Attention over every (frame, row, col) position of the sequence:
// z = W_z * y + x with y_i = (1/C) sum_j f(x_i, x_j) g(x_j). The output
// projection starts at zero so a fresh block is the identity.
struct NonLocalBlock {
  NonLocalSpec spec;
  nn::Conv2d theta;
  nn::Conv2d phi;
  nn::Conv2d g;
  nn::Conv2d out;
  ag::Var w_theta;  // concatenation affinity only, (1, inner, 1, 1)
  ag::Var w_phi;

  static NonLocalBlock create(const NonLocalSpec& spec, Rng& rng);
  [[nodiscard]] ag::Var operator()(const ag::Var& x) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

// Conv to 4C channels, depth-to-space by 2, LReLU.
struct Upsampler {
  nn::Conv2d expand;

  static Upsampler create(int channels, Rng& rng);
  [[nodiscard]] ag::Var operator()(const ag::Var& x) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

// Head (3 -> C conv+LReLU), blocks with interleaved non-local blocks,
// reconstruction conv+LReLU, upsampler, tail conv to 3 channels, optional
// input skip, clamp to [0, 1]. Frames are the batch axis, so every
// convolution is per frame and only the non-local blocks mix time.
class Generator {
 public:
  explicit Generator(GeneratorSpec spec, std::uint64_t seed = 0);

  // (T, 3, H, W) -> (T, 3, 2H, 2W).
  [[nodiscard]] ag::Var forward(const ag::Var& x) const;
  [[nodiscard]] seq::FrameSequence upscale(const seq::FrameSequence& lr) const;
  // Repeated 2x passes; `scale` must be a power of two.
  [[nodiscard]] seq::FrameSequence upscale(const seq::FrameSequence& lr, int scale) const;

  [[nodiscard]] const GeneratorSpec& spec() const { return spec_; }
  [[nodiscard]] nn::ParamList parameters() const;
  [[nodiscard]] std::size_t parameter_count() const;

 private:
  GeneratorSpec spec_;
  nn::Conv2d head_;
  std::vector<Rrdb> rrdbs_;
  std::vector<ResidualBlock> blocks_;
  std::vector<std::optional<NonLocalBlock>> nonlocal_;  // index = position
  nn::Conv2d recon_;
  Upsampler up_;
  nn::Conv2d tail_;
};

}  // namespace vsrlab::gen
