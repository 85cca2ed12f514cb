#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsrlab/resample.hpp"
#include "vsrlab/seqcore.hpp"

namespace vsrlab::degrade {

using seq::FrameSequence;

enum class OperatorKind {
  gaussian_blur,
  gaussian_noise,
  contrast_brightness,
  frequency_guided,
  cutblur,
  diffusion,
  content_aware,
  adaptive,
  jpeg,
};

std::string_view to_string(OperatorKind kind);
OperatorKind parse_operator_kind(std::string_view name);  // ConfigError when unknown

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const ParamRange&, const ParamRange&) = default;
};

// One pipeline step: which operator, how often it fires and the ranges its
// parameters are drawn from. Parameter names are validated per kind.
struct OperatorConfig {
  OperatorKind kind = OperatorKind::gaussian_blur;
  double apply_probability = 1.0;
  std::map<std::string, ParamRange> params;

  // Default ranges for every parameter of `kind`.
  static OperatorConfig with_defaults(OperatorKind kind, double probability = 1.0);
  void validate() const;  // ConfigError
  friend bool operator==(const OperatorConfig&, const OperatorConfig&) = default;
};

// Parameter names accepted by a kind, in canonical order.
std::vector<std::string> parameter_names(OperatorKind kind);

struct DegradationPlan {
  std::vector<OperatorConfig> steps;
  std::uint64_t seed = 0;

  // blur(p=.5, sigma .2-2) -> noise(p=.5, sigma 0-.05) -> contrast/brightness
  // (p=.3, c .8-1.2, b -.1-.1) -> jpeg(p=.3, q 50-95).
  static DegradationPlan default_plan(std::uint64_t seed = 0);
  void validate() const;
  friend bool operator==(const DegradationPlan&, const DegradationPlan&) = default;
};

// What apply_plan actually drew for one step.
struct AppliedStep {
  OperatorKind kind = OperatorKind::gaussian_blur;
  bool fired = false;
  std::map<std::string, double> values;
};

struct DegradeResult {
  FrameSequence output;
  std::vector<AppliedStep> log;
};

nlohmann::json to_json(const std::vector<AppliedStep>& log);

// --- operators --------------------------------------------------------------

FrameSequence gaussian_blur(const FrameSequence& seq, int kernel_size, double sigma,
                            Padding pad = Padding::replicate);
// Independent noise per frame, drawn from streams derived from `seed`.
FrameSequence gaussian_noise(const FrameSequence& seq, double sigma, std::uint64_t seed);
// clamp(contrast * (x - 0.5) + 0.5 + brightness)
FrameSequence contrast_brightness(const FrameSequence& seq, double contrast, double brightness);
// Single-level orthonormal Haar; detail subbands scaled (or zeroed), then inverted.
FrameSequence frequency_guided(const FrameSequence& seq, double detail_scale, bool zero_details);

struct Rect {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;
};
// The seeded rectangle cutblur uses for a frame of the given size.
Rect cutblur_rect(int height, int width, double mask_fraction, std::uint64_t seed);
FrameSequence cutblur(const FrameSequence& seq, double mask_fraction, int blur_factor,
                      std::uint64_t seed);

FrameSequence diffusion(const FrameSequence& seq, int iterations, double sigma_step,
                        Padding pad = Padding::replicate);
// Per-pixel sigma = sigma_max - (sigma_max - sigma_min) * m, m = per-frame
// normalized Sobel magnitude of the channel mean.
FrameSequence content_aware(const FrameSequence& seq, double sigma_min, double sigma_max,
                            Padding pad = Padding::replicate);
FrameSequence adaptive(const FrameSequence& seq, double sigma_min, double sigma_max, int iterations,
                       Padding pad = Padding::replicate);
// Baseline JPEG round trip through 8-bit quantization.
FrameSequence jpeg_degrade(const FrameSequence& seq, int quality);

DegradeResult apply_plan(const FrameSequence& seq, const DegradationPlan& plan);

}  // namespace vsrlab::degrade
