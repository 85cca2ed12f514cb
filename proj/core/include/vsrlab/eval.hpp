#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsrlab/gen.hpp"
#include "vsrlab/loss.hpp"
#include "vsrlab/train.hpp"

namespace vsrlab::eval {

using seq::FrameSequence;

// Anything that maps an LR sequence to one `scale` times larger.
struct Model {
  std::string name;
  std::function<FrameSequence(const FrameSequence& lr, int scale)> upscale;
};

// Plain interpolation baseline.
Model interpolation_model(Interpolation kind);
Model generator_model(std::string name, std::shared_ptr<const gen::Generator> generator);
// "builtin:bicubic", "builtin:bilinear", or a checkpoint path.
Model resolve_model(const std::string& spec);

std::string_view to_string(Interpolation m);
Interpolation parse_interpolation(std::string_view s);

struct Row {
  std::string clip_id;
  Interpolation method = Interpolation::bicubic;
  int scale = 2;
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> lpips;  // only with a pretrained extractor
  std::string model;
  friend bool operator==(const Row&, const Row&) = default;
};

struct Aggregate {
  std::string model;
  Interpolation method = Interpolation::bicubic;
  int scale = 2;
  int rows = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> lpips;
  friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

struct MetricsReport {
  std::vector<Row> rows;
  std::vector<Aggregate> aggregates;

  [[nodiscard]] std::string to_csv() const;
  static std::vector<Row> rows_from_csv(const std::string& text);  // ConfigError on malformed input
  [[nodiscard]] nlohmann::json aggregates_json() const;
  [[nodiscard]] std::string format_table() const;
};

// Means of the rows grouped by (model, method, scale), in first-seen order.
std::vector<Aggregate> aggregate(const std::vector<Row>& rows);

// LR = downsample(hr, scale, method); full-frame prediction; metrics against hr.
Row evaluate_clip(const Model& model, const std::string& clip_id, const FrameSequence& hr, int scale,
                  Interpolation method, const loss::FeatureExtractor* extractor = nullptr);

struct EvalOptions {
  std::vector<int> scales{2, 4};
  std::vector<Interpolation> methods{Interpolation::bicubic, Interpolation::bilinear};
  int max_frames = 0;  // 0 = whole clip
  friend bool operator==(const EvalOptions&, const EvalOptions&) = default;
};

// Frames are cropped at the top-left to a multiple of the largest scale.
MetricsReport compare_models(const std::vector<Model>& models, const train::Dataset& clips, const EvalOptions& options,
                             const loss::FeatureExtractor* extractor = nullptr);

}  // namespace vsrlab::eval
