#pragma once

#include <optional>
#include <vector>

#include "vsrlab/resample.hpp"
#include "vsrlab/rng.hpp"
#include "vsrlab/tensor.hpp"

namespace vsrlab::seq {

// Ordered run of N same-sized RGB frames, stored (N, 3, H, W) in [0, 1].
class FrameSequence {
 public:
  // Throws ShapeError / RangeError when the tensor violates the invariants.
  explicit FrameSequence(Tensor frames, std::optional<double> frame_rate_hint = std::nullopt);
  // Clamps into [0, 1] (NaN becomes 0) before validating.
  static FrameSequence clamped(Tensor frames, std::optional<double> frame_rate_hint = std::nullopt);

  [[nodiscard]] const Tensor& tensor() const { return frames_; }
  [[nodiscard]] int length() const { return frames_.n(); }
  [[nodiscard]] int height() const { return frames_.h(); }
  [[nodiscard]] int width() const { return frames_.w(); }
  [[nodiscard]] std::optional<double> frame_rate_hint() const { return rate_; }

  friend bool operator==(const FrameSequence& a, const FrameSequence& b) {
    return a.frames_ == b.frames_;
  }

 private:
  Tensor frames_;
  std::optional<double> rate_;
};

struct Origin {
  int row = 0;
  int col = 0;
};

struct GridPatch {
  int row = 0;
  int col = 0;
  FrameSequence frames;
};

// Exact R x C tiling of a sequence. Kept as plain data so callers can build or
// edit grids; reassemble() validates consistency.
struct PatchGrid {
  std::vector<GridPatch> patches;  // row-major when produced by split_into_grid
  int grid_rows = 0;
  int grid_cols = 0;
  int patch_size = 0;
  int source_height = 0;
  int source_width = 0;
};

struct AugmentationSpec {
  int rotation_quarter_turns = 0;  // counter-clockwise, 0..3
  bool flip_vertical = false;      // mirror about the vertical axis (left <-> right)
  bool flip_horizontal = false;    // mirror about the horizontal axis (top <-> bottom)
  unsigned seed = 0;

  // Uniform rotation from {0, 90, 180, 270}, each flip with probability 0.5.
  static AugmentationSpec sample(unsigned seed);
};

struct DarkFilter {
  double threshold = 0.05;
  // Also flag sequences where any border strip of `border_width` pixels is
  // dark while the frame as a whole is not.
  bool check_borders = false;
  int border_width = 4;
  friend bool operator==(const DarkFilter&, const DarkFilter&) = default;
};

FrameSequence crop_fixed(const FrameSequence& seq, int size, Origin origin);
// Uniform random origin for a size x size crop.
Origin random_crop_origin(const FrameSequence& seq, int size, Rng& rng);

PatchGrid split_into_grid(const FrameSequence& seq, int patch_size);
FrameSequence reassemble(const PatchGrid& grid);

FrameSequence downsample(const FrameSequence& seq, int factor, Interpolation method);
// Plain resize by an integer factor (used for baselines and oracles).
FrameSequence upsample(const FrameSequence& seq, int factor, Interpolation method);
Tensor resize_tensor(const Tensor& t, int out_h, int out_w, Interpolation method);

// Mean over every RGB value of every frame, strictly below threshold.
bool is_too_dark(const FrameSequence& seq, double threshold);
bool is_too_dark(const FrameSequence& seq, const DarkFilter& filter);

// Rotate, then vertical-axis flip, then horizontal-axis flip; identical for all frames.
FrameSequence augment(const FrameSequence& seq, const AugmentationSpec& spec);

}  // namespace vsrlab::seq
