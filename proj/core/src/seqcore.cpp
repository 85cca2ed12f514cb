#include "vsrlab/seqcore.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "vsrlab/errors.hpp"

namespace vsrlab::seq {

FrameSequence::FrameSequence(Tensor frames, std::optional<double> frame_rate_hint)
    : frames_(std::move(frames)), rate_(frame_rate_hint) {
  const Shape s = frames_.shape();
  if (s.n < 1 || s.h < 1 || s.w < 1 || s.c != 3) {
    throw ShapeError("frame sequence must be (N>=1, 3, H>=1, W>=1), got " + s.str());
  }
  for (float v : frames_.values()) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw RangeError("frame value " + std::to_string(v) + " outside [0, 1]");
    }
  }
  if (rate_ && !(*rate_ > 0.0)) throw RangeError("frame rate hint must be positive");
}

FrameSequence FrameSequence::clamped(Tensor frames, std::optional<double> frame_rate_hint) {
  for (auto& v : frames.values()) v = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
  return FrameSequence(std::move(frames), frame_rate_hint);
}

AugmentationSpec AugmentationSpec::sample(unsigned seed) {
  Rng rng(seed);
  AugmentationSpec spec;
  spec.seed = seed;
  spec.rotation_quarter_turns = uniform_int(rng, 0, 3);
  spec.flip_vertical = bernoulli(rng, 0.5);
  spec.flip_horizontal = bernoulli(rng, 0.5);
  return spec;
}

FrameSequence crop_fixed(const FrameSequence& seq, int size, Origin origin) {
  if (size < 1 || origin.row < 0 || origin.col < 0 || origin.row + size > seq.height() ||
      origin.col + size > seq.width()) {
    throw RangeError("crop of size " + std::to_string(size) + " at (" + std::to_string(origin.row) +
                     "," + std::to_string(origin.col) + ") exceeds " +
                     std::to_string(seq.height()) + "x" + std::to_string(seq.width()));
  }
  return FrameSequence(seq.tensor().window(origin.row, origin.col, size, size),
                       seq.frame_rate_hint());
}

Origin random_crop_origin(const FrameSequence& seq, int size, Rng& rng) {
  if (size > seq.height() || size > seq.width()) {
    throw RangeError("crop size " + std::to_string(size) + " larger than frame");
  }
  return {uniform_int(rng, 0, seq.height() - size), uniform_int(rng, 0, seq.width() - size)};
}

PatchGrid split_into_grid(const FrameSequence& seq, int patch_size) {
  if (patch_size < 1 || seq.height() % patch_size != 0 || seq.width() % patch_size != 0) {
    throw ShapeError("frame " + std::to_string(seq.height()) + "x" + std::to_string(seq.width()) +
                     " is not divisible into " + std::to_string(patch_size) + "-pixel patches");
  }
  PatchGrid grid;
  grid.grid_rows = seq.height() / patch_size;
  grid.grid_cols = seq.width() / patch_size;
  grid.patch_size = patch_size;
  grid.source_height = seq.height();
  grid.source_width = seq.width();
  grid.patches.reserve(static_cast<std::size_t>(grid.grid_rows) * grid.grid_cols);
  for (int r = 0; r < grid.grid_rows; ++r) {
    for (int c = 0; c < grid.grid_cols; ++c) {
      grid.patches.push_back(
          {r, c,
           FrameSequence(seq.tensor().window(r * patch_size, c * patch_size, patch_size, patch_size),
                         seq.frame_rate_hint())});
    }
  }
  return grid;
}

FrameSequence reassemble(const PatchGrid& grid) {
  const int rows = grid.grid_rows, cols = grid.grid_cols, p = grid.patch_size;
  if (rows < 1 || cols < 1 || p < 1 || rows * p != grid.source_height ||
      cols * p != grid.source_width) {
    throw ConsistencyError("patch grid geometry does not tile its source shape");
  }
  if (grid.patches.size() != static_cast<std::size_t>(rows) * cols) {
    throw ConsistencyError("patch grid has " + std::to_string(grid.patches.size()) +
                           " patches, expected " + std::to_string(rows * cols));
  }
  std::set<std::pair<int, int>> seen;
  const int n = grid.patches.front().frames.length();
  Tensor out({n, 3, grid.source_height, grid.source_width});
  for (const auto& patch : grid.patches) {
    if (patch.row < 0 || patch.row >= rows || patch.col < 0 || patch.col >= cols ||
        !seen.insert({patch.row, patch.col}).second) {
      throw ConsistencyError("patch position (" + std::to_string(patch.row) + "," +
                             std::to_string(patch.col) + ") missing or duplicated");
    }
    const Tensor& t = patch.frames.tensor();
    if (t.shape() != Shape{n, 3, p, p}) {
      throw ConsistencyError("patch at (" + std::to_string(patch.row) + "," +
                             std::to_string(patch.col) + ") has shape " + t.shape().str());
    }
    for (int f = 0; f < n; ++f)
      for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < p; ++y) {
          const float* src = t.data() + t.index(f, ch, y, 0);
          std::copy(src, src + p, out.data() + out.index(f, ch, patch.row * p + y, patch.col * p));
        }
  }
  return FrameSequence(std::move(out), grid.patches.front().frames.frame_rate_hint());
}

Tensor resize_tensor(const Tensor& t, int out_h, int out_w, Interpolation method) {
  return apply_separable(t, LinearMap1D::resize(t.h(), out_h, method),
                         LinearMap1D::resize(t.w(), out_w, method));
}

FrameSequence downsample(const FrameSequence& seq, int factor, Interpolation method) {
  if (factor != 2 && factor != 4) {
    throw ConfigError("downsample factor must be 2 or 4, got " + std::to_string(factor));
  }
  if (seq.height() % factor != 0 || seq.width() % factor != 0) {
    throw ShapeError("frame size not divisible by downsample factor " + std::to_string(factor));
  }
  return FrameSequence::clamped(
      resize_tensor(seq.tensor(), seq.height() / factor, seq.width() / factor, method),
      seq.frame_rate_hint());
}

FrameSequence upsample(const FrameSequence& seq, int factor, Interpolation method) {
  if (factor < 1) throw ConfigError("upsample factor must be positive");
  return FrameSequence::clamped(
      resize_tensor(seq.tensor(), seq.height() * factor, seq.width() * factor, method),
      seq.frame_rate_hint());
}

bool is_too_dark(const FrameSequence& seq, double threshold) {
  return seq.tensor().sum() / static_cast<double>(seq.tensor().size()) < threshold;
}

bool is_too_dark(const FrameSequence& seq, const DarkFilter& filter) {
  if (is_too_dark(seq, filter.threshold)) return true;
  if (!filter.check_borders) return false;
  const int b = std::min({filter.border_width, seq.height(), seq.width()});
  const int h = seq.height(), w = seq.width();
  const Origin corners[] = {{0, 0}, {h - b, 0}, {0, 0}, {0, w - b}};
  const std::pair<int, int> sizes[] = {{b, w}, {b, w}, {h, b}, {h, b}};
  for (int k = 0; k < 4; ++k) {
    const Tensor strip =
        seq.tensor().window(corners[k].row, corners[k].col, sizes[k].first, sizes[k].second);
    if (strip.sum() / static_cast<double>(strip.size()) < filter.threshold) return true;
  }
  return false;
}

FrameSequence augment(const FrameSequence& seq, const AugmentationSpec& spec) {
  if (spec.rotation_quarter_turns < 0 || spec.rotation_quarter_turns > 3) {
    throw RangeError("rotation must be 0..3 quarter turns");
  }
  const int turns = spec.rotation_quarter_turns;
  const int h = seq.height(), w = seq.width();
  if (turns % 2 == 1 && h != w) throw ShapeError("odd quarter-turn rotation needs square frames");

  const Tensor& src = seq.tensor();
  Tensor out(src.shape());
  for (int f = 0; f < src.n(); ++f) {
    for (int ch = 0; ch < 3; ++ch) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          // Inverse-map the output pixel through the flips, then the rotation.
          int ry = y, rx = x;
          if (spec.flip_horizontal) ry = h - 1 - ry;
          if (spec.flip_vertical) rx = w - 1 - rx;
          int sy = ry, sx = rx;
          switch (turns) {
            case 1: sy = rx; sx = w - 1 - ry; break;
            case 2: sy = h - 1 - ry; sx = w - 1 - rx; break;
            case 3: sy = h - 1 - rx; sx = ry; break;
            default: break;
          }
          out.at(f, ch, y, x) = src.at(f, ch, sy, sx);
        }
      }
    }
  }
  return FrameSequence(std::move(out), seq.frame_rate_hint());
}

}  // namespace vsrlab::seq
