#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vsrlab/seqcore.hpp"

// Clip directories: frame_000001.png, frame_000002.png, ... as 8-bit RGB PNG.
namespace vsrlab::io {

std::string frame_name(int index);  // 1-based

// Number of consecutive frames starting at frame_000001.
int count_frames(const std::filesystem::path& dir);

// Frames [first, first + count), 0-based; values are byte / 255.
seq::FrameSequence load_clip(const std::filesystem::path& dir, int first, int count);
seq::FrameSequence load_clip(const std::filesystem::path& dir);

// Writes frame_000001.png upward, creating the directory.
void save_clip(const seq::FrameSequence& seq, const std::filesystem::path& dir);

// Single frame (3, H, W) plane set of a (N, 3, H, W) tensor at index `frame`.
void write_png(const std::filesystem::path& file, const Tensor& frames, int frame);
Tensor read_png(const std::filesystem::path& file);  // (1, 3, H, W)

// Quantize to bytes exactly as save_clip does.
std::uint8_t to_byte(float v);

}  // namespace vsrlab::io
