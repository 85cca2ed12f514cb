#include "vsrlab/frame_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vsrlab/errors.hpp"

namespace vsrlab::io {
namespace fs = std::filesystem;

std::string frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d.png", index);
  return buf;
}

int count_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("clip directory not found: " + dir.string());
  int n = 0;
  while (fs::exists(dir / frame_name(n + 1))) ++n;
  return n;
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

Tensor read_png(const fs::path& file) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, file.string().c_str())) {
    throw IoError("cannot read " + file.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    throw IoError("cannot decode " + file.string() + ": " + image.message);
  }
  const int h = static_cast<int>(image.height), w = static_cast<int>(image.width);
  Tensor t({1, 3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        t.at(0, c, y, x) = static_cast<float>(buf[(static_cast<std::size_t>(y) * w + x) * 3 + c]) / 255.0f;
  return t;
}

void write_png(const fs::path& file, const Tensor& frames, int frame) {
  const int h = frames.h(), w = frames.w();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] = to_byte(frames.at(frame, c, y, x));
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, file.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw IoError("cannot write " + file.string() + ": " + image.message);
  }
}

seq::FrameSequence load_clip(const fs::path& dir, int first, int count) {
  const int available = count_frames(dir);
  if (first < 0 || count < 1 || first + count > available) {
    throw RangeError("clip " + dir.string() + " has " + std::to_string(available) +
                     " frames; requested [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ")");
  }
  Tensor out;
  for (int i = 0; i < count; ++i) {
    const Tensor f = read_png(dir / frame_name(first + i + 1));
    if (i == 0) out = Tensor({count, 3, f.h(), f.w()});
    if (f.h() != out.h() || f.w() != out.w()) {
      throw ShapeError("frame " + frame_name(first + i + 1) + " in " + dir.string() +
                       " differs in size from the first frame");
    }
    std::copy(f.values().begin(), f.values().end(), out.data() + out.index(i, 0, 0, 0));
  }
  return seq::FrameSequence(std::move(out));
}

seq::FrameSequence load_clip(const fs::path& dir) { return load_clip(dir, 0, count_frames(dir)); }

void save_clip(const seq::FrameSequence& seq, const fs::path& dir) {
  fs::create_directories(dir);
  for (int i = 0; i < seq.length(); ++i) write_png(dir / frame_name(i + 1), seq.tensor(), i);
}

}  // namespace vsrlab::io
