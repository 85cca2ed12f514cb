#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include "vsrlab/autograd.hpp"
#include "vsrlab/rng.hpp"
#include "vsrlab/seqcore.hpp"
#include "vsrlab/tensor.hpp"

namespace vsrlab::testkit {

inline Tensor random_tensor(Shape s, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
  Rng rng(seed);
  Tensor t(s);
  for (auto& v : t.values()) v = static_cast<float>(uniform(rng, lo, hi));
  return t;
}

inline Tensor normal_tensor(Shape s, std::uint64_t seed, float stddev = 1.0f) {
  Rng rng(seed);
  Tensor t(s);
  for (auto& v : t.values()) v = static_cast<float>(normal(rng) * stddev);
  return t;
}

using ScalarFn = std::function<ag::Var(const ag::Var&)>;

// Norm-wise relative error between the analytic gradient of `f` at x0 and a
// fourth-order central difference of the same function with step h.
inline double gradient_error(const Tensor& x0, const ScalarFn& f, float h) {
  auto p = ag::parameter(x0);
  ag::backward(f(p));
  const Tensor analytic = p.grad();

  auto eval = [&](const Tensor& x) { return static_cast<double>(f(ag::constant(x)).value().item()); };
  double num = 0.0, den = 0.0;
  Tensor x = x0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float base = x0[i];
    x[i] = base - 2 * h;
    const double f_m2 = eval(x);
    x[i] = base - h;
    const double f_m1 = eval(x);
    x[i] = base + h;
    const double f_p1 = eval(x);
    x[i] = base + 2 * h;
    const double f_p2 = eval(x);
    x[i] = base;
    const double fd = (f_m2 - 8 * f_m1 + 8 * f_p1 - f_p2) / (12.0 * h);
    num += (fd - analytic[i]) * (fd - analytic[i]);
    den += static_cast<double>(analytic[i]) * analytic[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-30);
}

// Moving scene: smooth background, a few hard-edged shapes that drift by one
// pixel per frame, and a fine stripe texture.
inline seq::FrameSequence synthetic_clip(int frames, int height, int width, std::uint64_t seed = 7) {
  Rng rng(seed);
  struct Shape2 {
    double cy, cx, ry, rx, vy, vx;
    float rgb[3];
    bool disk;
  };
  std::vector<Shape2> shapes;
  for (int i = 0; i < 5; ++i) {
    Shape2 s{};
    s.cy = uniform(rng, 0, height);
    s.cx = uniform(rng, 0, width);
    s.ry = uniform(rng, height / 10.0, height / 4.0);
    s.rx = uniform(rng, width / 10.0, width / 4.0);
    s.vy = uniform_int(rng, -1, 1);
    s.vx = uniform_int(rng, -1, 1);
    for (float& c : s.rgb) c = static_cast<float>(uniform(rng, 0.1, 0.95));
    s.disk = bernoulli(rng, 0.5);
    shapes.push_back(s);
  }
  Tensor t({frames, 3, height, width});
  for (int n = 0; n < frames; ++n) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        float px[3] = {0.3f + 0.4f * y / height, 0.5f, 0.3f + 0.4f * x / width};
        if (y > height * 3 / 4) {
          const float stripe = ((x + n) / 6) % 2 ? 0.8f : 0.2f;
          px[0] = px[1] = px[2] = stripe;
        }
        for (const auto& s : shapes) {
          const double dy = (y + 0.5 - (s.cy + s.vy * n)) / s.ry;
          const double dx = (x + 0.5 - (s.cx + s.vx * n)) / s.rx;
          const bool inside = s.disk ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
          if (inside) std::copy(s.rgb, s.rgb + 3, px);
        }
        for (int c = 0; c < 3; ++c) t.at(n, c, y, x) = px[c];
      }
    }
  }
  return seq::FrameSequence(std::move(t));
}

inline seq::FrameSequence constant_clip(int frames, int height, int width, float value) {
  return seq::FrameSequence(Tensor({frames, 3, height, width}, value));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("vsrlab_" + tag + "_" + std::to_string(rng() % 1000000000));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace vsrlab::testkit
