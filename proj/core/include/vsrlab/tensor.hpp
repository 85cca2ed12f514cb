#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vsrlab {

// 4-D NCHW shape. Everything in the library is expressed in this layout;
// scalars are (1,1,1,1).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  [[nodiscard]] std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  static Tensor scalar(float v) { return Tensor({1, 1, 1, 1}, v); }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] int n() const { return shape_.n; }
  [[nodiscard]] int c() const { return shape_.c; }
  [[nodiscard]] int h() const { return shape_.h; }
  [[nodiscard]] int w() const { return shape_.w; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] float* data() { return data_.data(); }
  [[nodiscard]] const float* data() const { return data_.data(); }
  [[nodiscard]] std::span<float> values() { return data_; }
  [[nodiscard]] std::span<const float> values() const { return data_; }
  [[nodiscard]] const std::vector<float>& storage() const { return data_; }

  [[nodiscard]] std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  float& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  [[nodiscard]] float at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Pointer to the (n, c) plane.
  float* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
  [[nodiscard]] const float* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }

  [[nodiscard]] float item() const;
  void fill(float v);
  [[nodiscard]] Tensor reshaped(Shape s) const;

  // Elementwise helpers used by optimizers and tests.
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(float s);
  [[nodiscard]] double sum() const;
  [[nodiscard]] double squared_norm() const;
  [[nodiscard]] float max_abs() const;

  // Frames [first, first + count) along the n axis.
  [[nodiscard]] Tensor frames(int first, int count) const;
  // Spatial window of size (h, w) at (row, col), all n and c.
  [[nodiscard]] Tensor window(int row, int col, int h, int w) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{};
  std::vector<float> data_;
};

// Max-abs difference; throws ShapeError when shapes differ.
float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace vsrlab
