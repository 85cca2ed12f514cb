#include "vsrlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vsrlab/errors.hpp"

namespace vsrlab {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape), data_(shape.numel(), fill) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ShapeError("negative tensor dimension " + shape.str());
  }
}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape.numel()) {
    throw ShapeError("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                     shape.str());
  }
}

float Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_.str());
  return data_[0];
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape s) const {
  if (s.numel() != data_.size()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + s.str());
  }
  return Tensor(s, data_);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ShapeError("tensor add shape mismatch " + shape_.str() + " vs " + other.shape_.str());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(float s) {
  for (auto& v : data_) v *= s;
  return *this;
}

double Tensor::sum() const {
  double s = 0.0;
  for (float v : data_) s += v;
  return s;
}

double Tensor::squared_norm() const {
  double s = 0.0;
  for (float v : data_) s += static_cast<double>(v) * v;
  return s;
}

float Tensor::max_abs() const {
  float m = 0.0f;
  for (float v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor Tensor::frames(int first, int count) const {
  if (first < 0 || count < 0 || first + count > shape_.n) {
    throw RangeError("frame range [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") outside " + shape_.str());
  }
  const std::size_t per = static_cast<std::size_t>(shape_.c) * shape_.plane();
  std::vector<float> out(data_.begin() + static_cast<std::ptrdiff_t>(per * first),
                         data_.begin() + static_cast<std::ptrdiff_t>(per * (first + count)));
  return Tensor({count, shape_.c, shape_.h, shape_.w}, std::move(out));
}

Tensor Tensor::window(int row, int col, int h, int w) const {
  if (row < 0 || col < 0 || h < 0 || w < 0 || row + h > shape_.h || col + w > shape_.w) {
    throw RangeError("window (" + std::to_string(row) + "," + std::to_string(col) + ") size " +
                     std::to_string(h) + "x" + std::to_string(w) + " outside " + shape_.str());
  }
  Tensor out({shape_.n, shape_.c, h, w});
  for (int n = 0; n < shape_.n; ++n) {
    for (int c = 0; c < shape_.c; ++c) {
      for (int y = 0; y < h; ++y) {
        const float* src = data_.data() + index(n, c, row + y, col);
        std::copy(src, src + w, out.data() + out.index(n, c, y, 0));
      }
    }
  }
  return out;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace vsrlab
