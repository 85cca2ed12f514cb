#pragma once

#include <span>
#include <vector>

#include "vsrlab/tensor.hpp"

namespace vsrlab {

enum class Padding { replicate, circular, valid };
enum class Interpolation { bicubic, bilinear };

// Sparse linear map R^in -> R^out along one axis, stored row-compressed.
// Separable 2-D filters and resizers are a pair of these (one per axis), so
// forward and adjoint share one representation.
struct LinearMap1D {
  int in = 0;
  int out = 0;
  std::vector<int> row_start{0};
  std::vector<int> index;
  std::vector<float> weight;

  void push_row(std::span<const int> idx, std::span<const float> w);

  static LinearMap1D identity(int n);
  // Correlation with centred odd-length taps.
  static LinearMap1D filter(int n, std::span<const float> taps, Padding pad);
  // Half-pixel-centred resize with edge-replicate borders; 4-tap cubic
  // (a = -0.75) or 2-tap linear.
  static LinearMap1D resize(int in, int out, Interpolation kind);
  static LinearMap1D box_down(int in, int factor);
  static LinearMap1D nearest_up(int in, int factor);
  static LinearMap1D decimate(int in, int factor);

  // (next ∘ this): apply this map first, then `next`.
  [[nodiscard]] LinearMap1D then(const LinearMap1D& next) const;
};

// Odd-length normalized Gaussian taps; sigma == 0 gives the unit impulse.
std::vector<float> gaussian_taps(int size, double sigma);
// Smallest odd size covering +-3 sigma.
int gaussian_size_for(double sigma);

// rows acts along H, cols along W, for every (n, c) plane.
Tensor apply_separable(const Tensor& x, const LinearMap1D& rows, const LinearMap1D& cols);
// Adjoint of apply_separable; output has the (rows.in, cols.in) spatial size.
Tensor apply_separable_adjoint(const Tensor& dy, const LinearMap1D& rows, const LinearMap1D& cols);

// Non-separable fixed 2-D kernel (correlation) per plane. Kernel is (kh, kw)
// with odd sizes, stored as a (1, 1, kh, kw) tensor. `valid` shrinks output.
Tensor apply_kernel2d(const Tensor& x, const Tensor& kernel, Padding pad);
Tensor apply_kernel2d_adjoint(const Tensor& dy, const Tensor& kernel, Padding pad, int in_h, int in_w);

}  // namespace vsrlab
