#include "vsrlab/resample.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vsrlab/errors.hpp"

namespace vsrlab {
namespace {

int wrap_index(int i, int n, Padding pad) {
  if (pad == Padding::circular) return ((i % n) + n) % n;
  return std::clamp(i, 0, n - 1);
}

double cubic_weight(double x) {
  constexpr double a = -0.75;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

// Merge duplicate indices (clamping at borders produces repeats).
void push_merged(LinearMap1D& m, const std::vector<std::pair<int, double>>& taps) {
  std::map<int, double> merged;
  for (auto [i, w] : taps) merged[i] += w;
  std::vector<int> idx;
  std::vector<float> wts;
  for (auto [i, w] : merged) {
    idx.push_back(i);
    wts.push_back(static_cast<float>(w));
  }
  m.push_row(idx, wts);
}

}  // namespace

void LinearMap1D::push_row(std::span<const int> idx, std::span<const float> w) {
  index.insert(index.end(), idx.begin(), idx.end());
  weight.insert(weight.end(), w.begin(), w.end());
  row_start.push_back(static_cast<int>(index.size()));
  ++out;
}

LinearMap1D LinearMap1D::identity(int n) {
  LinearMap1D m;
  m.in = n;
  for (int i = 0; i < n; ++i) {
    const int idx[] = {i};
    const float w[] = {1.0f};
    m.push_row(idx, w);
  }
  return m;
}

LinearMap1D LinearMap1D::filter(int n, std::span<const float> taps, Padding pad) {
  if (taps.size() % 2 == 0) throw ConfigError("filter taps must have odd length");
  const int r = static_cast<int>(taps.size() / 2);
  LinearMap1D m;
  m.in = n;
  const int first = pad == Padding::valid ? r : 0;
  const int last = pad == Padding::valid ? n - r : n;
  if (last <= first) throw ShapeError("filter of length " + std::to_string(taps.size()) +
                                      " does not fit in " + std::to_string(n) + " samples");
  for (int o = first; o < last; ++o) {
    std::vector<std::pair<int, double>> row;
    for (int k = -r; k <= r; ++k) {
      row.emplace_back(wrap_index(o + k, n, pad), taps[static_cast<std::size_t>(k + r)]);
    }
    push_merged(m, row);
  }
  return m;
}

LinearMap1D LinearMap1D::resize(int in, int out, Interpolation kind) {
  if (in < 1 || out < 1) throw ShapeError("resize needs positive sizes");
  LinearMap1D m;
  m.in = in;
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double src = (o + 0.5) * scale - 0.5;
    const int base = static_cast<int>(std::floor(src));
    const double t = src - base;
    std::vector<std::pair<int, double>> row;
    if (kind == Interpolation::bilinear) {
      row.emplace_back(std::clamp(base, 0, in - 1), 1.0 - t);
      row.emplace_back(std::clamp(base + 1, 0, in - 1), t);
    } else {
      double total = 0.0;
      for (int k = -1; k <= 2; ++k) total += cubic_weight(k - t);
      for (int k = -1; k <= 2; ++k) {
        row.emplace_back(std::clamp(base + k, 0, in - 1), cubic_weight(k - t) / total);
      }
    }
    push_merged(m, row);
  }
  return m;
}

LinearMap1D LinearMap1D::box_down(int in, int factor) {
  if (factor < 1 || in % factor != 0) throw ShapeError("box_down: size not divisible by factor");
  LinearMap1D m;
  m.in = in;
  std::vector<int> idx(static_cast<std::size_t>(factor));
  std::vector<float> w(static_cast<std::size_t>(factor), 1.0f / static_cast<float>(factor));
  for (int o = 0; o < in / factor; ++o) {
    for (int k = 0; k < factor; ++k) idx[static_cast<std::size_t>(k)] = o * factor + k;
    m.push_row(idx, w);
  }
  return m;
}

LinearMap1D LinearMap1D::nearest_up(int in, int factor) {
  LinearMap1D m;
  m.in = in;
  for (int o = 0; o < in * factor; ++o) {
    const int idx[] = {o / factor};
    const float w[] = {1.0f};
    m.push_row(idx, w);
  }
  return m;
}

LinearMap1D LinearMap1D::decimate(int in, int factor) {
  if (factor < 1 || in % factor != 0) throw ShapeError("decimate: size not divisible by factor");
  LinearMap1D m;
  m.in = in;
  for (int o = 0; o < in / factor; ++o) {
    const int idx[] = {o * factor};
    const float w[] = {1.0f};
    m.push_row(idx, w);
  }
  return m;
}

LinearMap1D LinearMap1D::then(const LinearMap1D& next) const {
  if (next.in != out) throw ShapeError("LinearMap1D composition size mismatch");
  LinearMap1D m;
  m.in = in;
  for (int o = 0; o < next.out; ++o) {
    std::vector<std::pair<int, double>> row;
    for (int a = next.row_start[o]; a < next.row_start[o + 1]; ++a) {
      const int mid = next.index[a];
      for (int b = row_start[mid]; b < row_start[mid + 1]; ++b) {
        row.emplace_back(index[b], static_cast<double>(next.weight[a]) * weight[b]);
      }
    }
    push_merged(m, row);
  }
  return m;
}

std::vector<float> gaussian_taps(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw ConfigError("gaussian kernel size must be odd and >= 1");
  if (sigma < 0.0) throw ConfigError("gaussian sigma must be >= 0");
  std::vector<float> taps(static_cast<std::size_t>(size), 0.0f);
  const int r = size / 2;
  if (sigma == 0.0) {
    taps[static_cast<std::size_t>(r)] = 1.0f;
    return taps;
  }
  std::vector<double> raw(taps.size());
  double total = 0.0;
  for (int k = -r; k <= r; ++k) {
    raw[static_cast<std::size_t>(k + r)] = std::exp(-0.5 * k * k / (sigma * sigma));
    total += raw[static_cast<std::size_t>(k + r)];
  }
  for (std::size_t i = 0; i < taps.size(); ++i) taps[i] = static_cast<float>(raw[i] / total);
  return taps;
}

int gaussian_size_for(double sigma) {
  return 2 * static_cast<int>(std::ceil(3.0 * std::max(sigma, 0.0))) + 1;
}

Tensor apply_separable(const Tensor& x, const LinearMap1D& rows, const LinearMap1D& cols) {
  if (rows.in != x.h() || cols.in != x.w()) {
    throw ShapeError("separable map expects spatial " + std::to_string(rows.in) + "x" +
                     std::to_string(cols.in) + ", got " + x.shape().str());
  }
  Tensor out({x.n(), x.c(), rows.out, cols.out});
  std::vector<float> tmp(static_cast<std::size_t>(x.h()) * cols.out);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const float* src = x.plane(n, c);
      for (int y = 0; y < x.h(); ++y) {
        const float* srow = src + static_cast<std::size_t>(y) * x.w();
        float* trow = tmp.data() + static_cast<std::size_t>(y) * cols.out;
        for (int o = 0; o < cols.out; ++o) {
          float acc = 0.0f;
          for (int k = cols.row_start[o]; k < cols.row_start[o + 1]; ++k) {
            acc += cols.weight[k] * srow[cols.index[k]];
          }
          trow[o] = acc;
        }
      }
      float* dst = out.plane(n, c);
      for (int o = 0; o < rows.out; ++o) {
        float* drow = dst + static_cast<std::size_t>(o) * cols.out;
        std::fill(drow, drow + cols.out, 0.0f);
        for (int k = rows.row_start[o]; k < rows.row_start[o + 1]; ++k) {
          const float wk = rows.weight[k];
          const float* trow = tmp.data() + static_cast<std::size_t>(rows.index[k]) * cols.out;
          for (int j = 0; j < cols.out; ++j) drow[j] += wk * trow[j];
        }
      }
    }
  }
  return out;
}

Tensor apply_separable_adjoint(const Tensor& dy, const LinearMap1D& rows, const LinearMap1D& cols) {
  if (rows.out != dy.h() || cols.out != dy.w()) {
    throw ShapeError("separable adjoint size mismatch for " + dy.shape().str());
  }
  Tensor dx({dy.n(), dy.c(), rows.in, cols.in});
  std::vector<float> tmp(static_cast<std::size_t>(rows.in) * cols.out);
  for (int n = 0; n < dy.n(); ++n) {
    for (int c = 0; c < dy.c(); ++c) {
      std::fill(tmp.begin(), tmp.end(), 0.0f);
      const float* g = dy.plane(n, c);
      for (int o = 0; o < rows.out; ++o) {
        const float* grow = g + static_cast<std::size_t>(o) * cols.out;
        for (int k = rows.row_start[o]; k < rows.row_start[o + 1]; ++k) {
          const float wk = rows.weight[k];
          float* trow = tmp.data() + static_cast<std::size_t>(rows.index[k]) * cols.out;
          for (int j = 0; j < cols.out; ++j) trow[j] += wk * grow[j];
        }
      }
      float* dst = dx.plane(n, c);
      for (int y = 0; y < rows.in; ++y) {
        const float* trow = tmp.data() + static_cast<std::size_t>(y) * cols.out;
        float* drow = dst + static_cast<std::size_t>(y) * cols.in;
        for (int o = 0; o < cols.out; ++o) {
          for (int k = cols.row_start[o]; k < cols.row_start[o + 1]; ++k) {
            drow[cols.index[k]] += cols.weight[k] * trow[o];
          }
        }
      }
    }
  }
  return dx;
}

namespace {

struct KernelGeometry {
  int kh, kw, rh, rw, out_h, out_w, off_h, off_w;
};

KernelGeometry kernel_geometry(const Tensor& kernel, Padding pad, int in_h, int in_w) {
  KernelGeometry g{kernel.h(), kernel.w(), kernel.h() / 2, kernel.w() / 2, in_h, in_w, 0, 0};
  if (g.kh % 2 == 0 || g.kw % 2 == 0) throw ConfigError("2-D kernel sizes must be odd");
  if (pad == Padding::valid) {
    g.out_h = in_h - 2 * g.rh;
    g.out_w = in_w - 2 * g.rw;
    g.off_h = g.rh;
    g.off_w = g.rw;
    if (g.out_h < 1 || g.out_w < 1) throw ShapeError("kernel larger than input plane");
  }
  return g;
}

}  // namespace

Tensor apply_kernel2d(const Tensor& x, const Tensor& kernel, Padding pad) {
  const auto g = kernel_geometry(kernel, pad, x.h(), x.w());
  Tensor out({x.n(), x.c(), g.out_h, g.out_w});
  const float* k = kernel.data();
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const float* src = x.plane(n, c);
      float* dst = out.plane(n, c);
      for (int y = 0; y < g.out_h; ++y) {
        for (int xx = 0; xx < g.out_w; ++xx) {
          float acc = 0.0f;
          for (int dy = -g.rh; dy <= g.rh; ++dy) {
            const int sy = wrap_index(y + g.off_h + dy, x.h(), pad);
            for (int dx = -g.rw; dx <= g.rw; ++dx) {
              const int sx = wrap_index(xx + g.off_w + dx, x.w(), pad);
              acc += k[(dy + g.rh) * g.kw + dx + g.rw] * src[sy * x.w() + sx];
            }
          }
          dst[y * g.out_w + xx] = acc;
        }
      }
    }
  }
  return out;
}

Tensor apply_kernel2d_adjoint(const Tensor& dy, const Tensor& kernel, Padding pad, int in_h,
                              int in_w) {
  const auto g = kernel_geometry(kernel, pad, in_h, in_w);
  if (dy.h() != g.out_h || dy.w() != g.out_w) throw ShapeError("kernel adjoint size mismatch");
  Tensor dx({dy.n(), dy.c(), in_h, in_w});
  const float* k = kernel.data();
  for (int n = 0; n < dy.n(); ++n) {
    for (int c = 0; c < dy.c(); ++c) {
      const float* src = dy.plane(n, c);
      float* dst = dx.plane(n, c);
      for (int y = 0; y < g.out_h; ++y) {
        for (int xx = 0; xx < g.out_w; ++xx) {
          const float gv = src[y * g.out_w + xx];
          if (gv == 0.0f) continue;
          for (int ddy = -g.rh; ddy <= g.rh; ++ddy) {
            const int sy = wrap_index(y + g.off_h + ddy, in_h, pad);
            for (int ddx = -g.rw; ddx <= g.rw; ++ddx) {
              const int sx = wrap_index(xx + g.off_w + ddx, in_w, pad);
              dst[sy * in_w + sx] += k[(ddy + g.rh) * g.kw + ddx + g.rw] * gv;
            }
          }
        }
      }
    }
  }
  return dx;
}

}  // namespace vsrlab
