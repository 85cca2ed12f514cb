#include "vsrlab/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "vsrlab/errors.hpp"

namespace vsrlab::ag {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

using BackwardFn = std::function<void(Node&)>;

Var make(Tensor value, std::vector<Var> parents, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  const bool need = std::any_of(parents.begin(), parents.end(),
                                [](const Var& p) { return p.requires_grad(); });
  if (need) {
    node->requires_grad = true;
    for (auto& p : parents) node->parents.push_back(p.ptr());
    node->backward = std::move(fn);
  }
  return Var(std::move(node));
}

bool wants(const Node& self, std::size_t i) {
  return self.parents[i] && self.parents[i]->requires_grad;
}

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

template <typename F>
Var unary(const Var& a, F f, std::function<float(float x, float y)> dfdx) {
  Tensor out(a.shape());
  const Tensor& av = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  return make(std::move(out), {a}, [dfdx](Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor g(x.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * dfdx(x[i], self.value[i]);
    self.parents[0]->accumulate(g);
  });
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor(value.shape());
  return grad;
}

void Node::accumulate(const Tensor& g) {
  if (grad.empty()) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor(node_->value.shape());
  return node_->grad;
}

Var constant(Tensor t) {
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  return Var(std::move(node));
}

Var parameter(Tensor t) {
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var detach(const Var& x) { return constant(x.value()); }

void backward(const Var& root) {
  if (root.value().size() != 1) {
    throw ShapeError("backward() without seed needs a scalar root, got " + root.shape().str());
  }
  backward(root, Tensor::scalar(1.0f));
}

void backward(const Var& root, const Tensor& seed) {
  if (!root.requires_grad()) return;
  if (seed.shape() != root.shape()) throw ShapeError("backward seed shape mismatch");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && p->backward && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->grad.empty() || !node->backward) continue;
    node->backward(*node);
    node->grad = Tensor();  // interior gradients are not needed afterwards
  }
}

Var add(const Var& a, const Var& b) { return axpby(a, 1.0f, b, 1.0f); }
Var sub(const Var& a, const Var& b) { return axpby(a, 1.0f, b, -1.0f); }

Var axpby(const Var& a, float alpha, const Var& b, float beta) {
  require_same(a, b, "axpby");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * a.value()[i] + beta * b.value()[i];
  return make(std::move(out), {a, b}, [alpha, beta](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants(self, k)) continue;
      Tensor g = self.grad;
      g *= k == 0 ? alpha : beta;
      self.parents[k]->accumulate(g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (wants(self, 0)) {
      Tensor g(av.shape());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * bv[i];
      self.parents[0]->accumulate(g);
    }
    if (wants(self, 1)) {
      Tensor g(bv.shape());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * av[i];
      self.parents[1]->accumulate(g);
    }
  });
}

Var div(const Var& a, const Var& b) {
  require_same(a, b, "div");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / b.value()[i];
  return make(std::move(out), {a, b}, [](Node& self) {
    const Tensor& bv = self.parents[1]->value;
    if (wants(self, 0)) {
      Tensor g(bv.shape());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] / bv[i];
      self.parents[0]->accumulate(g);
    }
    if (wants(self, 1)) {
      Tensor g(bv.shape());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = -self.grad[i] * self.value[i] / bv[i];
      self.parents[1]->accumulate(g);
    }
  });
}

Var scale(const Var& a, float s) {
  return unary(a, [s](float x) { return s * x; }, [s](float, float) { return s; });
}

Var add_scalar(const Var& a, float s) {
  return unary(a, [s](float x) { return x + s; }, [](float, float) { return 1.0f; });
}

Var square(const Var& a) {
  return unary(a, [](float x) { return x * x; }, [](float x, float) { return 2.0f * x; });
}

Var sqrt(const Var& a) {
  return unary(
      a, [](float x) { return std::sqrt(x); }, [](float, float y) { return 0.5f / y; });
}

Var abs(const Var& a) {
  return unary(
      a, [](float x) { return std::abs(x); },
      [](float x, float) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); });
}

Var leaky_relu(const Var& a, float slope) {
  return unary(
      a, [slope](float x) { return std::max(slope * x, x); },
      [slope](float x, float) { return x >= 0.0f ? 1.0f : slope; });
}

Var relu(const Var& a) { return leaky_relu(a, 0.0f); }

Var clamp(const Var& a, float lo, float hi) {
  return unary(
      a, [lo, hi](float x) { return std::clamp(x, lo, hi); },
      [lo, hi](float x, float) { return (x >= lo && x <= hi) ? 1.0f : 0.0f; });
}

Var softplus(const Var& a) {
  return unary(
      a, [](float x) { return std::max(x, 0.0f) + std::log1p(std::exp(-std::abs(x))); },
      [](float x, float) { return 1.0f / (1.0f + std::exp(-x)); });
}

Var sum(const Var& a) {
  return make(Tensor::scalar(static_cast<float>(a.value().sum())), {a}, [](Node& self) {
    self.parents[0]->accumulate(Tensor(self.parents[0]->value.shape(), self.grad[0]));
  });
}

Var mean(const Var& a) {
  const auto n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of empty tensor");
  return make(Tensor::scalar(static_cast<float>(a.value().sum() / n)), {a}, [n](Node& self) {
    self.parents[0]->accumulate(
        Tensor(self.parents[0]->value.shape(), static_cast<float>(self.grad[0] / n)));
  });
}

// ---------------------------------------------------------------------------
// Convolution via im2col + GEMM.

namespace {

void im2col(const Tensor& x, int n, int k, std::vector<float>& col) {
  const int C = x.c(), H = x.h(), W = x.w(), r = k / 2;
  const std::size_t hw = x.shape().plane();
  col.resize(static_cast<std::size_t>(C) * k * k * hw);
  for (int c = 0; c < C; ++c) {
    const float* src = x.plane(n, c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* dst = col.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int ox = kx - r;
        for (int y = 0; y < H; ++y) {
          const float* srow = src + static_cast<std::size_t>(std::clamp(y + ky - r, 0, H - 1)) * W;
          float* drow = dst + static_cast<std::size_t>(y) * W;
          const int lo = std::max(0, -ox);
          const int hi = std::min(W, W - ox);
          for (int xx = 0; xx < lo; ++xx) drow[xx] = srow[0];
          if (hi > lo) std::copy(srow + lo + ox, srow + hi + ox, drow + lo);
          for (int xx = std::max(hi, lo); xx < W; ++xx) drow[xx] = srow[W - 1];
        }
      }
    }
  }
}

void col2im_add(const std::vector<float>& col, int k, Tensor& dx, int n) {
  const int C = dx.c(), H = dx.h(), W = dx.w(), r = k / 2;
  const std::size_t hw = dx.shape().plane();
  for (int c = 0; c < C; ++c) {
    float* dst = dx.plane(n, c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* src = col.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        for (int y = 0; y < H; ++y) {
          float* drow = dst + static_cast<std::size_t>(std::clamp(y + ky - r, 0, H - 1)) * W;
          const float* srow = src + static_cast<std::size_t>(y) * W;
          for (int xx = 0; xx < W; ++xx) drow[std::clamp(xx + kx - r, 0, W - 1)] += srow[xx];
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b) {
  const Shape xs = x.shape(), ws = w.shape();
  if (ws.c != xs.c) {
    throw ShapeError("conv2d: weight expects " + std::to_string(ws.c) + " input channels, got " +
                     std::to_string(xs.c));
  }
  if (ws.h != ws.w || ws.h % 2 == 0) throw ShapeError("conv2d: kernel must be square and odd");
  if (b.shape() != Shape{1, ws.n, 1, 1}) throw ShapeError("conv2d: bias shape " + b.shape().str());
  const int k = ws.h, O = ws.n;
  const auto hw = static_cast<Eigen::Index>(xs.plane());
  const auto ckk = static_cast<Eigen::Index>(xs.c) * k * k;

  Tensor out({xs.n, O, xs.h, xs.w});
  CMapMat W(w.value().data(), O, ckk);
  Eigen::Map<const Eigen::VectorXf> bias(b.value().data(), O);
  std::vector<float> col;
  for (int n = 0; n < xs.n; ++n) {
    MapMat Y(out.plane(n, 0), O, hw);
    if (k == 1) {
      Y.noalias() = W * CMapMat(x.value().plane(n, 0), xs.c, hw);
    } else {
      im2col(x.value(), n, k, col);
      Y.noalias() = W * CMapMat(col.data(), ckk, hw);
    }
    Y.colwise() += bias;
  }

  return make(std::move(out), {x, w, b}, [k, O, hw, ckk](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& wv = self.parents[1]->value;
    const bool gx = wants(self, 0), gw = wants(self, 1), gb = wants(self, 2);
    Tensor* dx = gx ? &self.parents[0]->grad_buffer() : nullptr;
    Tensor* dw = gw ? &self.parents[1]->grad_buffer() : nullptr;
    Tensor* db = gb ? &self.parents[2]->grad_buffer() : nullptr;
    CMapMat W(wv.data(), O, ckk);
    std::vector<float> col, dcol;
    for (int n = 0; n < xv.n(); ++n) {
      CMapMat dY(self.grad.plane(n, 0), O, hw);
      if (db) {
        Eigen::Map<Eigen::VectorXf> dbv(db->data(), O);
        dbv += dY.rowwise().sum();
      }
      if (dw) {
        MapMat dW(dw->data(), O, ckk);
        if (k == 1) {
          dW.noalias() += dY * CMapMat(xv.plane(n, 0), ckk, hw).transpose();
        } else {
          im2col(xv, n, k, col);
          dW.noalias() += dY * CMapMat(col.data(), ckk, hw).transpose();
        }
      }
      if (dx) {
        if (k == 1) {
          MapMat dX(dx->plane(n, 0), ckk, hw);
          dX.noalias() += W.transpose() * dY;
        } else {
          dcol.resize(static_cast<std::size_t>(ckk * hw));
          MapMat dC(dcol.data(), ckk, hw);
          dC.noalias() = W.transpose() * dY;
          col2im_add(dcol, k, *dx, n);
        }
      }
    }
  });
}

Var kernel2d(const Var& x, const Tensor& kernel, Padding pad) {
  Tensor out = apply_kernel2d(x.value(), kernel, pad);
  return make(std::move(out), {x}, [kernel, pad](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    self.parents[0]->accumulate(apply_kernel2d_adjoint(self.grad, kernel, pad, xv.h(), xv.w()));
  });
}

Var separable(const Var& x, const LinearMap1D& rows, const LinearMap1D& cols) {
  Tensor out = apply_separable(x.value(), rows, cols);
  return make(std::move(out), {x}, [rows, cols](Node& self) {
    self.parents[0]->accumulate(apply_separable_adjoint(self.grad, rows, cols));
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape s0 = parts.front().shape();
  int total = 0;
  for (const auto& p : parts) {
    const Shape s = p.shape();
    if (s.n != s0.n || s.h != s0.h || s.w != s0.w) {
      throw ShapeError("concat_channels: incompatible " + s.str() + " vs " + s0.str());
    }
    total += s.c;
  }
  Tensor out({s0.n, total, s0.h, s0.w});
  const std::size_t hw = s0.plane();
  for (int n = 0; n < s0.n; ++n) {
    float* dst = out.plane(n, 0);
    for (const auto& p : parts) {
      const float* src = p.value().plane(n, 0);
      const std::size_t len = hw * p.shape().c;
      std::copy(src, src + len, dst);
      dst += len;
    }
  }
  return make(std::move(out), parts, [hw](Node& self) {
    const int N = self.value.n();
    int offset = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const Shape ps = self.parents[k]->value.shape();
      if (wants(self, k)) {
        Tensor& g = self.parents[k]->grad_buffer();
        for (int n = 0; n < N; ++n) {
          const float* src = self.grad.plane(n, offset);
          float* dst = g.plane(n, 0);
          for (std::size_t i = 0; i < hw * ps.c; ++i) dst[i] += src[i];
        }
      }
      offset += ps.c;
    }
  });
}

Var pixel_shuffle(const Var& x, int r) {
  const Shape s = x.shape();
  if (r < 1 || s.c % (r * r) != 0) {
    throw ConfigError("pixel_shuffle: " + std::to_string(s.c) + " channels not divisible by " +
                      std::to_string(r * r));
  }
  const int C = s.c / (r * r);
  Tensor out({s.n, C, s.h * r, s.w * r});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < C; ++c)
      for (int dy = 0; dy < r; ++dy)
        for (int dx = 0; dx < r; ++dx) {
          const float* src = x.value().plane(n, c * r * r + dy * r + dx);
          for (int y = 0; y < s.h; ++y)
            for (int xx = 0; xx < s.w; ++xx) out.at(n, c, y * r + dy, xx * r + dx) = src[y * s.w + xx];
        }
  return make(std::move(out), {x}, [r, C](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const Shape s = g.shape();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < C; ++c)
        for (int dy = 0; dy < r; ++dy)
          for (int dx = 0; dx < r; ++dx) {
            float* dst = g.plane(n, c * r * r + dy * r + dx);
            for (int y = 0; y < s.h; ++y)
              for (int xx = 0; xx < s.w; ++xx)
                dst[y * s.w + xx] += self.grad.at(n, c, y * r + dy, xx * r + dx);
          }
  });
}

Var forward_diff(const Var& x, int axis) {
  const Shape s = x.shape();
  if (axis != 2 && axis != 3) throw ConfigError("forward_diff: axis must be 2 (H) or 3 (W)");
  const int dh = axis == 2 ? 1 : 0, dw = axis == 3 ? 1 : 0;
  if (s.h - dh < 1 || s.w - dw < 1) throw ShapeError("forward_diff: dimension too small");
  Tensor out({s.n, s.c, s.h - dh, s.w - dw});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < out.h(); ++y)
        for (int xx = 0; xx < out.w(); ++xx)
          out.at(n, c, y, xx) = x.value().at(n, c, y + dh, xx + dw) - x.value().at(n, c, y, xx);
  return make(std::move(out), {x}, [dh, dw](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const Shape os = self.value.shape();
    for (int n = 0; n < os.n; ++n)
      for (int c = 0; c < os.c; ++c)
        for (int y = 0; y < os.h; ++y)
          for (int xx = 0; xx < os.w; ++xx) {
            const float v = self.grad.at(n, c, y, xx);
            g.at(n, c, y + dh, xx + dw) += v;
            g.at(n, c, y, xx) -= v;
          }
  });
}

Var assemble_grid(const std::vector<Var>& patches, int rows, int cols) {
  if (rows < 1 || cols < 1 || patches.size() != static_cast<std::size_t>(rows) * cols) {
    throw ConsistencyError("assemble_grid: expected " + std::to_string(rows * cols) +
                           " patches, got " + std::to_string(patches.size()));
  }
  const Shape ps = patches.front().shape();
  for (const auto& p : patches) {
    if (p.shape() != ps) throw ShapeError("assemble_grid: patches differ in shape");
  }
  Tensor out({ps.n, ps.c, ps.h * rows, ps.w * cols});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const Tensor& src = patches[static_cast<std::size_t>(r * cols + c)].value();
      for (int n = 0; n < ps.n; ++n)
        for (int ch = 0; ch < ps.c; ++ch)
          for (int y = 0; y < ps.h; ++y) {
            const float* s = src.data() + src.index(n, ch, y, 0);
            std::copy(s, s + ps.w, out.data() + out.index(n, ch, r * ps.h + y, c * ps.w));
          }
    }
  return make(std::move(out), patches, [rows, cols, ps](Node& self) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const auto k = static_cast<std::size_t>(r * cols + c);
        if (wants(self, k)) self.parents[k]->accumulate(self.grad.window(r * ps.h, c * ps.w, ps.h, ps.w));
      }
  });
}

// ---------------------------------------------------------------------------
// Non-local aggregation.

namespace {

// (N, d, H, W) -> (P, d) with positions ordered (n, h, w).
RowMat to_positions(const Tensor& t) {
  const Shape s = t.shape();
  const auto hw = static_cast<Eigen::Index>(s.plane());
  RowMat m(static_cast<Eigen::Index>(s.n) * hw, s.c);
  for (int n = 0; n < s.n; ++n) {
    m.middleRows(n * hw, hw) = CMapMat(t.plane(n, 0), s.c, hw).transpose();
  }
  return m;
}

Tensor from_positions(const RowMat& m, Shape s) {
  Tensor t(s);
  const auto hw = static_cast<Eigen::Index>(s.plane());
  for (int n = 0; n < s.n; ++n) {
    MapMat(t.plane(n, 0), s.c, hw) = m.middleRows(n * hw, hw).transpose();
  }
  return t;
}

constexpr Eigen::Index kRowBlock = 256;

void softmax_rows(RowMat& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    const float mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

}  // namespace

Var nonlocal_aggregate(const Var& a, const Var& b, const Var& g, Affinity kind, const Var& w_a,
                       const Var& w_b) {
  const Shape as = a.shape(), bs = b.shape(), gs = g.shape();
  if (as.c != bs.c || as.n != bs.n || as.h != bs.h || as.w != bs.w || gs.n != as.n ||
      gs.h != as.h || gs.w != as.w) {
    throw ShapeError("nonlocal_aggregate: incompatible inputs " + as.str() + " " + bs.str() + " " +
                     gs.str());
  }
  const bool concat = kind == Affinity::concatenation;
  if (concat && (!w_a || !w_b || w_a.shape() != Shape{1, as.c, 1, 1} ||
                 w_b.shape() != Shape{1, bs.c, 1, 1})) {
    throw ConfigError("nonlocal_aggregate: concatenation affinity needs (1, d, 1, 1) weights");
  }

  const RowMat A = to_positions(a.value());
  const RowMat B = to_positions(b.value());
  const RowMat G = to_positions(g.value());
  const Eigen::Index P = A.rows();
  const float inv_p = 1.0f / static_cast<float>(P);
  RowMat Y(P, G.cols());

  Eigen::VectorXf u, v;
  if (concat) {
    u = A * Eigen::Map<const Eigen::VectorXf>(w_a.value().data(), as.c);
    v = B * Eigen::Map<const Eigen::VectorXf>(w_b.value().data(), bs.c);
  }

  switch (kind) {
    case Affinity::dot_product: {
      const RowMat M = B.transpose() * G;
      Y.noalias() = A * M * inv_p;
      break;
    }
    case Affinity::gaussian:
    case Affinity::embedded_gaussian:
      for (Eigen::Index r0 = 0; r0 < P; r0 += kRowBlock) {
        const Eigen::Index rb = std::min(kRowBlock, P - r0);
        RowMat S = A.middleRows(r0, rb) * B.transpose();
        softmax_rows(S);
        Y.middleRows(r0, rb).noalias() = S * G;
      }
      break;
    case Affinity::concatenation:
      for (Eigen::Index r0 = 0; r0 < P; r0 += kRowBlock) {
        const Eigen::Index rb = std::min(kRowBlock, P - r0);
        RowMat F = (u.segment(r0, rb).replicate(1, P).rowwise() + v.transpose()).cwiseMax(0.0f);
        Y.middleRows(r0, rb).noalias() = F * G * inv_p;
      }
      break;
  }

  std::vector<Var> parents{a, b, g};
  if (concat) {
    parents.push_back(w_a);
    parents.push_back(w_b);
  }
  return make(from_positions(Y, {gs.n, gs.c, gs.h, gs.w}), parents,
              [kind, inv_p](Node& self) {
                const Tensor& av = self.parents[0]->value;
                const Tensor& bv = self.parents[1]->value;
                const Tensor& gv = self.parents[2]->value;
                const RowMat A = to_positions(av);
                const RowMat B = to_positions(bv);
                const RowMat G = to_positions(gv);
                const RowMat dY = to_positions(self.grad);
                const Eigen::Index P = A.rows();
                RowMat dA = RowMat::Zero(P, A.cols());
                RowMat dB = RowMat::Zero(P, B.cols());
                RowMat dG = RowMat::Zero(P, G.cols());

                if (kind == Affinity::dot_product) {
                  const RowMat M = B.transpose() * G;
                  dA.noalias() = dY * M.transpose() * inv_p;
                  const RowMat dM = A.transpose() * dY * inv_p;
                  dB.noalias() = G * dM.transpose();
                  dG.noalias() = B * dM;
                } else if (kind == Affinity::concatenation) {
                  const Tensor& wav = self.parents[3]->value;
                  const Tensor& wbv = self.parents[4]->value;
                  Eigen::Map<const Eigen::VectorXf> wa(wav.data(), A.cols());
                  Eigen::Map<const Eigen::VectorXf> wb(wbv.data(), B.cols());
                  const Eigen::VectorXf u = A * wa;
                  const Eigen::VectorXf v = B * wb;
                  Eigen::VectorXf du = Eigen::VectorXf::Zero(P), dv = Eigen::VectorXf::Zero(P);
                  for (Eigen::Index r0 = 0; r0 < P; r0 += kRowBlock) {
                    const Eigen::Index rb = std::min(kRowBlock, P - r0);
                    RowMat S = u.segment(r0, rb).replicate(1, P).rowwise() + v.transpose();
                    const RowMat F = S.cwiseMax(0.0f);
                    RowMat dF = dY.middleRows(r0, rb) * G.transpose() * inv_p;
                    dF = (S.array() > 0.0f).select(dF, 0.0f);
                    du.segment(r0, rb) = dF.rowwise().sum();
                    dv += dF.colwise().sum().transpose();
                    dG.noalias() += F.transpose() * dY.middleRows(r0, rb) * inv_p;
                  }
                  dA.noalias() = du * wa.transpose();
                  dB.noalias() = dv * wb.transpose();
                  if (wants(self, 3)) {
                    Tensor gw(wav.shape());
                    Eigen::Map<Eigen::VectorXf>(gw.data(), A.cols()) = A.transpose() * du;
                    self.parents[3]->accumulate(gw);
                  }
                  if (wants(self, 4)) {
                    Tensor gw(wbv.shape());
                    Eigen::Map<Eigen::VectorXf>(gw.data(), B.cols()) = B.transpose() * dv;
                    self.parents[4]->accumulate(gw);
                  }
                } else {
                  for (Eigen::Index r0 = 0; r0 < P; r0 += kRowBlock) {
                    const Eigen::Index rb = std::min(kRowBlock, P - r0);
                    RowMat S = A.middleRows(r0, rb) * B.transpose();
                    softmax_rows(S);
                    const auto dYb = dY.middleRows(r0, rb);
                    dG.noalias() += S.transpose() * dYb;
                    RowMat dS = dYb * G.transpose();
                    const Eigen::VectorXf rowdot = (dS.array() * S.array()).rowwise().sum();
                    dS = S.array() * (dS.colwise() - rowdot).array();
                    dA.middleRows(r0, rb).noalias() = dS * B;
                    dB.noalias() += dS.transpose() * A.middleRows(r0, rb);
                  }
                }
                if (wants(self, 0)) self.parents[0]->accumulate(from_positions(dA, av.shape()));
                if (wants(self, 1)) self.parents[1]->accumulate(from_positions(dB, bv.shape()));
                if (wants(self, 2)) self.parents[2]->accumulate(from_positions(dG, gv.shape()));
              });
}

}  // namespace vsrlab::ag
