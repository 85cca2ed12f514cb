#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vsrlab/resample.hpp"
#include "vsrlab/tensor.hpp"

// Tape-free reverse-mode differentiation over Tensor values. Every op builds a
// node holding its value, its parents and a closure that pushes the node's
// gradient into the parents. Nodes whose inputs need no gradient carry no
// closure, so inference graphs cost nothing beyond the values themselves.
namespace vsrlab::ag {

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
  void accumulate(const Tensor& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  [[nodiscard]] const Tensor& value() const { return node_->value; }
  // Direct write access; only meaningful on leaves (parameters, inputs).
  [[nodiscard]] Tensor& mutable_value() { return node_->value; }
  [[nodiscard]] const Shape& shape() const { return node_->value.shape(); }
  [[nodiscard]] bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  // Zero-filled tensor of the value's shape when no gradient arrived yet.
  [[nodiscard]] Tensor grad() const;
  [[nodiscard]] bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad = Tensor(); }
  [[nodiscard]] Node* node() const { return node_.get(); }
  [[nodiscard]] const std::shared_ptr<Node>& ptr() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Tensor t);
Var parameter(Tensor t);
// Same value, cut from the graph.
Var detach(const Var& x);

// Reverse pass from a scalar root (seed 1) or with an explicit seed.
void backward(const Var& root);
void backward(const Var& root, const Tensor& seed);

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, float s);
Var add_scalar(const Var& a, float s);
Var axpby(const Var& a, float alpha, const Var& b, float beta);
Var square(const Var& a);
Var sqrt(const Var& a);
Var abs(const Var& a);
Var leaky_relu(const Var& a, float slope);
Var relu(const Var& a);
Var clamp(const Var& a, float lo, float hi);
Var softplus(const Var& a);

// Reductions to a (1,1,1,1) scalar. Accumulated in double.
Var mean(const Var& a);
Var sum(const Var& a);

// Convolution, stride 1, odd square kernel, edge-replicate padding so the
// spatial size is preserved. w: (out, in, k, k); b: (1, out, 1, 1).
Var conv2d(const Var& x, const Var& w, const Var& b);

// Fixed (non-learned) per-plane filters.
Var kernel2d(const Var& x, const Tensor& kernel, Padding pad);
Var separable(const Var& x, const LinearMap1D& rows, const LinearMap1D& cols);

Var concat_channels(const std::vector<Var>& parts);
// Depth-to-space: out[c][r*h+dy][r*w+dx] = in[c*r*r + dy*r + dx][h][w].
Var pixel_shuffle(const Var& x, int factor);
// Forward difference along W (axis 3) or H (axis 2); that dimension shrinks by 1.
Var forward_diff(const Var& x, int axis);
// Places rows*cols equally sized patches (row-major order) into one tensor.
Var assemble_grid(const std::vector<Var>& patches, int rows, int cols);

// Non-local aggregation over every position (n, h, w) of the inputs.
enum class Affinity { gaussian, embedded_gaussian, dot_product, concatenation };

// y_i = (1/C) sum_j f(a_i, b_j) g_j. For the exponential affinities C is the
// softmax denominator; for dot product and concatenation C is the number of
// positions. `w_a`, `w_b` are the (1, d, 1, 1) halves of the concatenation
// weight vector and are ignored by the other kinds.
Var nonlocal_aggregate(const Var& a, const Var& b, const Var& g, Affinity kind,
                       const Var& w_a = {}, const Var& w_b = {});

}  // namespace vsrlab::ag
