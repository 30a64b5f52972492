#pragma once

// Minimal reverse-mode automatic differentiation over dense double arrays.
//
// A Var is a reference-counted handle to a node holding a flat, row-major
// value and its gradient. Ops record a backward closure only when at least
// one input requires a gradient, so inference graphs carry no tape.

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "facestyle/feature_ops.hpp"

namespace facestyle::ad {

using Shape = std::vector<int>;
using Array = Eigen::ArrayXd;
using RowMatrix = RowMatrixX<double>;

int numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node {
  Array value;
  Array grad;
  Shape shape;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Array& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Array value, Shape shape);
  static Var parameter(Array value, Shape shape);
  static Var scalar(double v) { return constant(Array::Constant(1, v), {1}); }

  bool defined() const { return node_ != nullptr; }
  const Array& value() const { return node_->value; }
  Array& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape.at(i); }
  int size() const { return static_cast<int>(node_->value.size()); }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  // Gradient accumulated by backward(); zeros if the node was not reached.
  Array grad() const;
  void zero_grad() { node_->grad.resize(0); }

  // Seeds d(this)/d(this) = 1 and propagates to every reachable node.
  void backward() const;

  // Row-major view of a 2-D value.
  Eigen::Map<const RowMatrix> matrix() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Value copy cut off from the graph.
Var detach(const Var& x);
Var reshape(const Var& x, Shape shape);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// a * s where s is a one-element Var.
Var mul_scalar(const Var& a, const Var& s);

Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope = 0.2);
Var sigmoid(const Var& x);
Var tanh(const Var& x);
// x * sigmoid(x)
Var silu(const Var& x);
Var square(const Var& x);
Var abs(const Var& x);
// Square root with a zero subgradient at 0.
Var sqrt(const Var& x);
// log(clamp(x, lo, 1)); used on probabilities.
Var log_clamped(const Var& x, double lo);

Var sum(const Var& x);
Var mean(const Var& x);

// 2-D ops; shapes are (rows, cols).
Var matmul(const Var& a, const Var& b);
Var add_row_bias(const Var& a, const Var& bias);
Var concat_cols(const std::vector<Var>& parts);
Var row(const Var& a, int i);
// Left-multiplies by a constant matrix: m * a.
Var left_matmul_const(const RowMatrix& m, const Var& a);

// Concatenation along the leading axis; trailing dims must agree.
Var concat(const std::vector<Var>& parts);

// Feature map ops on (C, H, W).
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
Var upsample2x(const Var& x);
Var avgpool2x(const Var& x);
Var global_avg_pool(const Var& x);
Var adain(const Var& x, const Var& scale, const Var& bias, double eps);
// Flow is (H, W, 2) with (dx, dy) in pixels.
Var warp(const Var& m, const Var& flow);
// (2, H, W) channel planes -> (H, W, 2) flow layout.
Var planes_to_flow(const Var& x);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace facestyle::ad
