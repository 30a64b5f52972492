#include "facestyle/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "facestyle/error.hpp"

namespace facestyle::ad {

namespace {

using NodePtr = std::shared_ptr<Node>;

Var make_result(Array value, Shape shape, std::vector<Var> inputs,
                std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->shape = std::move(shape);
  for (const auto& in : inputs) {
    if (in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(a.shape()));
  }
}

SpatialShape spatial(const Var& x, const char* op) {
  require_rank(x, 3, op);
  return {x.dim(0), x.dim(1), x.dim(2)};
}

// Applies f elementwise with derivative df(x, y) evaluated on input and output.
template <typename F, typename DF>
Var unary(const Var& x, F f, DF df) {
  Array out = x.value().unaryExpr(f);
  NodePtr in = x.node();
  return make_result(out, x.shape(), {x}, [in, df](Node& self) {
    if (!in->requires_grad) return;
    in->grad_buffer() += self.grad * in->value.binaryExpr(self.value, df);
  });
}

}  // namespace

int numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), 1, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Array& Node::grad_buffer() {
  if (grad.size() != value.size()) grad = Array::Zero(value.size());
  return grad;
}

Var Var::constant(Array value, Shape shape) {
  if (numel(shape) != value.size()) {
    throw ShapeError("constant: value size " + std::to_string(value.size()) +
                     " does not match shape " + shape_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->shape = std::move(shape);
  return Var(std::move(node));
}

Var Var::parameter(Array value, Shape shape) {
  Var v = constant(std::move(value), std::move(shape));
  v.set_requires_grad(true);
  return v;
}

double Var::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar " + shape_string(shape()));
  return node_->value(0);
}

Array Var::grad() const {
  if (node_->grad.size() != node_->value.size()) return Array::Zero(node_->value.size());
  return node_->grad;
}

Eigen::Map<const RowMatrix> Var::matrix() const {
  require_rank(*this, 2, "matrix");
  return {node_->value.data(), dim(0), dim(1)};
}

void Var::backward() const {
  if (size() != 1) throw ShapeError("backward() requires a scalar root");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer() += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
  // Interior gradients are not needed once propagated.
  for (Node* n : order) {
    if (n->backward) n->grad.resize(0);
  }
}

Var detach(const Var& x) { return Var::constant(x.value(), x.shape()); }

Var reshape(const Var& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  NodePtr in = x.node();
  return make_result(x.value(), std::move(shape), {x}, [in](Node& self) {
    in->grad_buffer() += self.grad;
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  NodePtr na = a.node(), nb = b.node();
  return make_result(a.value() + b.value(), a.shape(), {a, b}, [na, nb](Node& self) {
    if (na->requires_grad) na->grad_buffer() += self.grad;
    if (nb->requires_grad) nb->grad_buffer() += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  NodePtr na = a.node(), nb = b.node();
  return make_result(a.value() - b.value(), a.shape(), {a, b}, [na, nb](Node& self) {
    if (na->requires_grad) na->grad_buffer() += self.grad;
    if (nb->requires_grad) nb->grad_buffer() -= self.grad;
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  NodePtr na = a.node(), nb = b.node();
  return make_result(a.value() * b.value(), a.shape(), {a, b}, [na, nb](Node& self) {
    if (na->requires_grad) na->grad_buffer() += self.grad * nb->value;
    if (nb->requires_grad) nb->grad_buffer() += self.grad * na->value;
  });
}

Var scale(const Var& a, double s) {
  NodePtr na = a.node();
  return make_result(a.value() * s, a.shape(), {a}, [na, s](Node& self) {
    na->grad_buffer() += self.grad * s;
  });
}

Var add_scalar(const Var& a, double s) {
  NodePtr na = a.node();
  return make_result(a.value() + s, a.shape(), {a}, [na](Node& self) {
    na->grad_buffer() += self.grad;
  });
}

Var mul_scalar(const Var& a, const Var& s) {
  if (s.size() != 1) throw ShapeError("mul_scalar: scale must have one element");
  NodePtr na = a.node(), ns = s.node();
  return make_result(a.value() * s.value()(0), a.shape(), {a, s}, [na, ns](Node& self) {
    if (na->requires_grad) na->grad_buffer() += self.grad * ns->value(0);
    if (ns->requires_grad) ns->grad_buffer()(0) += (self.grad * na->value).sum();
  });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v > 0 ? v : 0.0; },
      [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& x, double slope) {
  return unary(
      x, [slope](double v) { return v > 0 ? v : slope * v; },
      [slope](double v, double) { return v > 0 ? 1.0 : slope; });
}

Var sigmoid(const Var& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var silu(const Var& x) {
  return unary(
      x, [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v, double) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

Var square(const Var& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var abs(const Var& x) {
  return unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Var sqrt(const Var& x) {
  return unary(
      x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return y > 0 ? 0.5 / y : 0.0; });
}

Var log_clamped(const Var& x, double lo) {
  return unary(
      x, [lo](double v) { return std::log(std::clamp(v, lo, 1.0)); },
      [lo](double v, double) { return (v >= lo && v <= 1.0) ? 1.0 / v : 0.0; });
}

Var sum(const Var& x) {
  NodePtr in = x.node();
  return make_result(Array::Constant(1, x.value().sum()), {1}, {x}, [in](Node& self) {
    in->grad_buffer() += self.grad(0);
  });
}

Var mean(const Var& x) {
  NodePtr in = x.node();
  const double n = static_cast<double>(x.size());
  return make_result(Array::Constant(1, x.value().mean()), {1}, {x}, [in, n](Node& self) {
    in->grad_buffer() += self.grad(0) / n;
  });
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const int m = a.dim(0), n = b.dim(1);
  Array out(m * n);
  Eigen::Map<RowMatrix>(out.data(), m, n).noalias() = a.matrix() * b.matrix();
  NodePtr na = a.node(), nb = b.node();
  return make_result(std::move(out), {m, n}, {a, b}, [na, nb](Node& self) {
    const int m = na->shape[0], k = na->shape[1], n = nb->shape[1];
    Eigen::Map<const RowMatrix> g(self.grad.data(), m, n);
    if (na->requires_grad) {
      Eigen::Map<RowMatrix>(na->grad_buffer().data(), m, k).noalias() +=
          g * Eigen::Map<const RowMatrix>(nb->value.data(), k, n).transpose();
    }
    if (nb->requires_grad) {
      Eigen::Map<RowMatrix>(nb->grad_buffer().data(), k, n).noalias() +=
          Eigen::Map<const RowMatrix>(na->value.data(), m, k).transpose() * g;
    }
  });
}

Var add_row_bias(const Var& a, const Var& bias) {
  require_rank(a, 2, "add_row_bias");
  if (bias.size() != a.dim(1)) throw ShapeError("add_row_bias: bias length mismatch");
  const int m = a.dim(0), n = a.dim(1);
  Array out = a.value();
  Eigen::Map<RowMatrix>(out.data(), m, n).rowwise() +=
      Eigen::Map<const Eigen::RowVectorXd>(bias.value().data(), n);
  NodePtr na = a.node(), nb = bias.node();
  return make_result(std::move(out), a.shape(), {a, bias}, [na, nb, m, n](Node& self) {
    if (na->requires_grad) na->grad_buffer() += self.grad;
    if (nb->requires_grad) {
      Eigen::Map<Eigen::RowVectorXd>(nb->grad_buffer().data(), n) +=
          Eigen::Map<const RowMatrix>(self.grad.data(), m, n).colwise().sum();
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int m = parts.front().dim(0);
  int n = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != m) throw ShapeError("concat_cols: row count mismatch");
    n += p.dim(1);
  }
  Array out(m * n);
  Eigen::Map<RowMatrix> om(out.data(), m, n);
  int col = 0;
  std::vector<NodePtr> nodes;
  std::vector<int> offsets;
  for (const auto& p : parts) {
    om.middleCols(col, p.dim(1)) = p.matrix();
    nodes.push_back(p.node());
    offsets.push_back(col);
    col += p.dim(1);
  }
  return make_result(std::move(out), {m, n}, parts, [nodes, offsets, m, n](Node& self) {
    Eigen::Map<const RowMatrix> g(self.grad.data(), m, n);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i]->requires_grad) continue;
      const int w = nodes[i]->shape[1];
      Eigen::Map<RowMatrix>(nodes[i]->grad_buffer().data(), m, w) += g.middleCols(offsets[i], w);
    }
  });
}

Var row(const Var& a, int i) {
  require_rank(a, 2, "row");
  if (i < 0 || i >= a.dim(0)) throw IndexError("row index " + std::to_string(i));
  const int n = a.dim(1);
  NodePtr na = a.node();
  return make_result(a.value().segment(i * n, n), {1, n}, {a}, [na, i, n](Node& self) {
    na->grad_buffer().segment(i * n, n) += self.grad;
  });
}

Var left_matmul_const(const RowMatrix& m, const Var& a) {
  require_rank(a, 2, "left_matmul_const");
  if (m.cols() != a.dim(0)) throw ShapeError("left_matmul_const: inner dimension mismatch");
  const int rows = static_cast<int>(m.rows()), cols = a.dim(1);
  Array out(rows * cols);
  Eigen::Map<RowMatrix>(out.data(), rows, cols).noalias() = m * a.matrix();
  NodePtr na = a.node();
  return make_result(std::move(out), {rows, cols}, {a}, [na, m, rows, cols](Node& self) {
    Eigen::Map<RowMatrix>(na->grad_buffer().data(), m.cols(), cols).noalias() +=
        m.transpose() * Eigen::Map<const RowMatrix>(self.grad.data(), rows, cols);
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape tail(parts.front().shape().begin() + 1, parts.front().shape().end());
  int lead = 0, total = 0;
  for (const auto& p : parts) {
    if (Shape(p.shape().begin() + 1, p.shape().end()) != tail) {
      throw ShapeError("concat: trailing shape mismatch");
    }
    lead += p.dim(0);
    total += p.size();
  }
  Array out(total);
  std::vector<NodePtr> nodes;
  std::vector<int> offsets;
  int off = 0;
  for (const auto& p : parts) {
    out.segment(off, p.size()) = p.value();
    nodes.push_back(p.node());
    offsets.push_back(off);
    off += p.size();
  }
  Shape shape = tail;
  shape.insert(shape.begin(), lead);
  return make_result(std::move(out), shape, parts, [nodes, offsets](Node& self) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i]->requires_grad) continue;
      nodes[i]->grad_buffer() += self.grad.segment(offsets[i], nodes[i]->value.size());
    }
  });
}

namespace {

// Unfolds (C, H, W) into (C*k*k, Ho*Wo) columns with zero padding.
void im2col(const double* x, SpatialShape s, int k, int stride, int pad, int ho, int wo,
            RowMatrix& cols) {
  cols.setZero(s.channels * k * k, ho * wo);
  for (int c = 0; c < s.channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = cols.row((c * k + ky) * k + kx).data();
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= s.height) continue;
          const double* src = x + (c * s.height + iy) * s.width;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < s.width) dst[oy * wo + ox] = src[ix];
          }
        }
      }
    }
  }
}

void col2im(const RowMatrix& cols, SpatialShape s, int k, int stride, int pad, int ho, int wo,
            double* x) {
  for (int c = 0; c < s.channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = cols.row((c * k + ky) * k + kx).data();
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= s.height) continue;
          double* dst = x + (c * s.height + iy) * s.width;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < s.width) dst[ix] += src[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const SpatialShape s = spatial(x, "conv2d");
  require_rank(weight, 4, "conv2d weight");
  const int out_ch = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != s.channels || weight.dim(3) != k) {
    throw ShapeError("conv2d: weight " + shape_string(weight.shape()) + " for input " +
                     shape_string(x.shape()));
  }
  if (bias.size() != out_ch) throw ShapeError("conv2d: bias length mismatch");
  const int ho = (s.height + 2 * pad - k) / stride + 1;
  const int wo = (s.width + 2 * pad - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ShapeError("conv2d: empty output");

  auto cols = std::make_shared<RowMatrix>();
  im2col(x.value().data(), s, k, stride, pad, ho, wo, *cols);
  const int kk = s.channels * k * k;
  Array out(out_ch * ho * wo);
  Eigen::Map<RowMatrix> om(out.data(), out_ch, ho * wo);
  om.noalias() = Eigen::Map<const RowMatrix>(weight.value().data(), out_ch, kk) * *cols;
  om.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.value().data(), out_ch);

  NodePtr nx = x.node(), nw = weight.node(), nb = bias.node();
  return make_result(
      std::move(out), {out_ch, ho, wo}, {x, weight, bias},
      [nx, nw, nb, cols, s, k, stride, pad, ho, wo, out_ch, kk](Node& self) {
        Eigen::Map<const RowMatrix> g(self.grad.data(), out_ch, ho * wo);
        if (nb->requires_grad) {
          Eigen::Map<Eigen::VectorXd>(nb->grad_buffer().data(), out_ch) += g.rowwise().sum();
        }
        if (nw->requires_grad) {
          Eigen::Map<RowMatrix>(nw->grad_buffer().data(), out_ch, kk).noalias() +=
              g * cols->transpose();
        }
        if (nx->requires_grad) {
          RowMatrix dcols =
              Eigen::Map<const RowMatrix>(nw->value.data(), out_ch, kk).transpose() * g;
          col2im(dcols, s, k, stride, pad, ho, wo, nx->grad_buffer().data());
        }
      });
}

Var upsample2x(const Var& x) {
  const SpatialShape s = spatial(x, "upsample2x");
  const int h2 = 2 * s.height, w2 = 2 * s.width;
  Array out(s.channels * h2 * w2);
  for (int c = 0; c < s.channels; ++c)
    for (int y = 0; y < h2; ++y)
      for (int xx = 0; xx < w2; ++xx)
        out((c * h2 + y) * w2 + xx) = x.value()((c * s.height + y / 2) * s.width + xx / 2);
  NodePtr nx = x.node();
  return make_result(std::move(out), {s.channels, h2, w2}, {x}, [nx, s, h2, w2](Node& self) {
    Array& g = nx->grad_buffer();
    for (int c = 0; c < s.channels; ++c)
      for (int y = 0; y < h2; ++y)
        for (int xx = 0; xx < w2; ++xx)
          g((c * s.height + y / 2) * s.width + xx / 2) += self.grad((c * h2 + y) * w2 + xx);
  });
}

Var avgpool2x(const Var& x) {
  const SpatialShape s = spatial(x, "avgpool2x");
  if (s.height % 2 || s.width % 2) throw ShapeError("avgpool2x: odd spatial size");
  const int h2 = s.height / 2, w2 = s.width / 2;
  Array out = Array::Zero(s.channels * h2 * w2);
  for (int c = 0; c < s.channels; ++c)
    for (int y = 0; y < s.height; ++y)
      for (int xx = 0; xx < s.width; ++xx)
        out((c * h2 + y / 2) * w2 + xx / 2) += 0.25 * x.value()((c * s.height + y) * s.width + xx);
  NodePtr nx = x.node();
  return make_result(std::move(out), {s.channels, h2, w2}, {x}, [nx, s, h2, w2](Node& self) {
    Array& g = nx->grad_buffer();
    for (int c = 0; c < s.channels; ++c)
      for (int y = 0; y < s.height; ++y)
        for (int xx = 0; xx < s.width; ++xx)
          g((c * s.height + y) * s.width + xx) += 0.25 * self.grad((c * h2 + y / 2) * w2 + xx / 2);
  });
}

Var global_avg_pool(const Var& x) {
  const SpatialShape s = spatial(x, "global_avg_pool");
  Array out(s.channels);
  for (int c = 0; c < s.channels; ++c) out(c) = x.value().segment(c * s.plane(), s.plane()).mean();
  NodePtr nx = x.node();
  return make_result(std::move(out), {1, s.channels}, {x}, [nx, s](Node& self) {
    Array& g = nx->grad_buffer();
    for (int c = 0; c < s.channels; ++c)
      g.segment(c * s.plane(), s.plane()) += self.grad(c) / s.plane();
  });
}

Var adain(const Var& x, const Var& scale, const Var& bias, double eps) {
  const SpatialShape s = spatial(x, "adain");
  if (scale.size() != s.channels || bias.size() != s.channels) {
    throw ShapeError("adain: " + std::to_string(s.channels) + " channels but params of length " +
                     std::to_string(scale.size()) + "/" + std::to_string(bias.size()));
  }
  Array out;
  auto normalized = std::make_shared<Array>();
  auto inv_std = std::make_shared<Array>();
  kernels::adain_forward<double>(x.value(), s, scale.value(), bias.value(), eps, out,
                                 *normalized, *inv_std);
  NodePtr nx = x.node(), ns = scale.node(), nb = bias.node();
  return make_result(std::move(out), x.shape(), {x, scale, bias},
                     [nx, ns, nb, normalized, inv_std, s](Node& self) {
                       kernels::adain_backward<double>(
                           self.grad, s, ns->value, *normalized, *inv_std,
                           nx->requires_grad ? &nx->grad_buffer() : nullptr,
                           ns->requires_grad ? &ns->grad_buffer() : nullptr,
                           nb->requires_grad ? &nb->grad_buffer() : nullptr);
                     });
}

Var warp(const Var& m, const Var& flow) {
  const SpatialShape s = spatial(m, "warp");
  if (flow.shape() != Shape{s.height, s.width, 2}) {
    throw ShapeError("warp: flow " + shape_string(flow.shape()) + " for feature map " +
                     shape_string(m.shape()));
  }
  Array out;
  kernels::warp_forward<double>(m.value(), s, flow.value(), out);
  NodePtr nm = m.node(), nf = flow.node();
  return make_result(std::move(out), m.shape(), {m, flow}, [nm, nf, s](Node& self) {
    kernels::warp_backward<double>(self.grad, nm->value, s, nf->value,
                                   nm->requires_grad ? &nm->grad_buffer() : nullptr,
                                   nf->requires_grad ? &nf->grad_buffer() : nullptr);
  });
}

Var planes_to_flow(const Var& x) {
  const SpatialShape s = spatial(x, "planes_to_flow");
  if (s.channels != 2) throw ShapeError("planes_to_flow: expected 2 channels");
  const int plane = s.plane();
  Array out(2 * plane);
  for (int p = 0; p < plane; ++p) {
    out(2 * p) = x.value()(p);
    out(2 * p + 1) = x.value()(plane + p);
  }
  NodePtr nx = x.node();
  return make_result(std::move(out), {s.height, s.width, 2}, {x}, [nx, plane](Node& self) {
    Array& g = nx->grad_buffer();
    for (int p = 0; p < plane; ++p) {
      g(p) += self.grad(2 * p);
      g(plane + p) += self.grad(2 * p + 1);
    }
  });
}

}  // namespace facestyle::ad
