// Copyright 2026 The AVLoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "avloc/resize.hpp"
#include "avloc/types.hpp"

// Reverse-mode gradient tape over dense Eigen matrices. Graphs are built
// eagerly by free functions and torn down with the Vars that reference them;
// there is no global state, so independent graphs can be built concurrently.
namespace avloc::ad {

template <typename Scalar>
struct Node {
  Mat<Scalar> value;
  Mat<Scalar> grad;  // sized lazily on first accumulation
  bool needs_grad = false;
  std::vector<std::shared_ptr<Node<Scalar>>> parents;
  // Reads this->grad, accumulates into parents' grads.
  std::function<void(Node<Scalar>&)> backprop;

  void accumulate(const Mat<Scalar>& delta) {
    if (grad.size() == 0)
      grad = Mat<Scalar>::Zero(value.rows(), value.cols());
    grad += delta;
  }
};

template <typename Scalar>
class Var {
 public:
  using NodePtr = std::shared_ptr<Node<Scalar>>;

  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  static Var constant(Mat<Scalar> v) {
    auto n = std::make_shared<Node<Scalar>>();
    n->value = std::move(v);
    return Var(n);
  }

  static Var leaf(Mat<Scalar> v) {
    auto n = std::make_shared<Node<Scalar>>();
    n->value = std::move(v);
    n->needs_grad = true;
    return Var(n);
  }

  static Var scalar_constant(Scalar s) {
    Mat<Scalar> m(1, 1);
    m(0, 0) = s;
    return constant(std::move(m));
  }

  bool valid() const { return node_ != nullptr; }
  const Mat<Scalar>& value() const { return node_->value; }
  Scalar scalar() const { return node_->value(0, 0); }
  const Mat<Scalar>& grad() const { return node_->grad; }
  Mat<Scalar> grad_or_zero() const {
    if (node_->grad.size() == 0)
      return Mat<Scalar>::Zero(node_->value.rows(), node_->value.cols());
    return node_->grad;
  }
  bool needs_grad() const { return node_->needs_grad; }
  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

namespace detail {

template <typename Scalar>
Var<Scalar> make_op(Mat<Scalar> value,
                    std::vector<typename Var<Scalar>::NodePtr> parents,
                    std::function<void(Node<Scalar>&)> backprop) {
  auto n = std::make_shared<Node<Scalar>>();
  n->value = std::move(value);
  for (const auto& p : parents) n->needs_grad |= p->needs_grad;
  if (n->needs_grad) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return Var<Scalar>(n);
}

}  // namespace detail

// Custom-op escape hatch for fused kernels.
template <typename Scalar>
Var<Scalar> make_node(Mat<Scalar> value,
                      std::vector<Var<Scalar>> parents,
                      std::function<void(Node<Scalar>&)> backprop) {
  std::vector<typename Var<Scalar>::NodePtr> ps;
  ps.reserve(parents.size());
  for (auto& p : parents) ps.push_back(p.node());
  return detail::make_op<Scalar>(std::move(value), std::move(ps),
                                 std::move(backprop));
}

// Seeds d(root)/d(root) = 1 and sweeps the tape in reverse topological order.
// root must be 1x1.
template <typename Scalar>
void backward(const Var<Scalar>& root) {
  if (root.value().size() != 1)
    throw ValidationError("backward: root must be a scalar");
  if (!root.needs_grad()) return;

  using NodeT = Node<Scalar>;
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> seen;
  struct Frame {
    NodeT* n;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.node().get(), 0});
  seen.insert(root.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.n->parents.size()) {
      NodeT* p = f.n->parents[f.next_parent++].get();
      if (p->needs_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  root.node()->grad = Mat<Scalar>::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* n = *it;
    if (n->backprop && n->grad.size() != 0) n->backprop(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise and linear ops
// ---------------------------------------------------------------------------

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  return detail::make_op<Scalar>(
      a.value() + b.value(), {a.node(), b.node()}, [](Node<Scalar>& n) {
        if (n.parents[0]->needs_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->needs_grad) n.parents[1]->accumulate(n.grad);
      });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  return detail::make_op<Scalar>(
      a.value() - b.value(), {a.node(), b.node()}, [](Node<Scalar>& n) {
        if (n.parents[0]->needs_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->needs_grad) n.parents[1]->accumulate(-n.grad);
      });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  return detail::make_op<Scalar>(
      (a.value().array() * s).matrix(), {a.node()}, [s](Node<Scalar>& n) {
        n.parents[0]->accumulate((n.grad.array() * s).matrix());
      });
}

template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar s) {
  return detail::make_op<Scalar>(
      (a.value().array() + s).matrix(), {a.node()},
      [](Node<Scalar>& n) { n.parents[0]->accumulate(n.grad); });
}

// Elementwise product.
template <typename Scalar>
Var<Scalar> cmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  return detail::make_op<Scalar>(
      (a.value().array() * b.value().array()).matrix(),
      {a.node(), b.node()}, [](Node<Scalar>& n) {
        if (n.parents[0]->needs_grad)
          n.parents[0]->accumulate(
              (n.grad.array() * n.parents[1]->value.array()).matrix());
        if (n.parents[1]->needs_grad)
          n.parents[1]->accumulate(
              (n.grad.array() * n.parents[0]->value.array()).matrix());
      });
}

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  return detail::make_op<Scalar>(
      a.value() * b.value(), {a.node(), b.node()}, [](Node<Scalar>& n) {
        if (n.parents[0]->needs_grad)
          n.parents[0]->accumulate(n.grad * n.parents[1]->value.transpose());
        if (n.parents[1]->needs_grad)
          n.parents[1]->accumulate(n.parents[0]->value.transpose() * n.grad);
      });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  return detail::make_op<Scalar>(
      a.value().transpose(), {a.node()}, [](Node<Scalar>& n) {
        n.parents[0]->accumulate(n.grad.transpose());
      });
}

// s * a, where s is a 1x1 Var.
template <typename Scalar>
Var<Scalar> smul(const Var<Scalar>& s, const Var<Scalar>& a) {
  if (s.value().size() != 1) throw ValidationError("smul: s must be 1x1");
  return detail::make_op<Scalar>(
      (a.value().array() * s.scalar()).matrix(), {s.node(), a.node()},
      [](Node<Scalar>& n) {
        if (n.parents[0]->needs_grad) {
          Mat<Scalar> g(1, 1);
          g(0, 0) = (n.grad.array() * n.parents[1]->value.array()).sum();
          n.parents[0]->accumulate(g);
        }
        if (n.parents[1]->needs_grad)
          n.parents[1]->accumulate(
              (n.grad.array() * n.parents[0]->value(0, 0)).matrix());
      });
}

// a + s (broadcast), where s is a 1x1 Var.
template <typename Scalar>
Var<Scalar> sadd(const Var<Scalar>& a, const Var<Scalar>& s) {
  if (s.value().size() != 1) throw ValidationError("sadd: s must be 1x1");
  return detail::make_op<Scalar>(
      (a.value().array() + s.scalar()).matrix(), {a.node(), s.node()},
      [](Node<Scalar>& n) {
        if (n.parents[0]->needs_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->needs_grad) {
          Mat<Scalar> g(1, 1);
          g(0, 0) = n.grad.sum();
          n.parents[1]->accumulate(g);
        }
      });
}

// m + b broadcast over columns; b is rows x 1.
template <typename Scalar>
Var<Scalar> add_col_broadcast(const Var<Scalar>& m, const Var<Scalar>& b) {
  if (b.value().cols() != 1 || b.value().rows() != m.value().rows())
    throw ValidationError("add_col_broadcast: b must be m.rows() x 1");
  return detail::make_op<Scalar>(
      (m.value().colwise() + b.value().col(0)).eval(), {m.node(), b.node()},
      [](Node<Scalar>& n) {
        if (n.parents[0]->needs_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->needs_grad)
          n.parents[1]->accumulate(n.grad.rowwise().sum());
      });
}

// a / s, where s is a 1x1 Var.
template <typename Scalar>
Var<Scalar> sdiv(const Var<Scalar>& a, const Var<Scalar>& s) {
  if (s.value().size() != 1) throw ValidationError("sdiv: s must be 1x1");
  const Scalar sv = s.scalar();
  return detail::make_op<Scalar>(
      (a.value().array() / sv).matrix(), {a.node(), s.node()},
      [sv](Node<Scalar>& n) {
        if (n.parents[0]->needs_grad)
          n.parents[0]->accumulate((n.grad.array() / sv).matrix());
        if (n.parents[1]->needs_grad) {
          Mat<Scalar> g(1, 1);
          g(0, 0) = -(n.grad.array() * n.value.array()).sum() / sv;
          n.parents[1]->accumulate(g);
        }
      });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  Mat<Scalar> v =
      (Scalar(1) / (Scalar(1) + (-a.value().array()).exp())).matrix();
  return detail::make_op<Scalar>(std::move(v), {a.node()},
                                 [](Node<Scalar>& n) {
                                   auto y = n.value.array();
                                   n.parents[0]->accumulate(
                                       (n.grad.array() * y * (Scalar(1) - y))
                                           .matrix());
                                 });
}

template <typename Scalar>
Var<Scalar> tanh_op(const Var<Scalar>& a) {
  Mat<Scalar> v = a.value().array().tanh().matrix();
  return detail::make_op<Scalar>(
      std::move(v), {a.node()}, [](Node<Scalar>& n) {
        auto y = n.value.array();
        n.parents[0]->accumulate((n.grad.array() * (Scalar(1) - y * y)).matrix());
      });
}

template <typename Scalar>
Var<Scalar> abs_op(const Var<Scalar>& a) {
  return detail::make_op<Scalar>(
      a.value().array().abs().matrix(), {a.node()}, [](Node<Scalar>& n) {
        auto s = n.parents[0]->value.array().sign();
        n.parents[0]->accumulate((n.grad.array() * s).matrix());
      });
}

// ---------------------------------------------------------------------------
// Reductions and vector ops
// ---------------------------------------------------------------------------

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  Mat<Scalar> v(1, 1);
  v(0, 0) = a.value().sum();
  return detail::make_op<Scalar>(
      std::move(v), {a.node()}, [](Node<Scalar>& n) {
        n.parents[0]->accumulate(Mat<Scalar>::Constant(
            n.parents[0]->value.rows(), n.parents[0]->value.cols(),
            n.grad(0, 0)));
      });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& a) {
  const Scalar inv = Scalar(1) / static_cast<Scalar>(a.value().size());
  return scale(sum(a), inv);
}

// Mean over columns; rows x N -> rows x 1. Channel mean of a flat image.
template <typename Scalar>
Var<Scalar> row_mean(const Var<Scalar>& a) {
  const Scalar inv = Scalar(1) / static_cast<Scalar>(a.value().cols());
  Mat<Scalar> v = a.value().rowwise().mean();
  return detail::make_op<Scalar>(
      std::move(v), {a.node()}, [inv](Node<Scalar>& n) {
        Mat<Scalar> g(n.parents[0]->value.rows(), n.parents[0]->value.cols());
        for (Eigen::Index c = 0; c < g.cols(); ++c) g.col(c) = n.grad * inv;
        n.parents[0]->accumulate(g);
      });
}

template <typename Scalar>
Var<Scalar> dot(const Var<Scalar>& a, const Var<Scalar>& b) {
  Mat<Scalar> v(1, 1);
  v(0, 0) = (a.value().array() * b.value().array()).sum();
  return detail::make_op<Scalar>(
      std::move(v), {a.node(), b.node()}, [](Node<Scalar>& n) {
        const Scalar g = n.grad(0, 0);
        if (n.parents[0]->needs_grad)
          n.parents[0]->accumulate(g * n.parents[1]->value);
        if (n.parents[1]->needs_grad)
          n.parents[1]->accumulate(g * n.parents[0]->value);
      });
}

// v / max(||v||, eps), for column vectors. A vector inside the eps ball is
// treated as locally constant: its true slope 1/eps would dwarf every other
// gradient and wreck the optimizer's moment estimates.
template <typename Scalar>
Var<Scalar> l2_normalize(const Var<Scalar>& a, Scalar eps = Scalar(1e-12)) {
  const Scalar nrm = a.value().norm();
  const Scalar d = std::max(nrm, eps);
  Mat<Scalar> v = a.value() / d;
  const bool saturated = nrm < eps;
  return detail::make_op<Scalar>(
      std::move(v), {a.node()}, [d, saturated](Node<Scalar>& n) {
        if (saturated) return;
        const Mat<Scalar>& y = n.value;
        const Scalar yg = (y.array() * n.grad.array()).sum();
        n.parents[0]->accumulate((n.grad - yg * y) / d);
      });
}

template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& a) {
  Arr<Scalar> z = a.value().col(0).array();
  z -= z.maxCoeff();
  Arr<Scalar> e = z.exp();
  Mat<Scalar> v = (e / e.sum()).matrix();
  return detail::make_op<Scalar>(
      std::move(v), {a.node()}, [](Node<Scalar>& n) {
        auto s = n.value.col(0).array();
        auto g = n.grad.col(0).array();
        const Scalar sg = (s * g).sum();
        n.parents[0]->accumulate(((g - sg) * s).matrix());
      });
}

// logsumexp of each row; B x C -> B x 1.
template <typename Scalar>
Var<Scalar> logsumexp_rows(const Var<Scalar>& a) {
  const auto& m = a.value();
  Mat<Scalar> v(m.rows(), 1);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Scalar mx = m.row(r).maxCoeff();
    v(r, 0) = mx + std::log((m.row(r).array() - mx).exp().sum());
  }
  return detail::make_op<Scalar>(
      std::move(v), {a.node()}, [](Node<Scalar>& n) {
        const auto& m = n.parents[0]->value;
        Mat<Scalar> g(m.rows(), m.cols());
        for (Eigen::Index r = 0; r < m.rows(); ++r)
          g.row(r) =
              (m.row(r).array() - n.value(r, 0)).exp() * n.grad(r, 0);
        n.parents[0]->accumulate(g);
      });
}

template <typename Scalar>
Var<Scalar> diagonal(const Var<Scalar>& a) {
  if (a.value().rows() != a.value().cols())
    throw ValidationError("diagonal: square matrix required");
  Mat<Scalar> v = a.value().diagonal();
  return detail::make_op<Scalar>(
      std::move(v), {a.node()}, [](Node<Scalar>& n) {
        Mat<Scalar> g = Mat<Scalar>::Zero(n.parents[0]->value.rows(),
                                          n.parents[0]->value.cols());
        g.diagonal() = n.grad.col(0);
        n.parents[0]->accumulate(g);
      });
}

// ---------------------------------------------------------------------------
// Assembly ops
// ---------------------------------------------------------------------------

// Stacks D x 1 columns into a D x B matrix.
template <typename Scalar>
Var<Scalar> stack_cols(const std::vector<Var<Scalar>>& cols) {
  if (cols.empty()) throw ValidationError("stack_cols: empty input");
  const Eigen::Index d = cols[0].value().rows();
  Mat<Scalar> v(d, static_cast<Eigen::Index>(cols.size()));
  std::vector<typename Var<Scalar>::NodePtr> ps;
  ps.reserve(cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) {
    v.col(static_cast<Eigen::Index>(i)) = cols[i].value();
    ps.push_back(cols[i].node());
  }
  return detail::make_op<Scalar>(
      std::move(v), std::move(ps), [](Node<Scalar>& n) {
        for (std::size_t i = 0; i < n.parents.size(); ++i)
          if (n.parents[i]->needs_grad)
            n.parents[i]->accumulate(
                n.grad.col(static_cast<Eigen::Index>(i)));
      });
}

// Builds a rows x cols matrix from row-major 1x1 entries.
template <typename Scalar>
Var<Scalar> from_scalars(Eigen::Index rows, Eigen::Index cols,
                         const std::vector<Var<Scalar>>& entries) {
  if (static_cast<Eigen::Index>(entries.size()) != rows * cols)
    throw ValidationError("from_scalars: entry count mismatch");
  Mat<Scalar> v(rows, cols);
  std::vector<typename Var<Scalar>::NodePtr> ps;
  ps.reserve(entries.size());
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      v(r, c) = entries[static_cast<std::size_t>(r * cols + c)].scalar();
      ps.push_back(entries[static_cast<std::size_t>(r * cols + c)].node());
    }
  return detail::make_op<Scalar>(
      std::move(v), std::move(ps), [rows, cols](Node<Scalar>& n) {
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c) {
            auto& p = n.parents[static_cast<std::size_t>(r * cols + c)];
            if (!p->needs_grad) continue;
            Mat<Scalar> g(1, 1);
            g(0, 0) = n.grad(r, c);
            p->accumulate(g);
          }
      });
}

template <typename Scalar>
Var<Scalar> sum_list(const std::vector<Var<Scalar>>& scalars) {
  Mat<Scalar> v = Mat<Scalar>::Zero(1, 1);
  std::vector<typename Var<Scalar>::NodePtr> ps;
  ps.reserve(scalars.size());
  for (const auto& s : scalars) {
    v(0, 0) += s.scalar();
    ps.push_back(s.node());
  }
  return detail::make_op<Scalar>(
      std::move(v), std::move(ps), [](Node<Scalar>& n) {
        for (auto& p : n.parents)
          if (p->needs_grad) p->accumulate(n.grad);
      });
}

// Row-major flatten of a grid to 1 x (rows*cols).
template <typename Scalar>
Var<Scalar> flatten_rm(const Var<Scalar>& a) {
  const Eigen::Index rows = a.value().rows(), cols = a.value().cols();
  return detail::make_op<Scalar>(
      flatten_rowmajor(a.value()), {a.node()}, [rows, cols](Node<Scalar>& n) {
        n.parents[0]->accumulate(unflatten_rowmajor(n.grad, rows, cols));
      });
}

// Row-major reshape of a flat vector (n x 1 or 1 x n) into rows x cols.
template <typename Scalar>
Var<Scalar> unflatten_rm(const Var<Scalar>& a, Eigen::Index rows,
                         Eigen::Index cols) {
  if (a.value().rows() != 1 && a.value().cols() != 1)
    throw ValidationError("unflatten_rm: input must be a vector");
  const bool was_column = a.value().cols() == 1;
  Mat<Scalar> flat =
      was_column ? Mat<Scalar>(a.value().transpose()) : a.value();
  return detail::make_op<Scalar>(
      unflatten_rowmajor(flat, rows, cols), {a.node()},
      [was_column](Node<Scalar>& n) {
        Mat<Scalar> g = flatten_rowmajor(n.grad);
        if (was_column)
          n.parents[0]->accumulate(g.transpose());
        else
          n.parents[0]->accumulate(g);
      });
}

// Bilinear upsampling of a grid to a flat row-major pixel field.
template <typename Scalar>
Var<Scalar> upsample(const Var<Scalar>& grid,
                     std::shared_ptr<const ResizeAxis> ay,
                     std::shared_ptr<const ResizeAxis> ax) {
  const Eigen::Index rows = grid.value().rows(), cols = grid.value().cols();
  return detail::make_op<Scalar>(
      upsample_flat(grid.value(), *ay, *ax), {grid.node()},
      [rows, cols, ay, ax](Node<Scalar>& n) {
        n.parents[0]->accumulate(
            upsample_flat_transpose(n.grad, rows, cols, *ay, *ax));
      });
}

// out(r, c) = img(r, c) * mask(c): broadcasts a 1 x N mask over channels.
template <typename Scalar>
Var<Scalar> mask_channels(const Var<Scalar>& img, const Var<Scalar>& mask) {
  if (img.value().cols() != mask.value().cols() || mask.value().rows() != 1)
    throw ValidationError("mask_channels: mask must be 1 x img.cols()");
  Mat<Scalar> v = img.value().array().rowwise() *
                  mask.value().row(0).array();
  return detail::make_op<Scalar>(
      std::move(v), {img.node(), mask.node()}, [](Node<Scalar>& n) {
        if (n.parents[0]->needs_grad)
          n.parents[0]->accumulate(
              (n.grad.array().rowwise() * n.parents[1]->value.row(0).array())
                  .matrix());
        if (n.parents[1]->needs_grad)
          n.parents[1]->accumulate(
              (n.grad.array() * n.parents[0]->value.array())
                  .colwise()
                  .sum()
                  .matrix());
      });
}

// Straight-through binarization: forward 1[y > 1/2], backward identity.
template <typename Scalar>
Var<Scalar> binarize_st(const Var<Scalar>& y_soft) {
  Mat<Scalar> v = (y_soft.value().array() > Scalar(0.5))
                      .template cast<Scalar>()
                      .matrix();
  return detail::make_op<Scalar>(
      std::move(v), {y_soft.node()},
      [](Node<Scalar>& n) { n.parents[0]->accumulate(n.grad); });
}

// (a - min) / (max - min). The caller must rule out a degenerate range.
// Min/max subgradients are routed to the first occurrence.
template <typename Scalar>
Var<Scalar> minmax_normalize(const Var<Scalar>& a) {
  Eigen::Index rmin = 0, cmin = 0, rmax = 0, cmax = 0;
  const Scalar mn = a.value().minCoeff(&rmin, &cmin);
  const Scalar mx = a.value().maxCoeff(&rmax, &cmax);
  const Scalar d = mx - mn;
  if (!(d > Scalar(0)))
    throw ValidationError("minmax_normalize: degenerate range");
  Mat<Scalar> v = ((a.value().array() - mn) / d).matrix();
  return detail::make_op<Scalar>(
      std::move(v), {a.node()},
      [d, rmin, cmin, rmax, cmax](Node<Scalar>& n) {
        Mat<Scalar> g = n.grad / d;
        const Scalar gsum = n.grad.sum();
        const Scalar gm = (n.grad.array() * n.value.array()).sum();
        g(rmin, cmin) += (-gsum + gm) / d;
        g(rmax, cmax) += -gm / d;
        n.parents[0]->accumulate(g);
      });
}

}  // namespace avloc::ad
