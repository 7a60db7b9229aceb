/*
 * Copyright 2026 The mcamvggt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Var is a handle to a graph node holding a value and, once backward() has
// run, an accumulated gradient. Every op records a closure that pushes the
// output gradient into its inputs. Nodes that do not depend on any
// grad-requiring leaf record nothing, so constant inputs cost no memory.

#ifndef MCAMVGGT_AUTOGRAD_HPP_
#define MCAMVGGT_AUTOGRAD_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mcamvggt/errors.hpp"

namespace mcamvggt::ag {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() == 0) grad = Matrix<T>::Zero(value.rows(), value.cols());
  }
  template <typename Derived>
  void add_grad(const Eigen::MatrixBase<Derived>& g) {
    ensure_grad();
    grad += g;
  }
};

namespace detail {
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode(); }

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Var {
 public:
  using NodePtr = std::shared_ptr<Node<T>>;

  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  static Var constant(Matrix<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return Var(std::move(n));
  }
  static Var leaf(Matrix<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Matrix<T>& value() const { return node_->value; }
  Matrix<T>& mutable_value() { return node_->value; }
  // Zero-sized when no gradient reached this node.
  const Matrix<T>& grad() const { return node_->grad; }
  Matrix<T>& mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  T item() const { return node_->value(0, 0); }
  const NodePtr& node() const { return node_; }
  Node<T>* get() const { return node_.get(); }

 private:
  NodePtr node_;
};

// Builds the output node. The backward closure is kept only when some input
// requires a gradient and recording is enabled.
template <typename T>
Var<T> make_op(Matrix<T> value, std::initializer_list<const Var<T>*> inputs,
               std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  if (grad_enabled()) {
    for (const Var<T>* v : inputs) {
      if (v->requires_grad()) {
        n->requires_grad = true;
        break;
      }
    }
  }
  if (n->requires_grad) {
    for (const Var<T>* v : inputs) n->parents.push_back(v->node());
    n->backward = std::move(backward);
  }
  return Var<T>(std::move(n));
}

template <typename T>
Var<T> make_op_n(Matrix<T> value, const std::vector<Var<T>>& inputs,
                 std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  if (grad_enabled()) {
    for (const auto& v : inputs) {
      if (v.requires_grad()) {
        n->requires_grad = true;
        break;
      }
    }
  }
  if (n->requires_grad) {
    for (const auto& v : inputs) n->parents.push_back(v.node());
    n->backward = std::move(backward);
  }
  return Var<T>(std::move(n));
}

// Accumulates d(root)/d(node) into every reachable node that requires a
// gradient. The root must be 1x1 unless a seed is supplied.
template <typename T>
void backward(const Var<T>& root, const Matrix<T>* seed = nullptr) {
  if (!root.requires_grad()) return;
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  Node<T>* r = root.get();
  if (seed != nullptr) {
    r->add_grad(*seed);
  } else {
    if (r->value.size() != 1) throw ShapeError("backward() without seed needs a scalar root");
    r->ensure_grad();
    r->grad(0, 0) += T(1);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise and linear algebra.

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix<T> out = a.value() * b.value();
  Node<T>* an = a.get();
  Node<T>* bn = b.get();
  return make_op<T>(std::move(out), {&a, &b}, [an, bn](Node<T>& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      an->grad.noalias() += self.grad * bn->value.transpose();
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      bn->grad.noalias() += an->value.transpose() * self.grad;
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add: shape mismatch");
  Node<T>* an = a.get();
  Node<T>* bn = b.get();
  return make_op<T>(a.value() + b.value(), {&a, &b}, [an, bn](Node<T>& self) {
    if (an->requires_grad) an->add_grad(self.grad);
    if (bn->requires_grad) bn->add_grad(self.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("sub: shape mismatch");
  Node<T>* an = a.get();
  Node<T>* bn = b.get();
  return make_op<T>(a.value() - b.value(), {&a, &b}, [an, bn](Node<T>& self) {
    if (an->requires_grad) an->add_grad(self.grad);
    if (bn->requires_grad) bn->add_grad(-self.grad);
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("mul: shape mismatch");
  Node<T>* an = a.get();
  Node<T>* bn = b.get();
  return make_op<T>(a.value().cwiseProduct(b.value()), {&a, &b}, [an, bn](Node<T>& self) {
    if (an->requires_grad) an->add_grad(self.grad.cwiseProduct(bn->value));
    if (bn->requires_grad) bn->add_grad(self.grad.cwiseProduct(an->value));
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Node<T>* an = a.get();
  return make_op<T>(a.value() * s, {&a}, [an, s](Node<T>& self) { an->add_grad(self.grad * s); });
}

// a (n x m) + row (1 x m) broadcast over rows.
template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: bad bias shape");
  Matrix<T> out = a.value();
  out.rowwise() += row.value().row(0);
  Node<T>* an = a.get();
  Node<T>* rn = row.get();
  return make_op<T>(std::move(out), {&a, &row}, [an, rn](Node<T>& self) {
    if (an->requires_grad) an->add_grad(self.grad);
    if (rn->requires_grad) rn->add_grad(self.grad.colwise().sum());
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  Node<T>* an = a.get();
  return make_op<T>(a.value().cwiseMax(T(0)), {&a}, [an](Node<T>& self) {
    an->add_grad(self.grad.cwiseProduct(
        (an->value.array() > T(0)).template cast<T>().matrix()));
  });
}

// tanh approximation of GELU.
template <typename T>
Var<T> gelu(const Var<T>& a) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2 / pi)
  const T c = T(kC);
  const T k = T(0.044715);
  Matrix<T> out(a.rows(), a.cols());
  const auto& x = a.value();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const T v = x.data()[i];
    out.data()[i] = T(0.5) * v * (T(1) + std::tanh(c * (v + k * v * v * v)));
  }
  Node<T>* an = a.get();
  return make_op<T>(std::move(out), {&a}, [an, c, k](Node<T>& self) {
    an->ensure_grad();
    const auto& x = an->value;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const T v = x.data()[i];
      const T th = std::tanh(c * (v + k * v * v * v));
      const T dth = (T(1) - th * th) * c * (T(1) + T(3) * k * v * v);
      an->grad.data()[i] += self.grad.data()[i] * (T(0.5) * (T(1) + th) + T(0.5) * v * dth);
    }
  });
}

template <typename T>
Var<T> softplus(const Var<T>& a) {
  Matrix<T> out(a.rows(), a.cols());
  const auto& x = a.value();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const T v = x.data()[i];
    out.data()[i] = std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v)));
  }
  Node<T>* an = a.get();
  return make_op<T>(std::move(out), {&a}, [an](Node<T>& self) {
    an->ensure_grad();
    const auto& x = an->value;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const T v = x.data()[i];
      const T sig = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
      an->grad.data()[i] += self.grad.data()[i] * sig;
    }
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Node<T>* an = a.get();
  return make_op<T>((a.value().array() + s).matrix(), {&a},
                    [an](Node<T>& self) { an->add_grad(self.grad); });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  Matrix<T> out(1, 1);
  out(0, 0) = a.value().sum();
  Node<T>* an = a.get();
  return make_op<T>(std::move(out), {&a}, [an](Node<T>& self) {
    an->ensure_grad();
    an->grad.array() += self.grad(0, 0);
  });
}

// Sum of 1x1 terms.
template <typename T>
Var<T> add_scalars(const std::vector<Var<T>>& terms) {
  Matrix<T> out = Matrix<T>::Zero(1, 1);
  std::vector<Node<T>*> nodes;
  for (const auto& t : terms) {
    if (t.value().size() != 1) throw ShapeError("add_scalars: term is not 1x1");
    out(0, 0) += t.item();
    nodes.push_back(t.get());
  }
  return make_op_n<T>(std::move(out), terms, [nodes](Node<T>& self) {
    for (Node<T>* n : nodes) {
      if (n->requires_grad) n->add_grad(self.grad);
    }
  });
}

// Per-row layer normalization with learned gain and bias (both 1 x m).
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = x.cols();
  Matrix<T> xhat(n, m);
  std::vector<T> inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto row = x.value().row(r);
    const T mean = row.mean();
    const T var = (row.array() - mean).square().mean();
    inv_std[r] = T(1) / std::sqrt(var + eps);
    xhat.row(r) = (row.array() - mean) * inv_std[r];
  }
  Matrix<T> out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  Node<T>* xn = x.get();
  Node<T>* gn = gamma.get();
  Node<T>* bn = beta.get();
  return make_op<T>(std::move(out), {&x, &gamma, &beta},
                    [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
                      if (gn->requires_grad) gn->add_grad((self.grad.cwiseProduct(xhat)).colwise().sum());
                      if (bn->requires_grad) bn->add_grad(self.grad.colwise().sum());
                      if (!xn->requires_grad) return;
                      xn->ensure_grad();
                      const Eigen::Index m = xhat.cols();
                      for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                        const RowVector<T> dxhat =
                            self.grad.row(r).cwiseProduct(gn->value.row(0));
                        const T mean_d = dxhat.sum() / T(m);
                        const T mean_dx = dxhat.dot(xhat.row(r)) / T(m);
                        xn->grad.row(r).array() +=
                            inv_std[r] * (dxhat.array() - mean_d - xhat.row(r).array() * mean_dx);
                      }
                    });
}

// ---------------------------------------------------------------------------
// Structural ops.

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column count differs");
    rows += p.rows();
  }
  Matrix<T> out(rows, cols);
  std::vector<std::pair<Node<T>*, Eigen::Index>> spans;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    spans.emplace_back(p.get(), r);
    r += p.rows();
  }
  return make_op_n<T>(std::move(out), parts, [spans](Node<T>& self) {
    for (const auto& [n, r0] : spans) {
      if (n->requires_grad) n->add_grad(self.grad.middleRows(r0, n->value.rows()));
    }
  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row count differs");
    cols += p.cols();
  }
  Matrix<T> out(rows, cols);
  std::vector<std::pair<Node<T>*, Eigen::Index>> spans;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    spans.emplace_back(p.get(), c);
    c += p.cols();
  }
  return make_op_n<T>(std::move(out), parts, [spans](Node<T>& self) {
    for (const auto& [n, c0] : spans) {
      if (n->requires_grad) n->add_grad(self.grad.middleCols(c0, n->value.cols()));
    }
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows: out of range");
  Node<T>* an = a.get();
  return make_op<T>(a.value().middleRows(start, count), {&a}, [an, start, count](Node<T>& self) {
    an->ensure_grad();
    an->grad.middleRows(start, count) += self.grad;
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: out of range");
  Node<T>* an = a.get();
  return make_op<T>(a.value().middleCols(start, count), {&a}, [an, start, count](Node<T>& self) {
    an->ensure_grad();
    an->grad.middleCols(start, count) += self.grad;
  });
}

template <typename T>
Var<T> gather_rows(const Var<T>& a, std::vector<Eigen::Index> index) {
  Matrix<T> out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) throw ShapeError("gather_rows: index out of range");
    out.row(i) = a.value().row(index[i]);
  }
  Node<T>* an = a.get();
  return make_op<T>(std::move(out), {&a}, [an, index = std::move(index)](Node<T>& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < index.size(); ++i) an->grad.row(index[i]) += self.grad.row(i);
  });
}

// Output row g is the mean of the input rows listed in groups[g].
template <typename T>
Var<T> gather_mean_rows(const Var<T>& a, std::vector<std::vector<Eigen::Index>> groups) {
  Matrix<T> out = Matrix<T>::Zero(static_cast<Eigen::Index>(groups.size()), a.cols());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw ShapeError("gather_mean_rows: empty group");
    for (Eigen::Index r : groups[g]) out.row(g) += a.value().row(r);
    out.row(g) /= T(groups[g].size());
  }
  Node<T>* an = a.get();
  return make_op<T>(std::move(out), {&a}, [an, groups = std::move(groups)](Node<T>& self) {
    an->ensure_grad();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const T w = T(1) / T(groups[g].size());
      for (Eigen::Index r : groups[g]) an->grad.row(r) += w * self.grad.row(g);
    }
  });
}

// out.flat[i] = a.flat[index[i]], or 0 where index[i] < 0.
template <typename T>
Var<T> gather_elements(const Var<T>& a, std::vector<Eigen::Index> index, Eigen::Index rows,
                       Eigen::Index cols) {
  if (static_cast<Eigen::Index>(index.size()) != rows * cols) {
    throw ShapeError("gather_elements: index size does not match output shape");
  }
  Matrix<T> out(rows, cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    out.data()[i] = index[i] < 0 ? T(0) : a.value().data()[index[i]];
  }
  Node<T>* an = a.get();
  return make_op<T>(std::move(out), {&a}, [an, index = std::move(index)](Node<T>& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (index[i] >= 0) an->grad.data()[index[i]] += self.grad.data()[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Attention.

// Multi-head scaled dot-product attention on already projected q (nq x d),
// k and v (nk x d). `allowed`, when given, is an nq x nk mask; masked pairs
// receive zero weight. Every query must keep at least one key.
template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads,
                 const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>* allowed = nullptr) {
  const Eigen::Index nq = q.rows();
  const Eigen::Index nk = k.rows();
  const Eigen::Index d = q.cols();
  if (k.cols() != d || v.cols() != d || v.rows() != nk) throw ShapeError("attention: shape mismatch");
  if (heads <= 0 || d % heads != 0) throw ShapeError("attention: heads must divide width");
  if (allowed != nullptr && (allowed->rows() != nq || allowed->cols() != nk)) {
    throw ShapeError("attention: mask shape mismatch");
  }
  const Eigen::Index dh = d / heads;
  const T scale = T(1) / std::sqrt(T(dh));
  Matrix<T> out(nq, d);
  auto probs = std::make_shared<std::vector<Matrix<T>>>(heads);
  for (int h = 0; h < heads; ++h) {
    Matrix<T> s(nq, nk);
    s.noalias() = q.value().middleCols(h * dh, dh) * k.value().middleCols(h * dh, dh).transpose();
    s *= scale;
    for (Eigen::Index r = 0; r < nq; ++r) {
      T mx = -std::numeric_limits<T>::infinity();
      for (Eigen::Index c = 0; c < nk; ++c) {
        if (allowed == nullptr || (*allowed)(r, c)) mx = std::max(mx, s(r, c));
      }
      if (!std::isfinite(mx)) throw ShapeError("attention: a query has no allowed key");
      T z = T(0);
      for (Eigen::Index c = 0; c < nk; ++c) {
        const T e = (allowed == nullptr || (*allowed)(r, c)) ? std::exp(s(r, c) - mx) : T(0);
        s(r, c) = e;
        z += e;
      }
      s.row(r) /= z;
    }
    out.middleCols(h * dh, dh).noalias() = s * v.value().middleCols(h * dh, dh);
    (*probs)[h] = std::move(s);
  }
  Node<T>* qn = q.get();
  Node<T>* kn = k.get();
  Node<T>* vn = v.get();
  return make_op<T>(std::move(out), {&q, &k, &v}, [qn, kn, vn, probs, heads, dh, scale](Node<T>& self) {
    for (int h = 0; h < heads; ++h) {
      const Matrix<T>& p = (*probs)[h];
      const auto go = self.grad.middleCols(h * dh, dh);
      if (vn->requires_grad) {
        vn->ensure_grad();
        vn->grad.middleCols(h * dh, dh).noalias() += p.transpose() * go;
      }
      if (!qn->requires_grad && !kn->requires_grad) continue;
      Matrix<T> dp = go * vn->value.middleCols(h * dh, dh).transpose();
      // Softmax Jacobian: ds = p * (dp - rowsum(dp * p)).
      const Eigen::Matrix<T, Eigen::Dynamic, 1> dot = dp.cwiseProduct(p).rowwise().sum();
      Matrix<T> ds = p.cwiseProduct((dp.colwise() - dot));
      ds *= scale;
      if (qn->requires_grad) {
        qn->ensure_grad();
        qn->grad.middleCols(h * dh, dh).noalias() += ds * kn->value.middleCols(h * dh, dh);
      }
      if (kn->requires_grad) {
        kn->ensure_grad();
        kn->grad.middleCols(h * dh, dh).noalias() += ds.transpose() * qn->value.middleCols(h * dh, dh);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Spatial ops on batches of images stored as (batch * H * W) x C, row-major
// over (image, row, column).

// 3x3 patches with zero padding: (B*H*W) x (9*C), tap-major then channel.
template <typename T>
Var<T> im2col3x3(const Var<T>& x, int batch, int height, int width) {
  const Eigen::Index c = x.cols();
  if (x.rows() != static_cast<Eigen::Index>(batch) * height * width) {
    throw ShapeError("im2col3x3: row count does not match batch*H*W");
  }
  Matrix<T> out = Matrix<T>::Zero(x.rows(), 9 * c);
  for (int b = 0; b < batch; ++b) {
    const Eigen::Index base = static_cast<Eigen::Index>(b) * height * width;
    for (int y = 0; y < height; ++y) {
      for (int xx = 0; xx < width; ++xx) {
        const Eigen::Index row = base + static_cast<Eigen::Index>(y) * width + xx;
        for (int tap = 0; tap < 9; ++tap) {
          const int sy = y + tap / 3 - 1;
          const int sx = xx + tap % 3 - 1;
          if (sy < 0 || sx < 0 || sy >= height || sx >= width) continue;
          out.block(row, tap * c, 1, c) = x.value().row(base + static_cast<Eigen::Index>(sy) * width + sx);
        }
      }
    }
  }
  Node<T>* xn = x.get();
  return make_op<T>(std::move(out), {&x}, [xn, batch, height, width, c](Node<T>& self) {
    xn->ensure_grad();
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index base = static_cast<Eigen::Index>(b) * height * width;
      for (int y = 0; y < height; ++y) {
        for (int xx = 0; xx < width; ++xx) {
          const Eigen::Index row = base + static_cast<Eigen::Index>(y) * width + xx;
          for (int tap = 0; tap < 9; ++tap) {
            const int sy = y + tap / 3 - 1;
            const int sx = xx + tap % 3 - 1;
            if (sy < 0 || sx < 0 || sy >= height || sx >= width) continue;
            xn->grad.row(base + static_cast<Eigen::Index>(sy) * width + sx) +=
                self.grad.block(row, tap * c, 1, c);
          }
        }
      }
    }
  });
}

namespace detail {
struct LinearTaps {
  std::vector<int> lo, hi;
  std::vector<double> w_hi;
};

// Half-pixel-center sampling (align_corners = false), clamped at the border.
inline LinearTaps linear_taps(int in, int out) {
  LinearTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.w_hi.resize(out);
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in - 1);
    t.lo[o] = lo;
    t.hi[o] = hi;
    t.w_hi[o] = src - lo;
  }
  return t;
}
}  // namespace detail

template <typename T>
Var<T> resize_bilinear(const Var<T>& x, int batch, int in_h, int in_w, int out_h, int out_w) {
  if (x.rows() != static_cast<Eigen::Index>(batch) * in_h * in_w) {
    throw ShapeError("resize_bilinear: row count does not match batch*H*W");
  }
  const auto ty = detail::linear_taps(in_h, out_h);
  const auto tx = detail::linear_taps(in_w, out_w);
  const Eigen::Index c = x.cols();
  Matrix<T> out(static_cast<Eigen::Index>(batch) * out_h * out_w, c);
  auto src_row = [in_h, in_w](int b, int y, int xx) {
    return (static_cast<Eigen::Index>(b) * in_h + y) * in_w + xx;
  };
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < out_h; ++y) {
      const T wy = T(ty.w_hi[y]);
      for (int xx = 0; xx < out_w; ++xx) {
        const T wx = T(tx.w_hi[xx]);
        const Eigen::Index row = (static_cast<Eigen::Index>(b) * out_h + y) * out_w + xx;
        out.row(row) = (T(1) - wy) * ((T(1) - wx) * x.value().row(src_row(b, ty.lo[y], tx.lo[xx])) +
                                      wx * x.value().row(src_row(b, ty.lo[y], tx.hi[xx]))) +
                       wy * ((T(1) - wx) * x.value().row(src_row(b, ty.hi[y], tx.lo[xx])) +
                             wx * x.value().row(src_row(b, ty.hi[y], tx.hi[xx])));
      }
    }
  }
  Node<T>* xn = x.get();
  return make_op<T>(std::move(out), {&x}, [xn, batch, out_h, out_w, ty, tx, src_row](Node<T>& self) {
    xn->ensure_grad();
    for (int b = 0; b < batch; ++b) {
      for (int y = 0; y < out_h; ++y) {
        const T wy = T(ty.w_hi[y]);
        for (int xx = 0; xx < out_w; ++xx) {
          const T wx = T(tx.w_hi[xx]);
          const auto g = self.grad.row((static_cast<Eigen::Index>(b) * out_h + y) * out_w + xx);
          xn->grad.row(src_row(b, ty.lo[y], tx.lo[xx])) += (T(1) - wy) * (T(1) - wx) * g;
          xn->grad.row(src_row(b, ty.lo[y], tx.hi[xx])) += (T(1) - wy) * wx * g;
          xn->grad.row(src_row(b, ty.hi[y], tx.lo[xx])) += wy * (T(1) - wx) * g;
          xn->grad.row(src_row(b, ty.hi[y], tx.hi[xx])) += wy * wx * g;
        }
      }
    }
  });
}

}  // namespace mcamvggt::ag

#endif  // MCAMVGGT_AUTOGRAD_HPP_
