// svtk/src/autograd.cc

// Copyright 2026 The svtk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "svtk/autograd.h"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <unordered_set>

#include "svtk/error.h"

namespace svtk::ag {

namespace {

thread_local bool g_grad_enabled = true;
thread_local BranchRecorder* g_recorder = nullptr;

void record_mask(const Matrix& x, double lo) {
  if (!g_recorder) return;
  for (Eigen::Index i = 0; i < x.size(); ++i) record_branch(x.data()[i] > lo);
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw NumericError(std::string(op) + ": shape mismatch");
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0)
    grad = g;
  else
    grad += g;
}

Var Var::constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Matrix Var::grad() const {
  if (node_->grad.size() == 0)
    return Matrix::Zero(node_->value.rows(), node_->value.cols());
  return node_->grad;
}

Var make_result(Matrix value, std::span<const Var> inputs,
                std::function<void(const Matrix&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_grad_enabled) {
    for (const Var& in : inputs) {
      if (in.requires_grad()) {
        n->requires_grad = true;
        break;
      }
    }
  }
  if (n->requires_grad) {
    for (const Var& in : inputs)
      if (in.requires_grad()) n->inputs.push_back(in.shared());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

Var make_result(Matrix value, std::initializer_list<Var> inputs,
                std::function<void(const Matrix&)> backward) {
  return make_result(std::move(value),
                     std::span<const Var>(inputs.begin(), inputs.size()),
                     std::move(backward));
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1)
    throw NumericError("backward: root must be a scalar");
  if (!root.requires_grad()) return;

  // Post-order DFS; reversing it gives a valid reverse topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second)
        stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(n->grad);
  }
  // Intermediate gradients are not needed after the sweep; leaves keep theirs.
  for (Node* n : order)
    if (n->backward) n->grad.resize(0, 0);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

BranchRecorder::BranchRecorder() : previous_(g_recorder) { g_recorder = this; }
BranchRecorder::~BranchRecorder() { g_recorder = previous_; }

void record_branch(bool taken) {
  if (g_recorder) g_recorder->branches_.push_back(taken ? 1 : 0);
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw NumericError("matmul: inner dim mismatch");
  return make_result(a.value() * b.value(), {a, b}, [a, b](const Matrix& g) {
    if (a.requires_grad()) push_grad(a, g * b.value().transpose());
    if (b.requires_grad()) push_grad(b, a.value().transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "add");
  return make_result(a.value() + b.value(), {a, b}, [a, b](const Matrix& g) {
    push_grad(a, g);
    push_grad(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "sub");
  return make_result(a.value() - b.value(), {a, b}, [a, b](const Matrix& g) {
    push_grad(a, g);
    if (b.requires_grad()) push_grad(b, -g);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "mul");
  return make_result(a.value().cwiseProduct(b.value()), {a, b},
                     [a, b](const Matrix& g) {
                       if (a.requires_grad())
                         push_grad(a, g.cwiseProduct(b.value()));
                       if (b.requires_grad())
                         push_grad(b, g.cwiseProduct(a.value()));
                     });
}

Var scale(const Var& a, double s) {
  return make_result(a.value() * s, {a},
                     [a, s](const Matrix& g) { push_grad(a, g * s); });
}

Var add_row(const Var& x, const Var& b) {
  if (b.rows() != 1 || b.cols() != x.cols())
    throw NumericError("add_row: bias must be 1 x C");
  Matrix out = x.value().rowwise() + b.value().row(0);
  return make_result(std::move(out), {x, b}, [x, b](const Matrix& g) {
    push_grad(x, g);
    if (b.requires_grad()) push_grad(b, g.colwise().sum());
  });
}

Var mul_row(const Var& x, const Var& s) {
  if (s.rows() != 1 || s.cols() != x.cols())
    throw NumericError("mul_row: scale must be 1 x C");
  Matrix out = x.value().array().rowwise() * s.value().row(0).array();
  return make_result(std::move(out), {x, s}, [x, s](const Matrix& g) {
    if (x.requires_grad())
      push_grad(x, g.array().rowwise() * s.value().row(0).array());
    if (s.requires_grad())
      push_grad(s, g.cwiseProduct(x.value()).colwise().sum());
  });
}

Var mul_col(const Var& x, const Var& a) {
  if (a.cols() != 1 || a.rows() != x.rows())
    throw NumericError("mul_col: weights must be T x 1");
  Matrix out = x.value().array().colwise() * a.value().col(0).array();
  return make_result(std::move(out), {x, a}, [x, a](const Matrix& g) {
    if (x.requires_grad())
      push_grad(x, g.array().colwise() * a.value().col(0).array());
    if (a.requires_grad())
      push_grad(a, g.cwiseProduct(x.value()).rowwise().sum());
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  Var y = matmul(x, w);
  return b.defined() ? add_row(y, b) : y;
}

Var relu(const Var& x) {
  record_mask(x.value(), 0.0);
  Matrix out = x.value().cwiseMax(0.0);
  return make_result(std::move(out), {x}, [x](const Matrix& g) {
    push_grad(x, (x.value().array() > 0.0).select(g, 0.0));
  });
}

Var tanh(const Var& x) {
  Matrix out = x.value().array().tanh();
  Var y = make_result(out, {x}, [x, out](const Matrix& g) {
    push_grad(x, g.array() * (1.0 - out.array().square()));
  });
  return y;
}

Var sigmoid(const Var& x) {
  Matrix out = (1.0 + (-x.value().array()).exp()).inverse();
  return make_result(out, {x}, [x, out](const Matrix& g) {
    push_grad(x, g.array() * out.array() * (1.0 - out.array()));
  });
}

Var sqrt(const Var& x) {
  Matrix out = x.value().array().sqrt();
  return make_result(out, {x}, [x, out](const Matrix& g) {
    push_grad(x, g.array() / (2.0 * out.array()));
  });
}

Var clamp_min(const Var& x, double lo) {
  record_mask(x.value(), lo);
  Matrix out = x.value().cwiseMax(lo);
  return make_result(std::move(out), {x}, [x, lo](const Matrix& g) {
    push_grad(x, (x.value().array() > lo).select(g, 0.0));
  });
}

Var mean_rows(const Var& x) {
  const double n = static_cast<double>(x.rows());
  Matrix out = x.value().colwise().sum() / n;
  return make_result(std::move(out), {x}, [x, n](const Matrix& g) {
    Matrix gx = g.row(0).replicate(x.rows(), 1) / n;
    push_grad(x, gx);
  });
}

Var sum(const Var& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return make_result(std::move(out), {x}, [x](const Matrix& g) {
    push_grad(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var transpose(const Var& x) {
  Matrix out = x.value().transpose();
  return make_result(std::move(out), {x},
                     [x](const Matrix& g) { push_grad(x, g.transpose()); });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw NumericError("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw NumericError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return make_result(std::move(out), parts, [keep](const Matrix& g) {
    Eigen::Index at = 0;
    for (const Var& p : keep) {
      if (p.requires_grad()) push_grad(p, g.middleCols(at, p.cols()));
      at += p.cols();
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw NumericError("concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw NumericError("concat_rows: col mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return make_result(std::move(out), parts, [keep](const Matrix& g) {
    Eigen::Index at = 0;
    for (const Var& p : keep) {
      if (p.requires_grad()) push_grad(p, g.middleRows(at, p.rows()));
      at += p.rows();
    }
  });
}

Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.cols())
    throw NumericError("slice_cols: out of range");
  Matrix out = x.value().middleCols(start, count);
  return make_result(std::move(out), {x}, [x, start, count](const Matrix& g) {
    Matrix gx = Matrix::Zero(x.rows(), x.cols());
    gx.middleCols(start, count) = g;
    push_grad(x, gx);
  });
}

Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.rows())
    throw NumericError("slice_rows: out of range");
  Matrix out = x.value().middleRows(start, count);
  return make_result(std::move(out), {x}, [x, start, count](const Matrix& g) {
    Matrix gx = Matrix::Zero(x.rows(), x.cols());
    gx.middleRows(start, count) = g;
    push_grad(x, gx);
  });
}

Var softmax(const Var& x) {
  if (x.rows() != 1 && x.cols() != 1)
    throw NumericError("softmax: expects a vector");
  const double m = x.value().maxCoeff();
  Matrix e = (x.value().array() - m).exp();
  Matrix out = e / e.sum();
  return make_result(out, {x}, [x, out](const Matrix& g) {
    const double dot = g.cwiseProduct(out).sum();
    push_grad(x, out.array() * (g.array() - dot));
  });
}

Var weighted_sum(std::span<const Var> layers, const Var& weights) {
  const auto n = static_cast<Eigen::Index>(layers.size());
  if (n == 0) throw NumericError("weighted_sum: no layers");
  if (weights.rows() != 1 || weights.cols() != n)
    throw NumericError("weighted_sum: weight count does not match layers");
  Matrix out = Matrix::Zero(layers[0].rows(), layers[0].cols());
  for (Eigen::Index l = 0; l < n; ++l) {
    check_same_shape(layers[l].value(), out, "weighted_sum");
    out += weights.value()(0, l) * layers[l].value();
  }
  std::vector<Var> keep(layers.begin(), layers.end());
  std::vector<Var> inputs = keep;
  inputs.push_back(weights);
  return make_result(std::move(out), inputs, [keep, weights](const Matrix& g) {
    Matrix gw(1, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t l = 0; l < keep.size(); ++l) {
      const auto li = static_cast<Eigen::Index>(l);
      if (keep[l].requires_grad()) push_grad(keep[l], weights.value()(0, li) * g);
      gw(0, li) = g.cwiseProduct(keep[l].value()).sum();
    }
    push_grad(weights, gw);
  });
}

Var conv1d(const Var& x, const Var& w, const Var& b, int kernel,
           int dilation) {
  const Eigen::Index T = x.rows();
  const Eigen::Index cin = x.cols();
  if (kernel < 1 || kernel % 2 == 0)
    throw NumericError("conv1d: kernel must be odd and positive");
  if (w.rows() != kernel * cin)
    throw NumericError("conv1d: weight rows must equal kernel * C_in");
  const int half = kernel / 2;
  std::vector<Eigen::Index> src(static_cast<std::size_t>(T * kernel));
  for (Eigen::Index t = 0; t < T; ++t)
    for (int j = 0; j < kernel; ++j) {
      Eigen::Index s = t + static_cast<Eigen::Index>(j - half) * dilation;
      src[static_cast<std::size_t>(t * kernel + j)] = std::clamp<Eigen::Index>(s, 0, T - 1);
    }
  Matrix cols(T, kernel * cin);
  for (Eigen::Index t = 0; t < T; ++t)
    for (int j = 0; j < kernel; ++j)
      cols.block(t, j * cin, 1, cin) =
          x.value().row(src[static_cast<std::size_t>(t * kernel + j)]);
  Var col_var = make_result(cols, {x}, [x, src, kernel, cin](const Matrix& g) {
    Matrix gx = Matrix::Zero(x.rows(), cin);
    for (Eigen::Index t = 0; t < x.rows(); ++t)
      for (int j = 0; j < kernel; ++j)
        gx.row(src[static_cast<std::size_t>(t * kernel + j)]) +=
            g.block(t, j * cin, 1, cin);
    push_grad(x, gx);
  });
  return linear(col_var, w, b);
}

Var conv1d_strided(const Var& x, const Var& w, const Var& b, int kernel,
                   int stride) {
  const Eigen::Index T = x.rows();
  const Eigen::Index cin = x.cols();
  if (kernel < 1 || stride < 1) throw NumericError("conv1d_strided: bad geometry");
  if (T < kernel) throw NumericError("conv1d_strided: input shorter than kernel");
  if (w.rows() != kernel * cin)
    throw NumericError("conv1d_strided: weight rows must equal kernel * C_in");
  const Eigen::Index tout = (T - kernel) / stride + 1;
  Matrix cols(tout, kernel * cin);
  for (Eigen::Index t = 0; t < tout; ++t)
    for (int j = 0; j < kernel; ++j)
      cols.block(t, j * cin, 1, cin) = x.value().row(t * stride + j);
  Var col_var = make_result(cols, {x}, [x, kernel, stride, cin, tout](const Matrix& g) {
    Matrix gx = Matrix::Zero(x.rows(), cin);
    for (Eigen::Index t = 0; t < tout; ++t)
      for (int j = 0; j < kernel; ++j)
        gx.row(t * stride + j) += g.block(t, j * cin, 1, cin);
    push_grad(x, gx);
  });
  return linear(col_var, w, b);
}

Var moving_average(const Var& x, int width) {
  if (width < 1 || width % 2 == 0)
    throw NumericError("moving_average: width must be odd and positive");
  if (width == 1) return x;
  const Eigen::Index T = x.rows();
  const Eigen::Index half = width / 2;
  Matrix out(T, x.cols());
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, t - half);
    const Eigen::Index hi = std::min<Eigen::Index>(T - 1, t + half);
    out.row(t) = x.value().middleRows(lo, hi - lo + 1).colwise().sum() /
                 static_cast<double>(hi - lo + 1);
  }
  return make_result(std::move(out), {x}, [x, half](const Matrix& g) {
    const Eigen::Index T = x.rows();
    Matrix gx = Matrix::Zero(T, x.cols());
    for (Eigen::Index t = 0; t < T; ++t) {
      const Eigen::Index lo = std::max<Eigen::Index>(0, t - half);
      const Eigen::Index hi = std::min<Eigen::Index>(T - 1, t + half);
      const double inv = 1.0 / static_cast<double>(hi - lo + 1);
      for (Eigen::Index s = lo; s <= hi; ++s) gx.row(s) += inv * g.row(t);
    }
    push_grad(x, gx);
  });
}

}  // namespace svtk::ag
