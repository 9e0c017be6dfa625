// svtk/autograd.h

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

// Minimal reverse-mode differentiation over dense double matrices.
//
// Every op evaluates eagerly. When at least one input requires a gradient
// (and grad mode is enabled on the calling thread) the result records a
// closure that pushes its output gradient back into the inputs. Sequences are
// laid out as T x C matrices: one row per frame, one column per channel.

#ifndef SVTK_AUTOGRAD_H_
#define SVTK_AUTOGRAD_H_

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace svtk::ag {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(const Matrix&)> backward;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;

  static Var constant(Matrix value);
  /// Leaf that accumulates gradients across backward passes.
  static Var parameter(Matrix value);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  /// Direct access for optimizers and finite-difference probes.
  Matrix& mutable_value() { return node_->value; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  /// Gradient, or a zero matrix of the value's shape if none was recorded.
  Matrix grad() const;
  void zero_grad() { node_->grad.resize(0, 0); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;

  friend Var make_result(Matrix value, std::initializer_list<Var> inputs,
                         std::function<void(const Matrix&)> backward);
  friend Var make_result(Matrix value, std::span<const Var> inputs,
                         std::function<void(const Matrix&)> backward);
};

/// Wraps an eagerly computed value. The closure receives d(root)/d(result)
/// and must push gradients into whichever inputs require them.
Var make_result(Matrix value, std::initializer_list<Var> inputs,
                std::function<void(const Matrix&)> backward);
Var make_result(Matrix value, std::span<const Var> inputs,
                std::function<void(const Matrix&)> backward);

/// Adds g into v's gradient when v participates in differentiation.
inline void push_grad(const Var& v, const Matrix& g) {
  if (v.requires_grad()) v.node()->accumulate(g);
}

/// Back-propagates from a 1x1 root.
void backward(const Var& root);

bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Records the branch taken by every piecewise op (relu, clamp_min and
/// custom ops that call record_branch) on the current thread. Two evaluations
/// with different records straddle a non-differentiable point, which
/// finite-difference probes use to discard the sample.
class BranchRecorder {
 public:
  BranchRecorder();
  ~BranchRecorder();
  BranchRecorder(const BranchRecorder&) = delete;
  BranchRecorder& operator=(const BranchRecorder&) = delete;

  const std::vector<unsigned char>& branches() const { return branches_; }

 private:
  std::vector<unsigned char> branches_;
  BranchRecorder* previous_;

  friend void record_branch(bool taken);
};

void record_branch(bool taken);

// Arithmetic.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// x (T x C) + b (1 x C) broadcast over rows.
Var add_row(const Var& x, const Var& b);
/// x (T x C) * s (1 x C) broadcast over rows.
Var mul_row(const Var& x, const Var& s);
/// x (T x C) * a (T x 1) broadcast over columns.
Var mul_col(const Var& x, const Var& a);
/// x * w + b, with b optional (undefined Var).
Var linear(const Var& x, const Var& w, const Var& b);

// Pointwise.
Var relu(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var sqrt(const Var& x);
Var clamp_min(const Var& x, double lo);

// Reductions and reshaping.
Var mean_rows(const Var& x);  // T x C -> 1 x C
Var sum(const Var& x);        // -> 1 x 1
Var transpose(const Var& x);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count);

/// Softmax over every entry of a row or column vector.
Var softmax(const Var& x);

/// sum_l weights(0, l) * layers[l]; weights is 1 x L.
Var weighted_sum(std::span<const Var> layers, const Var& weights);

/// "Same"-length dilated convolution over rows with edge-replicate padding.
/// w is (kernel * C_in) x C_out, tap-major; b is 1 x C_out or undefined.
Var conv1d(const Var& x, const Var& w, const Var& b, int kernel, int dilation);

/// Unpadded strided convolution: T_out = (T - kernel) / stride + 1.
Var conv1d_strided(const Var& x, const Var& w, const Var& b, int kernel,
                   int stride);

/// Centered moving average over rows of odd width; windows are truncated at
/// the edges and divided by the number of frames they cover.
Var moving_average(const Var& x, int width);

}  // namespace svtk::ag

#endif  // SVTK_AUTOGRAD_H_
