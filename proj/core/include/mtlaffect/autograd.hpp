// Copyright 2026 The mtlaffect Authors
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

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mtlaffect/random.hpp"

/// Reverse-mode differentiation over dense row-major matrices.
///
/// A Tape records every operation of one forward pass; `backward` walks it in
/// reverse and accumulates gradients into the Parameters that were bound with
/// `Tape::param`. A tape created with gradients disabled records values only.
namespace mtlaffect::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Var {
 public:
  Var() = default;
  bool valid() const { return id_ >= 0; }
  int id() const { return id_; }

 private:
  friend class Tape;
  explicit Var(int id) : id_(id) {}
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  /// Binds a parameter; repeated binds of the same parameter share one node.
  Var param(Parameter& p);
  Var constant(Matrix value);

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].value; }
  double scalar(Var v) const { return value(v)(0, 0); }
  /// Gradient accumulated at a node by the last backward pass (empty if none).
  const Matrix& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].grad; }
  bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].needs_grad; }

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Used by operations.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn fn);
  Matrix& grad_of(int id);
  const Matrix& value_of(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad_of(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> bound_;
  bool grad_enabled_;
};

// Elementwise / linear algebra.
Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
/// x + broadcast(row) where row is 1 x cols(x).
Var add_row(Tape& t, Var x, Var row);
Var scale(Tape& t, Var x, double s);
/// x W + b.
Var linear(Tape& t, Var x, Var weight, Var bias);
/// Tanh-approximated GELU.
Var gelu(Tape& t, Var x);
Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5);
/// Inverted dropout; identity when rate == 0.
Var dropout(Tape& t, Var x, double rate, Rng& rng);

// Row manipulation.
Var gather_rows(Tape& t, Var table, std::span<const int> rows);
Var slice_rows(Tape& t, Var x, std::size_t begin, std::size_t count);
Var concat_rows(Tape& t, std::span<const Var> parts);
/// Coordinate-wise maximum over the listed rows (1 x cols). Ties go to the first listed row.
Var max_pool_rows(Tape& t, Var x, std::span<const std::size_t> rows);

/// Multi-head scaled dot-product attention over already projected q, k, v.
/// Keys with key_mask == 0 are ignored; `causal` additionally hides keys after the query.
Var attention(Tape& t, Var q, Var k, Var v, std::size_t heads, bool causal, std::span<const std::uint8_t> key_mask);

// Losses and reductions.
/// Sum over rows of -log softmax(logits)[target]; rows with target < 0 are skipped.
Var cross_entropy_sum(Tape& t, Var logits, std::span<const int> targets);
/// sum_i weights[i] * terms[i] over 1x1 terms.
Var weighted_sum(Tape& t, std::span<const Var> terms, std::span<const double> weights);

/// Row-wise softmax of plain values.
Matrix softmax_rows(const Matrix& logits);

}  // namespace mtlaffect::ag
