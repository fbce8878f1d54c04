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

#include "mtlaffect/autograd.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mtlaffect::ag {

Var Tape::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(it->second);
  Node node;
  node.value = p.value;
  node.needs_grad = grad_enabled_;
  node.param = grad_enabled_ ? &p : nullptr;
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  bound_.emplace(&p, id);
  return Var(id);
}

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  if (grad_enabled_) {
    for (Var in : inputs) {
      if (nodes_[static_cast<std::size_t>(in.id())].needs_grad) {
        node.needs_grad = true;
        break;
      }
    }
    if (node.needs_grad) node.backward = std::move(fn);
  }
  nodes_.push_back(std::move(node));
  return Var(static_cast<int>(nodes_.size()) - 1);
}

Matrix& Tape::grad_of(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (!grad_enabled_) throw std::logic_error("backward on a tape without gradients");
  if (value(loss).size() != 1) throw std::invalid_argument("backward needs a scalar loss");
  grad_of(loss.id()).setOnes();
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

namespace {

bool wants(Tape& t, Var v) { return t.needs_grad_of(v.id()); }

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  Matrix out = t.value(a) * t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    if (wants(tp, a)) tp.grad_of(a.id()).noalias() += g * tp.value(b).transpose();
    if (wants(tp, b)) tp.grad_of(b.id()).noalias() += tp.value(a).transpose() * g;
  });
}

Var add(Tape& t, Var a, Var b) {
  if (t.value(a).rows() != t.value(b).rows() || t.value(a).cols() != t.value(b).cols()) {
    throw std::invalid_argument("add: shape mismatch");
  }
  Matrix out = t.value(a) + t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    if (wants(tp, a)) tp.grad_of(a.id()) += g;
    if (wants(tp, b)) tp.grad_of(b.id()) += g;
  });
}

Var add_row(Tape& t, Var x, Var row) {
  Matrix out = t.value(x);
  out.rowwise() += t.value(row).row(0);
  return t.record(std::move(out), {x, row}, [x, row](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    if (wants(tp, x)) tp.grad_of(x.id()) += g;
    if (wants(tp, row)) tp.grad_of(row.id()) += g.colwise().sum();
  });
}

Var scale(Tape& t, Var x, double s) {
  Matrix out = t.value(x) * s;
  return t.record(std::move(out), {x}, [x, s](Tape& tp, int self) { tp.grad_of(x.id()) += tp.grad_of(self) * s; });
}

Var linear(Tape& t, Var x, Var weight, Var bias) { return add_row(t, matmul(t, x, weight), bias); }

Var gelu(Tape& t, Var x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double k = 0.044715;
  const Matrix& in = t.value(x);
  Matrix out(in.rows(), in.cols());
  Matrix deriv(in.rows(), in.cols());
  for (Eigen::Index i = 0; i < in.size(); ++i) {
    const double v = in.data()[i];
    const double th = std::tanh(c * (v + k * v * v * v));
    out.data()[i] = 0.5 * v * (1.0 + th);
    deriv.data()[i] = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * c * (1.0 + 3.0 * k * v * v);
  }
  return t.record(std::move(out), {x}, [x, deriv = std::move(deriv)](Tape& tp, int self) {
    tp.grad_of(x.id()).array() += tp.grad_of(self).array() * deriv.array();
  });
}

Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps) {
  const Matrix& in = t.value(x);
  const auto cols = in.cols();
  Matrix xhat(in.rows(), cols);
  Eigen::VectorXd inv_std(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double mean = in.row(r).mean();
    const double var = (in.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (in.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = xhat;
  out.array().rowwise() *= t.value(gamma).row(0).array();
  out.rowwise() += t.value(beta).row(0);
  return t.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp, int self) {
                    const Matrix& g = tp.grad_of(self);
                    if (wants(tp, gamma)) tp.grad_of(gamma.id()) += (g.array() * xhat.array()).colwise().sum().matrix();
                    if (wants(tp, beta)) tp.grad_of(beta.id()) += g.colwise().sum();
                    if (!wants(tp, x)) return;
                    Matrix dxhat = g;
                    dxhat.array().rowwise() *= tp.value(gamma).row(0).array();
                    Matrix& gx = tp.grad_of(x.id());
                    for (Eigen::Index r = 0; r < g.rows(); ++r) {
                      const double m1 = dxhat.row(r).mean();
                      const double m2 = (dxhat.row(r).array() * xhat.row(r).array()).mean();
                      gx.row(r).array() += inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                    }
                  });
}

Var dropout(Tape& t, Var x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be below 1");
  const Matrix& in = t.value(x);
  Matrix keep(in.rows(), in.cols());
  const double s = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < keep.size(); ++i) keep.data()[i] = rng.bernoulli(rate) ? 0.0 : s;
  Matrix out = in.cwiseProduct(keep);
  return t.record(std::move(out), {x}, [x, keep = std::move(keep)](Tape& tp, int self) {
    tp.grad_of(x.id()) += tp.grad_of(self).cwiseProduct(keep);
  });
}

Var gather_rows(Tape& t, Var table, std::span<const int> rows) {
  const Matrix& tab = t.value(table);
  Matrix out(static_cast<Eigen::Index>(rows.size()), tab.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= tab.rows()) throw std::out_of_range("gather_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = tab.row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return t.record(std::move(out), {table}, [table, idx = std::move(idx)](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    Matrix& gt = tp.grad_of(table.id());
    for (std::size_t i = 0; i < idx.size(); ++i) gt.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var slice_rows(Tape& t, Var x, std::size_t begin, std::size_t count) {
  const Matrix& in = t.value(x);
  if (begin + count > static_cast<std::size_t>(in.rows())) throw std::out_of_range("slice_rows out of range");
  Matrix out = in.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
  return t.record(std::move(out), {x}, [x, begin, count](Tape& tp, int self) {
    tp.grad_of(x.id()).middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)) +=
        tp.grad_of(self);
  });
}

Var concat_rows(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows of nothing");
  Eigen::Index rows = 0;
  const Eigen::Index cols = t.value(parts[0]).cols();
  for (Var p : parts) {
    if (t.value(p).cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += t.value(p).rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    out.middleRows(r, t.value(p).rows()) = t.value(p);
    r += t.value(p).rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [inputs](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    Eigen::Index offset = 0;
    for (Var p : inputs) {
      const Eigen::Index n = tp.value(p).rows();
      if (wants(tp, p)) tp.grad_of(p.id()) += g.middleRows(offset, n);
      offset += n;
    }
  });
}

Var max_pool_rows(Tape& t, Var x, std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("max_pool_rows over no rows");
  const Matrix& in = t.value(x);
  Matrix out(1, in.cols());
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(in.cols()));
  for (Eigen::Index c = 0; c < in.cols(); ++c) {
    Eigen::Index best = static_cast<Eigen::Index>(rows[0]);
    for (std::size_t r : rows) {
      if (in(static_cast<Eigen::Index>(r), c) > in(best, c)) best = static_cast<Eigen::Index>(r);
    }
    argmax[static_cast<std::size_t>(c)] = best;
    out(0, c) = in(best, c);
  }
  return t.record(std::move(out), {x}, [x, argmax = std::move(argmax)](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    Matrix& gx = tp.grad_of(x.id());
    for (std::size_t c = 0; c < argmax.size(); ++c) {
      gx(argmax[c], static_cast<Eigen::Index>(c)) += g(0, static_cast<Eigen::Index>(c));
    }
  });
}

Var attention(Tape& t, Var q, Var k, Var v, std::size_t heads, bool causal, std::span<const std::uint8_t> key_mask) {
  const Matrix& Q = t.value(q);
  const Matrix& K = t.value(k);
  const Matrix& V = t.value(v);
  const Eigen::Index L = Q.rows();
  const Eigen::Index H = Q.cols();
  const auto nh = static_cast<Eigen::Index>(heads);
  if (H % nh != 0) throw std::invalid_argument("attention: hidden size not divisible by heads");
  if (K.rows() != L || V.rows() != L || static_cast<Eigen::Index>(key_mask.size()) != L) {
    throw std::invalid_argument("attention: length mismatch");
  }
  const Eigen::Index d = H / nh;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<Matrix> probs(heads);
  Matrix out = Matrix::Zero(L, H);
  for (Eigen::Index h = 0; h < nh; ++h) {
    Matrix scores = Q.middleCols(h * d, d) * K.middleCols(h * d, d).transpose();
    Matrix& P = probs[static_cast<std::size_t>(h)];
    P = Matrix::Zero(L, L);
    for (Eigen::Index i = 0; i < L; ++i) {
      double max_score = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < L; ++j) {
        if (key_mask[static_cast<std::size_t>(j)] == 0 || (causal && j > i)) continue;
        max_score = std::max(max_score, scores(i, j) * inv_sqrt_d);
      }
      if (!std::isfinite(max_score)) continue;
      double total = 0.0;
      for (Eigen::Index j = 0; j < L; ++j) {
        if (key_mask[static_cast<std::size_t>(j)] == 0 || (causal && j > i)) continue;
        const double e = std::exp(scores(i, j) * inv_sqrt_d - max_score);
        P(i, j) = e;
        total += e;
      }
      P.row(i) /= total;
    }
    out.middleCols(h * d, d).noalias() = P * V.middleCols(h * d, d);
  }

  return t.record(std::move(out), {q, k, v}, [q, k, v, d, nh, inv_sqrt_d, probs = std::move(probs)](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    const Matrix& Qv = tp.value(q);
    const Matrix& Kv = tp.value(k);
    const Matrix& Vv = tp.value(v);
    const bool gq = wants(tp, q), gk = wants(tp, k), gv = wants(tp, v);
    for (Eigen::Index h = 0; h < nh; ++h) {
      const Matrix& P = probs[static_cast<std::size_t>(h)];
      const auto gh = g.middleCols(h * d, d);
      if (gv) tp.grad_of(v.id()).middleCols(h * d, d).noalias() += P.transpose() * gh;
      if (!gq && !gk) continue;
      Matrix dP = gh * Vv.middleCols(h * d, d).transpose();
      Eigen::VectorXd row_dot = (dP.array() * P.array()).rowwise().sum();
      Matrix dS = P.array() * (dP.array().colwise() - row_dot.array());
      dS *= inv_sqrt_d;
      if (gq) tp.grad_of(q.id()).middleCols(h * d, d).noalias() += dS * Kv.middleCols(h * d, d);
      if (gk) tp.grad_of(k.id()).middleCols(h * d, d).noalias() += dS.transpose() * Qv.middleCols(h * d, d);
    }
  });
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Var cross_entropy_sum(Tape& t, Var logits, std::span<const int> targets) {
  const Matrix& z = t.value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != z.rows()) {
    throw std::invalid_argument("cross_entropy_sum: one target per row required");
  }
  Matrix probs = softmax_rows(z);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int y = targets[static_cast<std::size_t>(r)];
    if (y < 0) continue;
    if (y >= z.cols()) throw std::out_of_range("cross_entropy_sum: target out of range");
    const double m = z.row(r).maxCoeff();
    const double lse = m + std::log((z.row(r).array() - m).exp().sum());
    loss += lse - z(r, y);
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  std::vector<int> ys(targets.begin(), targets.end());
  return t.record(std::move(out), {logits}, [logits, ys = std::move(ys), probs = std::move(probs)](Tape& tp, int self) {
    const double g = tp.grad_of(self)(0, 0);
    Matrix& gz = tp.grad_of(logits.id());
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      const int y = ys[static_cast<std::size_t>(r)];
      if (y < 0) continue;
      gz.row(r) += g * probs.row(r);
      gz(r, y) -= g;
    }
  });
}

Var weighted_sum(Tape& t, std::span<const Var> terms, std::span<const double> weights) {
  if (terms.size() != weights.size() || terms.empty()) throw std::invalid_argument("weighted_sum: size mismatch");
  Matrix out = Matrix::Zero(1, 1);
  for (std::size_t i = 0; i < terms.size(); ++i) out(0, 0) += weights[i] * t.scalar(terms[i]);
  std::vector<Var> ts(terms.begin(), terms.end());
  std::vector<double> ws(weights.begin(), weights.end());
  return t.record(std::move(out), terms, [ts = std::move(ts), ws = std::move(ws)](Tape& tp, int self) {
    const double g = tp.grad_of(self)(0, 0);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (wants(tp, ts[i])) tp.grad_of(ts[i].id())(0, 0) += ws[i] * g;
    }
  });
}

}  // namespace mtlaffect::ag
