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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "mtlaffect/autograd.hpp"

using namespace mtlaffect;
using mtlaffect::testing::grad_check;

namespace {

ag::Parameter random_param(const char* name, int rows, int cols, Rng& rng) {
  ag::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, 0.7);
  return ag::Parameter(name, m);
}

// Reduces any (r x c) node to a scalar through a non-linear loss.
ag::Var reduce(ag::Tape& t, ag::Var x) {
  const auto rows = static_cast<std::size_t>(t.value(x).rows());
  const auto cols = static_cast<int>(t.value(x).cols());
  std::vector<int> targets(rows);
  for (std::size_t i = 0; i < rows; ++i) targets[i] = static_cast<int>(i) % cols;
  return ag::cross_entropy_sum(t, x, targets);
}

void expect_gradients_match(std::vector<ag::Parameter*> params, const std::function<ag::Var(ag::Tape&)>& fn) {
  const auto r = grad_check(params, fn, 40, 11);
  CHECK(r.max_relative_error <= 1e-6);
  CHECK(r.max_abs_grad > 0.0);
}

}  // namespace

TEST_CASE("elementwise and linear ops match finite differences") {
  Rng rng(3);
  auto a = random_param("a", 3, 4, rng);
  auto b = random_param("b", 4, 5, rng);
  auto c = random_param("c", 3, 5, rng);
  auto row = random_param("row", 1, 5, rng);

  expect_gradients_match({&a, &b, &c, &row}, [&](ag::Tape& t) {
    ag::Var x = ag::matmul(t, t.param(a), t.param(b));
    x = ag::add(t, x, t.param(c));
    x = ag::add_row(t, x, t.param(row));
    return reduce(t, ag::scale(t, x, 0.7));
  });
  expect_gradients_match({&a, &b, &row}, [&](ag::Tape& t) {
    return reduce(t, ag::gelu(t, ag::linear(t, t.param(a), t.param(b), t.param(row))));
  });
}

TEST_CASE("layer norm matches finite differences") {
  Rng rng(5);
  auto x = random_param("x", 4, 6, rng);
  auto g = random_param("g", 1, 6, rng);
  auto b = random_param("b", 1, 6, rng);
  expect_gradients_match({&x, &g, &b},
                         [&](ag::Tape& t) { return reduce(t, ag::layer_norm(t, t.param(x), t.param(g), t.param(b))); });
}

TEST_CASE("row manipulation matches finite differences") {
  Rng rng(9);
  auto table = random_param("table", 6, 4, rng);
  auto other = random_param("other", 2, 4, rng);
  const std::vector<int> rows = {3, 0, 3, 5};
  const std::vector<std::size_t> pool = {0, 2, 3};
  expect_gradients_match({&table, &other}, [&](ag::Tape& t) {
    ag::Var g = ag::gather_rows(t, t.param(table), rows);
    ag::Var s = ag::slice_rows(t, g, 1, 3);
    std::vector<ag::Var> parts = {s, t.param(other), ag::max_pool_rows(t, g, pool)};
    return reduce(t, ag::concat_rows(t, parts));
  });
}

TEST_CASE("attention matches finite differences with and without causality") {
  Rng rng(13);
  auto q = random_param("q", 5, 8, rng);
  auto k = random_param("k", 5, 8, rng);
  auto v = random_param("v", 5, 8, rng);
  const std::vector<std::uint8_t> mask = {1, 1, 1, 0, 1};
  for (bool causal : {false, true}) {
    expect_gradients_match({&q, &k, &v}, [&](ag::Tape& t) {
      return reduce(t, ag::attention(t, t.param(q), t.param(k), t.param(v), 2, causal, mask));
    });
  }
}

TEST_CASE("weighted sum and skipped cross-entropy rows") {
  Rng rng(17);
  auto x = random_param("x", 3, 3, rng);
  const std::vector<int> targets = {2, -1, 0};
  expect_gradients_match({&x}, [&](ag::Tape& t) {
    ag::Var l1 = ag::cross_entropy_sum(t, t.param(x), targets);
    ag::Var l2 = reduce(t, ag::scale(t, t.param(x), -1.5));
    const std::vector<ag::Var> terms = {l1, l2};
    const std::vector<double> weights = {0.25, 0.75};
    return ag::weighted_sum(t, terms, weights);
  });

  ag::Tape t(false);
  ag::Matrix logits(1, 3);
  logits << 0.0, 0.0, 0.0;
  const std::vector<int> skip = {-1};
  CHECK(t.scalar(ag::cross_entropy_sum(t, t.constant(logits), skip)) == 0.0);
  const std::vector<int> one = {1};
  CHECK(t.scalar(ag::cross_entropy_sum(t, t.constant(logits), one)) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("max pool is idempotent under duplicated rows and picks the first of ties") {
  ag::Tape t(false);
  ag::Matrix m(3, 2);
  m << 1.0, 5.0, 4.0, 2.0, 4.0, 5.0;
  ag::Var x = t.constant(m);
  const std::vector<std::size_t> once = {0, 1};
  const std::vector<std::size_t> twice = {0, 1, 1, 0};
  CHECK(t.value(ag::max_pool_rows(t, x, once)) == t.value(ag::max_pool_rows(t, x, twice)));

  ag::Parameter p("p", m);
  ag::Tape g;
  const std::vector<std::size_t> tied = {1, 2};
  ag::Var pooled = ag::max_pool_rows(g, g.param(p), tied);
  const std::vector<ag::Var> terms = {ag::matmul(g, pooled, g.constant(ag::Matrix::Ones(2, 1)))};
  const std::vector<double> w = {1.0};
  g.backward(ag::weighted_sum(g, terms, w));
  // Column 0 ties between rows 1 and 2: the first listed row takes the gradient.
  CHECK(p.grad(1, 0) == 1.0);
  CHECK(p.grad(2, 0) == 0.0);
  CHECK(p.grad(2, 1) == 1.0);
}

TEST_CASE("softmax rows sum to one") {
  ag::Matrix m(2, 4);
  m << 1, 2, 3, 4, -100, 0, 100, 3;
  const ag::Matrix s = ag::softmax_rows(m);
  for (Eigen::Index r = 0; r < s.rows(); ++r) CHECK(s.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dropout at rate zero is the identity and a no-grad tape records values only") {
  Rng rng(1);
  ag::Tape t(false);
  ag::Matrix m = ag::Matrix::Constant(2, 2, 3.0);
  ag::Var x = t.constant(m);
  CHECK(t.value(ag::dropout(t, x, 0.0, rng)) == m);
  CHECK_FALSE(t.needs_grad(x));
}
