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

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mtlaffect/autograd.hpp"
#include "mtlaffect/random.hpp"

namespace mtlaffect::testing {

struct GradCheckResult {
  std::size_t checked = 0;
  double max_relative_error = 0.0;
  /// Largest |analytic| seen; guards against a vacuous all-zero check.
  double max_abs_grad = 0.0;
};

/// Central differences on `samples` random scalar entries of `params`.
/// Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheckResult grad_check(const std::vector<ag::Parameter*>& params,
                                  const std::function<ag::Var(ag::Tape&)>& loss_fn, std::size_t samples,
                                  std::uint64_t seed, double h = 1e-5, double floor = 1e-6) {
  for (auto* p : params) p->zero_grad();
  {
    ag::Tape tape;
    ag::Var loss = loss_fn(tape);
    tape.backward(loss);
  }
  auto eval = [&] {
    ag::Tape tape(false);
    return tape.scalar(loss_fn(tape));
  };
  Rng rng(seed);
  GradCheckResult r;
  for (std::size_t s = 0; s < samples; ++s) {
    ag::Parameter& p = *params[rng.index(params.size())];
    const auto i = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(p.value.size())));
    double& x = p.value.data()[i];
    const double saved = x;
    x = saved + h;
    const double up = eval();
    x = saved - h;
    const double down = eval();
    x = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = p.grad.data()[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    r.max_relative_error = std::max(r.max_relative_error, std::abs(analytic - numeric) / denom);
    r.max_abs_grad = std::max(r.max_abs_grad, std::abs(analytic));
    ++r.checked;
  }
  return r;
}

}  // namespace mtlaffect::testing
