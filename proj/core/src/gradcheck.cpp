// Copyright 2026 The Interflow Authors
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

#include "interflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "interflow/error.hpp"

namespace interflow {
namespace {

double evaluate(const ScalarFunction& f, std::size_t index) {
  Tape tape(/*recording=*/false);
  const double v = f(tape).item();
  if (!std::isfinite(v)) {
    throw NonFiniteError("function value is not finite", index);
  }
  return v;
}

}  // namespace

GradCheckResult finite_diff_check(const ScalarFunction& f, Tensor x,
                                  double step) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("finite_diff_check: step must be positive");
  }
  if (!x.requires_grad()) {
    throw std::invalid_argument(
        "finite_diff_check: x must require a gradient");
  }

  x.zero_grad();
  {
    Tape tape;
    Tensor loss = f(tape);
    tape.backward(loss);
  }
  const std::vector<double> analytic =
      x.has_grad() ? std::vector<double>(x.grad().begin(), x.grad().end())
                   : std::vector<double>(x.numel(), 0.0);

  GradCheckResult result;
  auto values = x.mutable_values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(analytic[i])) {
      throw NonFiniteError("analytic gradient is not finite", i);
    }
    const double saved = values[i];
    values[i] = saved + step;
    const double up = evaluate(f, i);
    values[i] = saved - step;
    const double down = evaluate(f, i);
    values[i] = saved;

    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) /
                       std::max(1.0, std::abs(analytic[i]));
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
    }
  }
  return result;
}

}  // namespace interflow
