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

#ifndef INTERFLOW_GRADCHECK_HPP_
#define INTERFLOW_GRADCHECK_HPP_

#include <cstddef>
#include <functional>

#include "interflow/tape.hpp"
#include "interflow/tensor.hpp"

namespace interflow {

/// Scalar-valued function of the graph state. It must read `x` through the
/// handle it was given (or a handle aliasing it) so perturbations are seen.
using ScalarFunction = std::function<Tensor(Tape&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
};

/// Compares the tape gradient of `f` with respect to `x` against central
/// differences:
///
///   max_i |g_i - (f(x + h e_i) - f(x - h e_i)) / 2h| / max(1, |g_i|)
///
/// `x` must require a gradient; its gradient buffer is reset before the
/// analytic pass. Values are restored exactly after each probe. Throws
/// NonFiniteError naming the coordinate when f or its gradient is not finite.
GradCheckResult finite_diff_check(const ScalarFunction& f, Tensor x,
                                  double step = 1e-5);

}  // namespace interflow

#endif  // INTERFLOW_GRADCHECK_HPP_
