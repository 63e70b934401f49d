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

#include "interflow/init.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace interflow {

double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0) {
    throw std::invalid_argument("xavier: fans must be at least 1");
  }
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Tensor xavier_init(const Shape& shape, std::size_t fan_in, std::size_t fan_out,
                   Rng& rng, bool requires_grad) {
  Tensor t = Tensor::zeros(shape, requires_grad);
  xavier_fill(t, fan_in, fan_out, rng);
  return t;
}

void xavier_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = xavier_bound(fan_in, fan_out);
  for (double& v : t.mutable_values()) v = rng.uniform(-bound, bound);
}

}  // namespace interflow
