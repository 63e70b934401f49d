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

#ifndef INTERFLOW_INIT_HPP_
#define INTERFLOW_INIT_HPP_

#include <cstddef>

#include "interflow/rng.hpp"
#include "interflow/tensor.hpp"

namespace interflow {

/// sqrt(6 / (fan_in + fan_out))
double xavier_bound(std::size_t fan_in, std::size_t fan_out);

/// I.i.d. uniform on ±xavier_bound(fan_in, fan_out). For convolutions the
/// fans include the k×k receptive field (in·k·k and out·k·k).
Tensor xavier_init(const Shape& shape, std::size_t fan_in,
                   std::size_t fan_out, Rng& rng, bool requires_grad = true);

/// Overwrites `t` in place with Xavier samples.
void xavier_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace interflow

#endif  // INTERFLOW_INIT_HPP_
