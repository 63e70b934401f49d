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

#ifndef INTERFLOW_ATTENTION_HPP_
#define INTERFLOW_ATTENTION_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "interflow/tape.hpp"
#include "interflow/tensor.hpp"

namespace interflow {

enum class AttentionMode {
  hard,           // fixed weights, one per branch, no gradient
  soft_scalar,    // one learned weight per branch
  soft_perclass,  // one learned weight per branch and class
};

std::string_view to_string(AttentionMode mode);

/// Fuses n branch confidence vectors into one. Weights are raw reals: no
/// bias, no normalization, negative values allowed.
struct AttentionModule {
  AttentionMode mode = AttentionMode::soft_scalar;
  /// Shape (n) for hard and soft_scalar, (n×C) for soft_perclass.
  Tensor weights;

  static AttentionModule hard(std::vector<double> weights);
  static AttentionModule soft_scalar(std::vector<double> weights);
  /// `weights` is row-major n×C.
  static AttentionModule soft_perclass(std::size_t branches,
                                       std::size_t classes,
                                       std::vector<double> weights);

  bool learnable() const { return mode != AttentionMode::hard; }
  std::size_t branches() const { return weights.shape()[0]; }
};

/// Σ_i w_i · z_i with constant weights; only the branch logits get a
/// gradient.
Tensor attention_fuse_hard(Tape& tape, std::span<const Tensor> branch_logits,
                           std::span<const double> weights);

/// Σ_i w_i · z_i with the weights on the tape.
Tensor attention_fuse_soft_scalar(Tape& tape,
                                  std::span<const Tensor> branch_logits,
                                  const AttentionModule& attention);

/// out[·, c] = Σ_i W[i, c] · z_i[·, c].
Tensor attention_fuse_soft_perclass(Tape& tape,
                                    std::span<const Tensor> branch_logits,
                                    const AttentionModule& attention);

/// Dispatches on `attention.mode`.
Tensor attention_fuse(Tape& tape, std::span<const Tensor> branch_logits,
                      const AttentionModule& attention);

}  // namespace interflow

#endif  // INTERFLOW_ATTENTION_HPP_
