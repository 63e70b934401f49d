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

#ifndef INTERFLOW_METHOD_HPP_
#define INTERFLOW_METHOD_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "interflow/attention.hpp"
#include "interflow/rng.hpp"

namespace interflow {

/// One experiment method: the baseline ("Normal"), one of the ten branch
/// configurations S0..S9, or a deep-backbone run "deep:<depth>:<branches>".
///
/// The optional fields are empty for Normal, where they do not apply.
struct MethodConfig {
  std::string name;
  bool interflow = false;
  std::optional<int> branches;
  /// All classes of a branch share one weight (scalar) vs one per class.
  std::optional<bool> shared_per_class;
  /// Attention weights start from the manual values instead of random.
  std::optional<bool> initialization;
  std::optional<bool> learned;

  bool operator==(const MethodConfig&) const = default;

  /// Empty for Normal.
  std::optional<AttentionMode> attention_mode() const;

  /// Number of learnable attention values for `classes` classes: 0 for
  /// Normal and hard attention, n for scalar, n·C for per-class.
  std::size_t learnable_weight_count(std::size_t classes) const;
};

/// The eleven standard methods in table order: Normal, S0, ..., S9.
std::span<const MethodConfig> standard_methods();

/// Looks up a standard method, or parses "deep:<depth>:<branches>" (learned,
/// shared, random init). Throws std::invalid_argument for anything else.
MethodConfig resolve_method_config(std::string_view name);

/// Returns `method` with its branch count replaced. Used for reduced
/// backbones that keep a method's attention flavour with fewer stages.
MethodConfig with_branches(MethodConfig method, int branches);

/// Manual starting weights: (0.1, 0.2, 0.3, 0.4) for 4 branches,
/// (0.1, 0.1, 0.1, 0.1, 0.2, 0.2, 0.2) for 7. Throws for other counts.
std::vector<double> manual_branch_weights(int branches);

/// Initial attention values (row-major n×C for per-class methods). Manual
/// values are broadcast across classes; random ones are uniform on
/// ±1/sqrt(n). Throws for Normal.
std::vector<double> initial_attention_weights(const MethodConfig& method,
                                              std::size_t classes, Rng& rng);

}  // namespace interflow

#endif  // INTERFLOW_METHOD_HPP_
