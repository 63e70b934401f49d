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

#include "interflow/method.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

namespace interflow {
namespace {

MethodConfig row(const char* name, int branches, bool shared, bool init,
                 bool learned) {
  return MethodConfig{name, true, branches, shared, init, learned};
}

const std::array<MethodConfig, 11>& table() {
  static const std::array<MethodConfig, 11> methods = {
      MethodConfig{"Normal", false, std::nullopt, std::nullopt, std::nullopt,
                   std::nullopt},
      row("S0", 4, true, true, false),
      row("S1", 4, true, false, true),
      row("S2", 4, true, true, true),
      row("S3", 4, false, false, true),
      row("S4", 4, false, true, true),
      row("S5", 7, true, true, false),
      row("S6", 7, true, false, true),
      row("S7", 7, true, true, true),
      row("S8", 7, false, false, true),
      row("S9", 7, false, true, true),
  };
  return methods;
}

bool parse_int(std::string_view s, int& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::optional<AttentionMode> MethodConfig::attention_mode() const {
  if (!interflow) return std::nullopt;
  if (!learned.value_or(true)) return AttentionMode::hard;
  return shared_per_class.value_or(true) ? AttentionMode::soft_scalar
                                         : AttentionMode::soft_perclass;
}

std::size_t MethodConfig::learnable_weight_count(std::size_t classes) const {
  const auto mode = attention_mode();
  if (!mode || *mode == AttentionMode::hard) return 0;
  const auto n = static_cast<std::size_t>(branches.value_or(0));
  return *mode == AttentionMode::soft_scalar ? n : n * classes;
}

std::span<const MethodConfig> standard_methods() { return table(); }

MethodConfig resolve_method_config(std::string_view name) {
  for (const MethodConfig& m : table()) {
    if (m.name == name) return m;
  }
  constexpr std::string_view kDeep = "deep:";
  if (name.starts_with(kDeep)) {
    const std::string_view rest = name.substr(kDeep.size());
    const auto colon = rest.find(':');
    int depth = 0;
    int branches = 0;
    if (colon != std::string_view::npos &&
        parse_int(rest.substr(0, colon), depth) &&
        parse_int(rest.substr(colon + 1), branches) && depth > 0 &&
        branches > 0) {
      return MethodConfig{std::string(name), true, branches, true, false, true};
    }
  }
  throw std::invalid_argument("unknown method '" + std::string(name) +
                              "' (expected Normal, S0..S9 or "
                              "deep:<depth>:<branches>)");
}

MethodConfig with_branches(MethodConfig method, int branches) {
  if (!method.interflow) {
    throw std::invalid_argument("method " + method.name + " has no branches");
  }
  if (branches < 1) {
    throw std::invalid_argument("branch count must be positive");
  }
  method.branches = branches;
  return method;
}

std::vector<double> manual_branch_weights(int branches) {
  if (branches == 4) return {0.1, 0.2, 0.3, 0.4};
  if (branches == 7) return {0.1, 0.1, 0.1, 0.1, 0.2, 0.2, 0.2};
  throw std::invalid_argument("manual attention weights exist for 4 or 7 "
                              "branches, not " + std::to_string(branches));
}

std::vector<double> initial_attention_weights(const MethodConfig& method,
                                              std::size_t classes, Rng& rng) {
  const auto mode = method.attention_mode();
  if (!mode) {
    throw std::invalid_argument("method " + method.name +
                                " has no attention module");
  }
  const int n = method.branches.value_or(0);
  std::vector<double> per_branch;
  if (method.initialization.value_or(false)) {
    per_branch = manual_branch_weights(n);
  } else {
    const double bound = 1.0 / std::sqrt(static_cast<double>(n));
    const std::size_t count = *mode == AttentionMode::soft_perclass
                                  ? static_cast<std::size_t>(n) * classes
                                  : static_cast<std::size_t>(n);
    std::vector<double> w(count);
    for (double& v : w) v = rng.uniform(-bound, bound);
    return w;
  }
  if (*mode != AttentionMode::soft_perclass) return per_branch;
  std::vector<double> w;
  w.reserve(per_branch.size() * classes);
  for (double v : per_branch) w.insert(w.end(), classes, v);
  return w;
}

}  // namespace interflow
