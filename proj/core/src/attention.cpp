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

#include "interflow/attention.hpp"

#include <string>
#include <utility>

#include "interflow/error.hpp"

namespace interflow {
namespace {

void check_branches(std::span<const Tensor> z) {
  if (z.empty()) {
    throw ShapeError("attention fuse needs at least one branch");
  }
  const Shape& s = z[0].shape();
  if (s.rank() != 2) {
    throw ShapeError("branch logits must be N×C, got " + s.to_string());
  }
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (!(z[i].shape() == s)) {
      throw ShapeError("branch " + std::to_string(i) + " has shape " +
                       z[i].shape().to_string() + ", branch 0 has " +
                       s.to_string());
    }
  }
}

// Both fuse flavours share this loop so that a per-class weight matrix with
// constant rows reproduces the scalar result bit for bit: out starts at
// w_0·z_0 and adds w_i·z_i in branch order.
Tensor weighted_sum(Tape& tape, std::span<const Tensor> z, const Tensor& w,
                    bool per_class) {
  check_branches(z);
  const std::size_t n_branches = z.size();
  const std::size_t rows = z[0].shape()[0];
  const std::size_t classes = z[0].shape()[1];
  const Shape expected =
      per_class ? Shape{n_branches, classes} : Shape{n_branches};
  if (!(w.shape() == expected)) {
    throw ShapeError("attention weights have shape " + w.shape().to_string() +
                     ", expected " + expected.to_string());
  }

  const auto wv = w.values();
  auto weight = [&](std::size_t i, std::size_t c) {
    return per_class ? wv[i * classes + c] : wv[i];
  };

  std::vector<double> out(rows * classes);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t j = r * classes + c;
      double acc = weight(0, c) * z[0].values()[j];
      for (std::size_t i = 1; i < n_branches; ++i) {
        acc += weight(i, c) * z[i].values()[j];
      }
      out[j] = acc;
    }
  }

  std::vector<Tensor> inputs(z.begin(), z.end());
  inputs.push_back(w);
  std::vector<Tensor> branches(z.begin(), z.end());
  return tape.record(
      Tensor(Shape{rows, classes}, std::move(out)), std::move(inputs),
      [branches = std::move(branches), w = w, per_class, rows,
       classes](const Tensor& y) mutable {
        const auto g = y.grad();
        const auto wv = w.values();
        for (std::size_t i = 0; i < branches.size(); ++i) {
          Tensor& zi = branches[i];
          if (zi.requires_grad()) {
            auto dz = zi.mutable_grad();
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < classes; ++c) {
                const double wic = per_class ? wv[i * classes + c] : wv[i];
                dz[r * classes + c] += wic * g[r * classes + c];
              }
            }
          }
          if (w.requires_grad()) {
            auto dw = w.mutable_grad();
            const auto zv = zi.values();
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < classes; ++c) {
                const double contrib = g[r * classes + c] * zv[r * classes + c];
                if (per_class) {
                  dw[i * classes + c] += contrib;
                } else {
                  dw[i] += contrib;
                }
              }
            }
          }
        }
      });
}

}  // namespace

std::string_view to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::hard: return "hard";
    case AttentionMode::soft_scalar: return "soft_scalar";
    case AttentionMode::soft_perclass: return "soft_perclass";
  }
  return "unknown";
}

AttentionModule AttentionModule::hard(std::vector<double> weights) {
  const std::size_t n = weights.size();
  return {AttentionMode::hard, Tensor(Shape{n}, std::move(weights), false)};
}

AttentionModule AttentionModule::soft_scalar(std::vector<double> weights) {
  const std::size_t n = weights.size();
  return {AttentionMode::soft_scalar,
          Tensor(Shape{n}, std::move(weights), true)};
}

AttentionModule AttentionModule::soft_perclass(std::size_t branches,
                                               std::size_t classes,
                                               std::vector<double> weights) {
  return {AttentionMode::soft_perclass,
          Tensor(Shape{branches, classes}, std::move(weights), true)};
}

Tensor attention_fuse_hard(Tape& tape, std::span<const Tensor> branch_logits,
                           std::span<const double> weights) {
  if (weights.size() != branch_logits.size()) {
    throw ShapeError("hard attention: " + std::to_string(weights.size()) +
                     " weights for " + std::to_string(branch_logits.size()) +
                     " branches");
  }
  const Tensor w(Shape{weights.size()},
                 std::vector<double>(weights.begin(), weights.end()), false);
  return weighted_sum(tape, branch_logits, w, false);
}

Tensor attention_fuse_soft_scalar(Tape& tape,
                                  std::span<const Tensor> branch_logits,
                                  const AttentionModule& attention) {
  return weighted_sum(tape, branch_logits, attention.weights, false);
}

Tensor attention_fuse_soft_perclass(Tape& tape,
                                    std::span<const Tensor> branch_logits,
                                    const AttentionModule& attention) {
  return weighted_sum(tape, branch_logits, attention.weights, true);
}

Tensor attention_fuse(Tape& tape, std::span<const Tensor> branch_logits,
                      const AttentionModule& attention) {
  switch (attention.mode) {
    case AttentionMode::hard:
      return attention_fuse_hard(tape, branch_logits,
                                 attention.weights.values());
    case AttentionMode::soft_scalar:
      return attention_fuse_soft_scalar(tape, branch_logits, attention);
    case AttentionMode::soft_perclass:
      return attention_fuse_soft_perclass(tape, branch_logits, attention);
  }
  throw Error("unknown attention mode");
}

}  // namespace interflow
