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

#ifndef INTERFLOW_TAPE_HPP_
#define INTERFLOW_TAPE_HPP_

#include <cstddef>
#include <functional>
#include <vector>

#include "interflow/tensor.hpp"

namespace interflow {

enum class BinaryKind { add, sub, mul };

/// Define-by-run computation record.
///
/// Every op returns a fresh tensor. When recording is on and any input
/// requires a gradient, the op appends a node whose backward rule adds the
/// vector-Jacobian product into each input's gradient. Nodes are appended in
/// execution order, so the node list is always topologically sorted.
///
/// A tape is single-threaded. Build a new one per forward pass.
class Tape {
 public:
  /// Backward rule. Runs only when the node's output carries a gradient.
  using BackwardRule = std::function<void(const Tensor& output)>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  /// Marks `output` as requiring a gradient when any input does, and appends
  /// a node when recording. Returns `output`. Op implementations outside
  /// this file use it to register their backward rule.
  Tensor record(Tensor output, std::vector<Tensor> inputs, BackwardRule rule);

  /// a ∘ b elementwise; b may also be a single-element tensor broadcast over a.
  Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind);
  Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::add); }
  Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::sub); }
  Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::mul); }

  /// c·a for a constant c.
  Tensor scale(const Tensor& a, double c);

  /// (M×K)·(K×N) -> M×N.
  Tensor matmul(const Tensor& a, const Tensor& b);

  /// Sum of all elements, as a [1] tensor.
  Tensor sum(const Tensor& a);

  /// Seeds d(loss)/d(loss) = 1 and replays backward rules in reverse order.
  /// Gradients accumulate into existing buffers; zero leaves beforehand when
  /// a fresh gradient is wanted. A tape can be replayed once.
  void backward(const Tensor& loss);

 private:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardRule rule;
  };

  bool recording_;
  bool replayed_ = false;
  std::vector<Node> nodes_;
};

/// Adds `grad` into `t`'s gradient buffer when `t` requires one.
void accumulate_grad(Tensor& t, std::span<const double> grad);

}  // namespace interflow

#endif  // INTERFLOW_TAPE_HPP_
