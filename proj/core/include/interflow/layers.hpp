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

#ifndef INTERFLOW_LAYERS_HPP_
#define INTERFLOW_LAYERS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "interflow/tape.hpp"
#include "interflow/tensor.hpp"

namespace interflow {

enum class Mode { train, eval };

/// 2-D cross-correlation with zero padding. weight is out×in×k×k.
struct Conv2dLayer {
  Tensor weight;
  Tensor bias;
  std::size_t stride = 1;
  std::size_t padding = 0;

  /// Zero-initialized parameters that require gradients.
  static Conv2dLayer make(std::size_t in_channels, std::size_t out_channels,
                          std::size_t kernel, std::size_t stride,
                          std::size_t padding);

  std::size_t in_channels() const { return weight.shape()[1]; }
  std::size_t out_channels() const { return weight.shape()[0]; }
  std::size_t kernel() const { return weight.shape()[2]; }

  /// floor((extent + 2·padding - k) / stride) + 1, or 0 when no output
  /// position fits.
  std::size_t output_extent(std::size_t extent) const;
};

/// Per-channel batch normalization.
///
/// Train mode normalizes with the batch mean and population variance and
/// then folds the batch mean and the unbiased variance into the running
/// statistics: running ← (1 - momentum)·running + momentum·batch.
/// Eval mode normalizes with the running statistics.
struct BatchNormLayer {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  /// gamma = 1, beta = 0, running mean 0, running var 1.
  static BatchNormLayer make(std::size_t channels);

  std::size_t channels() const { return gamma.numel(); }
};

/// x·Wᵀ + b with W of shape out×in.
struct LinearLayer {
  Tensor weight;
  Tensor bias;

  static LinearLayer make(std::size_t in_features, std::size_t out_features);

  std::size_t in_features() const { return weight.shape()[1]; }
  std::size_t out_features() const { return weight.shape()[0]; }
};

/// N×C×H×W -> N×out×H'×W'.
Tensor conv2d_forward(Tape& tape, const Conv2dLayer& layer, const Tensor& x);

/// Updates the running statistics in train mode.
Tensor batchnorm_forward(Tape& tape, BatchNormLayer& layer, const Tensor& x,
                         Mode mode);

/// max(0, x); the subgradient at 0 is 0.
Tensor relu(Tape& tape, const Tensor& x);

/// N×C×H×W -> N×C spatial mean. Also serves as adaptive pooling to 1×1.
Tensor global_avg_pool(Tape& tape, const Tensor& x);

Tensor linear_forward(Tape& tape, const LinearLayer& layer, const Tensor& x);

/// Mean over the batch of -log softmax(logits)[label]. Softmax uses
/// max-subtraction. Gradient: (softmax - onehot) / N.
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits,
                             std::span<const int> labels);

/// Row-wise softmax of an N×C tensor, untaped.
std::vector<double> softmax_rows(const Tensor& logits);

}  // namespace interflow

#endif  // INTERFLOW_LAYERS_HPP_
