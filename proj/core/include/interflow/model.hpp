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

#ifndef INTERFLOW_MODEL_HPP_
#define INTERFLOW_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "interflow/attention.hpp"
#include "interflow/backbone.hpp"
#include "interflow/layers.hpp"
#include "interflow/method.hpp"
#include "interflow/tape.hpp"
#include "interflow/tensor.hpp"

namespace interflow {

struct ConvBlock {
  Conv2dLayer conv;
  BatchNormLayer bn;
  /// Frozen blocks keep their conv and BN affine parameters fixed; BN
  /// running statistics still update in train mode.
  bool frozen = false;
};

/// Global average pool followed by a (possibly shared) classifier.
struct BranchHead {
  /// 1-based conv layer whose output feeds this head.
  std::size_t boundary = 0;
  /// Index into InterflowModel::classifiers().
  std::size_t classifier = 0;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct ForwardResult {
  /// One N×C tensor per branch, shallowest first.
  std::vector<Tensor> branch_logits;
  /// Fused N×C output; the last (only) branch for Normal models.
  Tensor logits;
};

struct ModelOptions {
  /// Heads whose stage outputs have equal channel counts reuse one
  /// classifier.
  bool share_classifiers = true;
};

/// Conv stack + stage partition + branch heads + attention module.
///
/// Normal models have a single head on the last layer and no attention;
/// their output is that head's logits. Interflow models tap every stage
/// boundary without detaching, so the trunk and each head receive the sum
/// of gradients from all downstream paths.
class InterflowModel {
 public:
  /// Xavier-initialized conv and classifier weights (zero biases), BN at
  /// identity, attention weights from `method`. All draws come from one
  /// generator seeded with `seed`.
  static InterflowModel build(const BackboneSpec& backbone,
                              const MethodConfig& method,
                              const StagePartition& partition,
                              std::size_t num_classes, std::uint64_t seed,
                              const ModelOptions& options = {});

  /// Same architecture with explicitly given attention values (no RNG
  /// draw for them). Used when restoring checkpoints and in tests.
  static InterflowModel build_with_attention(
      const BackboneSpec& backbone, const MethodConfig& method,
      const StagePartition& partition, std::size_t num_classes,
      std::uint64_t seed, std::vector<double> attention_weights,
      const ModelOptions& options = {});

  // Parameter tensors are handles, so a copy would alias the original.
  InterflowModel(const InterflowModel&) = delete;
  InterflowModel& operator=(const InterflowModel&) = delete;
  InterflowModel(InterflowModel&&) = default;
  InterflowModel& operator=(InterflowModel&&) = default;

  ForwardResult forward(Tape& tape, const Tensor& x, Mode mode);

  /// Per-branch logits only.
  std::vector<Tensor> branch_forward(Tape& tape, const Tensor& x, Mode mode);

  const BackboneSpec& backbone() const { return backbone_; }
  const MethodConfig& method() const { return method_; }
  const StagePartition& partition() const { return partition_; }
  const ModelOptions& options() const { return options_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t depth() const { return blocks_.size(); }
  std::size_t branches() const { return heads_.size(); }

  const std::vector<ConvBlock>& blocks() const { return blocks_; }
  std::vector<ConvBlock>& blocks() { return blocks_; }
  const std::vector<BranchHead>& heads() const { return heads_; }
  const std::vector<LinearLayer>& classifiers() const { return classifiers_; }
  std::vector<LinearLayer>& classifiers() { return classifiers_; }
  const std::optional<AttentionModule>& attention() const { return attention_; }
  std::optional<AttentionModule>& attention() { return attention_; }

  /// Learnable tensors (conv, BN affine, classifiers, learnable attention)
  /// including frozen ones.
  std::vector<NamedTensor> parameters() const;
  /// Tensors the optimizer updates: parameters() that require a gradient.
  std::vector<NamedTensor> trainable_parameters() const;
  /// parameters() plus BN running statistics and fixed attention weights;
  /// everything a checkpoint stores.
  std::vector<NamedTensor> state() const;
  /// Copies values from `tensors` by name. Every state() entry must be
  /// present with a matching shape.
  void load_state(const std::vector<NamedTensor>& tensors);

  /// Freezes 1-based layers first..last inclusive.
  void freeze_layers(std::size_t first, std::size_t last);
  std::vector<std::size_t> frozen_layers() const;

  void zero_grad();

  /// Current attention values, empty for Normal.
  std::vector<double> attention_values() const;

 private:
  InterflowModel() = default;

  BackboneSpec backbone_;
  MethodConfig method_;
  StagePartition partition_;
  ModelOptions options_;
  std::size_t num_classes_ = 0;
  std::vector<ConvBlock> blocks_;
  std::vector<BranchHead> heads_;
  std::vector<LinearLayer> classifiers_;
  std::optional<AttentionModule> attention_;
};

/// Normal (baseline) model on the VGG-16 plan truncated to `depth`.
InterflowModel build_vgg16_backbone(std::size_t num_classes,
                                    std::size_t input_channels,
                                    std::uint64_t seed, std::size_t depth = 13,
                                    const BackboneOptions& options = {});

/// Model for one of the standard methods on the 13-layer VGG plan with the
/// method's branch count and default stage partition.
InterflowModel build_method_model(const MethodConfig& method,
                                  std::size_t num_classes,
                                  std::size_t input_channels,
                                  std::uint64_t seed,
                                  const BackboneOptions& options = {});

/// Plain deep stack of `depth` layers with `branches` soft-scalar branches.
/// Throws when branches > depth - 6.
InterflowModel build_deep_backbone(std::size_t depth, std::size_t branches,
                                   std::size_t num_classes,
                                   std::size_t input_channels,
                                   std::uint64_t seed,
                                   const BackboneOptions& options = {});

}  // namespace interflow

#endif  // INTERFLOW_MODEL_HPP_
