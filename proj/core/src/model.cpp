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

#include "interflow/model.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include "interflow/error.hpp"
#include "interflow/init.hpp"
#include "interflow/rng.hpp"

namespace interflow {
namespace {

StagePartition partition_for(const MethodConfig& method,
                             const StagePartition& requested,
                             std::size_t depth) {
  if (!method.interflow) {
    // The baseline has a single head on the last layer.
    return StagePartition{{depth}};
  }
  requested.validate(depth);
  if (static_cast<std::size_t>(method.branches.value_or(0)) !=
      requested.branches()) {
    throw std::invalid_argument(
        "method " + method.name + " declares " +
        std::to_string(method.branches.value_or(0)) +
        " branches but the partition has " +
        std::to_string(requested.branches()));
  }
  return requested;
}

}  // namespace

InterflowModel InterflowModel::build(const BackboneSpec& backbone,
                                     const MethodConfig& method,
                                     const StagePartition& partition,
                                     std::size_t num_classes,
                                     std::uint64_t seed,
                                     const ModelOptions& options) {
  return build_with_attention(backbone, method, partition, num_classes, seed,
                              {}, options);
}

InterflowModel InterflowModel::build_with_attention(
    const BackboneSpec& backbone, const MethodConfig& method,
    const StagePartition& partition, std::size_t num_classes,
    std::uint64_t seed, std::vector<double> attention_weights,
    const ModelOptions& options) {
  if (num_classes < 2) {
    throw std::invalid_argument("a classifier needs at least 2 classes");
  }
  if (backbone.layers.empty()) {
    throw std::invalid_argument("backbone has no layers");
  }

  InterflowModel m;
  m.backbone_ = backbone;
  m.method_ = method;
  m.options_ = options;
  m.num_classes_ = num_classes;
  m.partition_ = partition_for(method, partition, backbone.depth());

  Rng rng(seed);
  std::size_t in = backbone.input_channels;
  for (const ConvSpec& c : backbone.layers) {
    if (c.in_channels != in) {
      throw ShapeError("backbone layer expects " +
                       std::to_string(c.in_channels) +
                       " input channels, previous layer gives " +
                       std::to_string(in));
    }
    ConvBlock block{Conv2dLayer::make(c.in_channels, c.out_channels, c.kernel,
                                      c.stride, c.padding),
                    BatchNormLayer::make(c.out_channels), false};
    const std::size_t rf = c.kernel * c.kernel;
    xavier_fill(block.conv.weight, c.in_channels * rf, c.out_channels * rf,
                rng);
    m.blocks_.push_back(std::move(block));
    in = c.out_channels;
  }

  std::map<std::size_t, std::size_t> by_width;
  for (std::size_t boundary : m.partition_.boundaries) {
    const std::size_t width = backbone.channels_at(boundary);
    std::size_t index;
    auto it = by_width.find(width);
    if (options.share_classifiers && it != by_width.end()) {
      index = it->second;
    } else {
      LinearLayer fc = LinearLayer::make(width, num_classes);
      xavier_fill(fc.weight, width, num_classes, rng);
      index = m.classifiers_.size();
      m.classifiers_.push_back(std::move(fc));
      by_width.emplace(width, index);
    }
    m.heads_.push_back(BranchHead{boundary, index});
  }

  if (const auto mode = method.attention_mode()) {
    if (attention_weights.empty()) {
      attention_weights = initial_attention_weights(method, num_classes, rng);
    }
    const std::size_t n = m.heads_.size();
    const std::size_t expected =
        *mode == AttentionMode::soft_perclass ? n * num_classes : n;
    if (attention_weights.size() != expected) {
      throw ShapeError("attention needs " + std::to_string(expected) +
                       " weights, got " +
                       std::to_string(attention_weights.size()));
    }
    switch (*mode) {
      case AttentionMode::hard:
        m.attention_ = AttentionModule::hard(std::move(attention_weights));
        break;
      case AttentionMode::soft_scalar:
        m.attention_ = AttentionModule::soft_scalar(std::move(attention_weights));
        break;
      case AttentionMode::soft_perclass:
        m.attention_ = AttentionModule::soft_perclass(
            n, num_classes, std::move(attention_weights));
        break;
    }
  }
  return m;
}

std::vector<Tensor> InterflowModel::branch_forward(Tape& tape, const Tensor& x,
                                                   Mode mode) {
  std::vector<Tensor> logits;
  logits.reserve(heads_.size());
  Tensor h = x;
  std::size_t next_head = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    ConvBlock& block = blocks_[i];
    h = conv2d_forward(tape, block.conv, h);
    h = batchnorm_forward(tape, block.bn, h, mode);
    h = relu(tape, h);
    while (next_head < heads_.size() && heads_[next_head].boundary == i + 1) {
      const Tensor pooled = global_avg_pool(tape, h);
      logits.push_back(linear_forward(
          tape, classifiers_[heads_[next_head].classifier], pooled));
      ++next_head;
    }
  }
  return logits;
}

ForwardResult InterflowModel::forward(Tape& tape, const Tensor& x, Mode mode) {
  ForwardResult result;
  result.branch_logits = branch_forward(tape, x, mode);
  if (attention_) {
    result.logits = attention_fuse(tape, result.branch_logits, *attention_);
  } else {
    result.logits = result.branch_logits.back();
  }
  return result;
}

std::vector<NamedTensor> InterflowModel::parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string layer = std::to_string(i + 1);
    out.push_back({"conv" + layer + ".weight", blocks_[i].conv.weight});
    out.push_back({"conv" + layer + ".bias", blocks_[i].conv.bias});
    out.push_back({"bn" + layer + ".gamma", blocks_[i].bn.gamma});
    out.push_back({"bn" + layer + ".beta", blocks_[i].bn.beta});
  }
  for (std::size_t j = 0; j < classifiers_.size(); ++j) {
    const std::string idx = std::to_string(j);
    out.push_back({"classifier" + idx + ".weight", classifiers_[j].weight});
    out.push_back({"classifier" + idx + ".bias", classifiers_[j].bias});
  }
  if (attention_ && attention_->learnable()) {
    out.push_back({"attention.weights", attention_->weights});
  }
  return out;
}

std::vector<NamedTensor> InterflowModel::trainable_parameters() const {
  std::vector<NamedTensor> out;
  for (NamedTensor& p : parameters()) {
    if (p.tensor.requires_grad()) out.push_back(std::move(p));
  }
  return out;
}

std::vector<NamedTensor> InterflowModel::state() const {
  std::vector<NamedTensor> out = parameters();
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string layer = std::to_string(i + 1);
    out.push_back({"bn" + layer + ".running_mean", blocks_[i].bn.running_mean});
    out.push_back({"bn" + layer + ".running_var", blocks_[i].bn.running_var});
  }
  if (attention_ && !attention_->learnable()) {
    out.push_back({"attention.weights", attention_->weights});
  }
  return out;
}

void InterflowModel::load_state(const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const Tensor*> by_name;
  for (const NamedTensor& t : tensors) by_name[t.name] = &t.tensor;
  for (NamedTensor& dst : state()) {
    auto it = by_name.find(dst.name);
    if (it == by_name.end()) {
      throw Error("state is missing tensor '" + dst.name + "'");
    }
    const Tensor& src = *it->second;
    if (!(src.shape() == dst.tensor.shape())) {
      throw ShapeError("tensor '" + dst.name + "' has shape " +
                       src.shape().to_string() + ", model expects " +
                       dst.tensor.shape().to_string());
    }
    std::copy(src.values().begin(), src.values().end(),
              dst.tensor.mutable_values().begin());
  }
}

void InterflowModel::freeze_layers(std::size_t first, std::size_t last) {
  if (first < 1 || last > blocks_.size() || first > last) {
    throw std::out_of_range("freeze_layers: invalid layer range");
  }
  for (std::size_t i = first - 1; i < last; ++i) {
    ConvBlock& b = blocks_[i];
    b.frozen = true;
    b.conv.weight.set_requires_grad(false);
    b.conv.bias.set_requires_grad(false);
    b.bn.gamma.set_requires_grad(false);
    b.bn.beta.set_requires_grad(false);
  }
}

std::vector<std::size_t> InterflowModel::frozen_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].frozen) out.push_back(i + 1);
  }
  return out;
}

void InterflowModel::zero_grad() {
  for (NamedTensor& p : parameters()) p.tensor.zero_grad();
}

std::vector<double> InterflowModel::attention_values() const {
  if (!attention_) return {};
  const auto v = attention_->weights.values();
  return {v.begin(), v.end()};
}

InterflowModel build_vgg16_backbone(std::size_t num_classes,
                                    std::size_t input_channels,
                                    std::uint64_t seed, std::size_t depth,
                                    const BackboneOptions& options) {
  const BackboneSpec spec = vgg16_backbone_spec(input_channels, depth, options);
  return InterflowModel::build(spec, resolve_method_config("Normal"),
                               StagePartition{{depth}}, num_classes, seed);
}

InterflowModel build_method_model(const MethodConfig& method,
                                  std::size_t num_classes,
                                  std::size_t input_channels,
                                  std::uint64_t seed,
                                  const BackboneOptions& options) {
  const BackboneSpec spec = vgg16_backbone_spec(input_channels, 13, options);
  const StagePartition partition =
      method.interflow
          ? stage_partition(13, static_cast<std::size_t>(*method.branches))
          : StagePartition{{13}};
  return InterflowModel::build(spec, method, partition, num_classes, seed);
}

InterflowModel build_deep_backbone(std::size_t depth, std::size_t branches,
                                   std::size_t num_classes,
                                   std::size_t input_channels,
                                   std::uint64_t seed,
                                   const BackboneOptions& options) {
  const StagePartition partition = deep_stage_partition(depth, branches);
  const BackboneSpec spec = deep_backbone_spec(depth, input_channels, options);
  const MethodConfig method = resolve_method_config(
      "deep:" + std::to_string(depth) + ":" + std::to_string(branches));
  return InterflowModel::build(spec, method, partition, num_classes, seed);
}

}  // namespace interflow
