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

#include "interflow/backbone.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace interflow {
namespace {

constexpr std::array<std::size_t, 13> kVggChannels = {
    64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512};

bool is_strided(std::size_t layer) {
  return std::find(std::begin(kStridedLayers), std::end(kStridedLayers),
                   layer) != std::end(kStridedLayers);
}

BackboneSpec plan(std::size_t input_channels, std::size_t depth,
                  const BackboneOptions& options) {
  if (input_channels == 0) {
    throw std::invalid_argument("backbone needs at least one input channel");
  }
  if (options.width_divisor == 0) {
    throw std::invalid_argument("width_divisor must be positive");
  }
  BackboneSpec spec;
  spec.input_channels = input_channels;
  std::size_t in = input_channels;
  for (std::size_t layer = 1; layer <= depth; ++layer) {
    const std::size_t full = kVggChannels[std::min(layer, kVggChannels.size()) - 1];
    const std::size_t out = std::max<std::size_t>(1, full / options.width_divisor);
    spec.layers.push_back(ConvSpec{in, out, 3, is_strided(layer) ? 2u : 1u, 1});
    in = out;
  }
  return spec;
}

}  // namespace

std::size_t BackboneSpec::channels_at(std::size_t layer) const {
  if (layer == 0 || layer > layers.size()) {
    throw std::out_of_range("layer index out of range");
  }
  return layers[layer - 1].out_channels;
}

std::size_t BackboneSpec::extent_at(std::size_t layer,
                                    std::size_t input_extent) const {
  if (layer > layers.size()) {
    throw std::out_of_range("layer index out of range");
  }
  std::size_t e = input_extent;
  for (std::size_t i = 0; i < layer; ++i) {
    const ConvSpec& c = layers[i];
    if (e + 2 * c.padding < c.kernel) return 0;
    e = (e + 2 * c.padding - c.kernel) / c.stride + 1;
  }
  return e;
}

BackboneSpec vgg16_backbone_spec(std::size_t input_channels, std::size_t depth,
                                 const BackboneOptions& options) {
  if (depth < 1 || depth > 13) {
    throw std::invalid_argument("VGG-16 backbone depth must be in 1..13");
  }
  return plan(input_channels, depth, options);
}

BackboneSpec deep_backbone_spec(std::size_t depth, std::size_t input_channels,
                                const BackboneOptions& options) {
  if (depth < 14) {
    throw std::invalid_argument("deep backbone depth must be at least 14");
  }
  return plan(input_channels, depth, options);
}

void StagePartition::validate(std::size_t depth) const {
  if (boundaries.empty()) {
    throw std::invalid_argument("stage partition has no boundaries");
  }
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    if (boundaries[i] == 0 || (i > 0 && boundaries[i] <= boundaries[i - 1])) {
      throw std::invalid_argument("stage boundaries must be strictly "
                                  "increasing and 1-based: " + to_string());
    }
  }
  if (boundaries.back() != depth) {
    throw std::invalid_argument("last stage boundary must equal depth " +
                                std::to_string(depth) + ": " + to_string());
  }
}

std::string StagePartition::to_string() const {
  std::string out = "[";
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(boundaries[i]);
  }
  return out + "]";
}

StagePartition stage_partition(std::size_t depth, std::size_t branches) {
  if (depth == 13 && branches == 4) return {{7, 10, 12, 13}};
  if (depth == 13 && branches == 7) return {{7, 8, 9, 10, 11, 12, 13}};
  throw std::invalid_argument(
      "the 13-layer backbone supports 4 or 7 branches, got depth " +
      std::to_string(depth) + " with " + std::to_string(branches));
}

StagePartition deep_stage_partition(std::size_t depth, std::size_t branches) {
  if (depth < 14) {
    throw std::invalid_argument("deep backbone depth must be at least 14");
  }
  if (branches < 2 || branches + 6 > depth) {
    throw std::invalid_argument(
        "deep backbone of depth " + std::to_string(depth) +
        " supports 2.." + std::to_string(depth - 6) + " branches, got " +
        std::to_string(branches));
  }
  StagePartition p;
  p.boundaries.push_back(7);
  for (std::size_t k = 1; k < branches; ++k) {
    p.boundaries.push_back(7 + k * (depth - 7) / (branches - 1));
  }
  return p;
}

StagePartition even_stage_partition(std::size_t depth, std::size_t branches) {
  if (branches < 1 || branches > depth) {
    throw std::invalid_argument("cannot split " + std::to_string(depth) +
                                " layers into " + std::to_string(branches) +
                                " stages");
  }
  StagePartition p;
  for (std::size_t k = 1; k <= branches; ++k) {
    p.boundaries.push_back(k * depth / branches);
  }
  return p;
}

StagePartition default_stage_partition(std::size_t depth,
                                       std::size_t branches) {
  if (depth == 13 && (branches == 4 || branches == 7)) {
    return stage_partition(depth, branches);
  }
  if (depth >= 14 && branches >= 2) return deep_stage_partition(depth, branches);
  return even_stage_partition(depth, branches);
}

}  // namespace interflow
