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

#ifndef INTERFLOW_BACKBONE_HPP_
#define INTERFLOW_BACKBONE_HPP_

#include <cstddef>
#include <string>
#include <vector>

namespace interflow {

struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;

  bool operator==(const ConvSpec&) const = default;
};

/// Plain conv stack; every layer is conv -> batch norm -> ReLU.
struct BackboneSpec {
  std::size_t input_channels = 0;
  std::vector<ConvSpec> layers;

  std::size_t depth() const { return layers.size(); }
  /// Output channels of 1-based layer `layer`.
  std::size_t channels_at(std::size_t layer) const;
  /// Spatial extent after 1-based layer `layer` for a square input.
  std::size_t extent_at(std::size_t layer, std::size_t input_extent) const;

  bool operator==(const BackboneSpec&) const = default;
};

struct BackboneOptions {
  /// Divides every channel count (rounded down, at least 1). 1 gives the
  /// full-width plan; desk-scale runs use larger divisors.
  std::size_t width_divisor = 1;
};

/// Layers (1-based) that downsample with stride 2.
inline constexpr std::size_t kStridedLayers[] = {2, 4, 7, 10};

/// The 13-layer VGG-16 conv plan (64, 64, 128, 128, 256, 256, 256, 512 ×6),
/// 3×3 kernels with padding 1, stride 2 on layers 2, 4, 7 and 10, truncated
/// to the first `depth` layers (1..13).
BackboneSpec vgg16_backbone_spec(std::size_t input_channels,
                                 std::size_t depth = 13,
                                 const BackboneOptions& options = {});

/// The VGG plan extended to `depth` layers (>= 14) by repeating the last
/// 512-channel layer; same four strided layers.
BackboneSpec deep_backbone_spec(std::size_t depth, std::size_t input_channels,
                                const BackboneOptions& options = {});

/// Stage boundaries: 1-based index of the last conv layer of each stage,
/// strictly increasing, the last one equal to the backbone depth.
struct StagePartition {
  std::vector<std::size_t> boundaries;

  std::size_t branches() const { return boundaries.size(); }
  /// Throws std::invalid_argument unless the boundaries are valid for
  /// `depth`.
  void validate(std::size_t depth) const;
  std::string to_string() const;

  bool operator==(const StagePartition&) const = default;
};

/// Partition of the 13-layer backbone: 4 branches -> [7, 10, 12, 13],
/// 7 branches -> [7, 8, ..., 13]. Any other combination is rejected.
StagePartition stage_partition(std::size_t depth, std::size_t branches);

/// Deep backbones: first boundary at layer 7, the remaining ones spread
/// evenly over layers 8..depth: b_k = 7 + floor(k·(depth - 7)/(n - 1)).
/// Requires 2 <= branches <= depth - 6.
StagePartition deep_stage_partition(std::size_t depth, std::size_t branches);

/// Generic even split: b_k = floor(k·depth/n), k = 1..n.
StagePartition even_stage_partition(std::size_t depth, std::size_t branches);

/// Picks stage_partition for the 13-layer plan with 4 or 7 branches,
/// deep_stage_partition for depth >= 14, even_stage_partition otherwise.
StagePartition default_stage_partition(std::size_t depth, std::size_t branches);

}  // namespace interflow

#endif  // INTERFLOW_BACKBONE_HPP_
