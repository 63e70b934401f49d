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

#ifndef INTERFLOW_CHECKPOINT_HPP_
#define INTERFLOW_CHECKPOINT_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "interflow/model.hpp"

namespace interflow {

// Checkpoint layout, all integers little-endian:
//
//   "IFLWCKPT"              8-byte magic
//   u32 version             currently 1
//   u64 manifest length, manifest bytes (UTF-8 "key = value" lines)
//   u32 tensor count
//   per tensor: u32 name length, name bytes, u32 rank, u64 dims[rank],
//               f64 values[numel] (IEEE-754 binary64)

struct Checkpoint {
  std::string manifest;
  std::vector<NamedTensor> tensors;
};

/// Text description of the method, backbone, stage partition and frozen
/// layers; enough to rebuild the architecture.
std::string model_manifest(const InterflowModel& model);

Checkpoint make_checkpoint(const InterflowModel& model);

std::string encode_checkpoint(const Checkpoint& checkpoint);
/// Throws FormatError with the failing byte offset.
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path,
                      const InterflowModel& model);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model described by the manifest and loads every tensor
/// bit for bit.
InterflowModel restore_model(const Checkpoint& checkpoint);

}  // namespace interflow

#endif  // INTERFLOW_CHECKPOINT_HPP_
