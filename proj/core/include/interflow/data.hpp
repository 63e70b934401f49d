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

#ifndef INTERFLOW_DATA_HPP_
#define INTERFLOW_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "interflow/tensor.hpp"

namespace interflow {

enum class Split { train, test };

struct Dataset {
  /// N×C×H×W.
  Tensor images;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  std::size_t channels() const { return images.shape()[1]; }
  std::size_t height() const { return images.shape()[2]; }
  std::size_t width() const { return images.shape()[3]; }
  std::size_t image_size() const { return channels() * height() * width(); }

  std::span<const double> image(std::size_t i) const {
    return images.values().subspan(i * image_size(), image_size());
  }

  /// Throws std::invalid_argument when a label is out of range or the
  /// image count disagrees with the label count.
  void validate() const;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

/// Whole file contents. Gzip-compressed files are inflated transparently.
std::string read_file_bytes(const std::filesystem::path& path);
/// Writes gzip when the path ends in ".gz", raw bytes otherwise.
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

// --- IDX (MNIST family) ----------------------------------------------------

Dataset decode_idx(std::string_view image_bytes, std::string_view label_bytes,
                   std::size_t num_classes = 10, Split split = Split::train);
Dataset load_idx(const std::filesystem::path& image_path,
                 const std::filesystem::path& label_path,
                 std::size_t num_classes = 10, Split split = Split::train);

/// Pixels must lie in [0,1]; they are stored as round(255·x).
std::string encode_idx_images(const Dataset& ds);
std::string encode_idx_labels(const Dataset& ds);
void write_idx(const Dataset& ds, const std::filesystem::path& image_path,
               const std::filesystem::path& label_path);

/// Loads `<prefix>-images-idx3-ubyte[.gz]` and `<prefix>-labels-idx1-ubyte[.gz]`
/// (prefix "train" or "t10k") from `dir`.
Dataset load_idx_dir(const std::filesystem::path& dir, Split split,
                     std::size_t num_classes = 10);

// --- CIFAR binary ----------------------------------------------------------

enum class CifarVariant {
  cifar10,         // 1 label byte, 3073-byte records
  cifar100_coarse, // coarse + fine label bytes, 3074-byte records
  cifar100_fine,
};

std::size_t cifar_record_size(CifarVariant variant);
std::size_t cifar_classes(CifarVariant variant);

Dataset decode_cifar(std::string_view bytes, CifarVariant variant,
                     Split split = Split::train);
/// Concatenates the records of every file in order.
Dataset load_cifar_binary(const std::vector<std::filesystem::path>& paths,
                          CifarVariant variant, Split split = Split::train);
/// 32×32 RGB only. For CIFAR-100 the unselected label byte is derived
/// from the selected one (fine / 5 or coarse · 5).
std::string encode_cifar(const Dataset& ds, CifarVariant variant);

// --- synthetic -------------------------------------------------------------

enum class SyntheticKind { blobs, rings };

/// Deterministic class-conditional images with a fixed 80/20 split of each
/// class (n_per_class / 5 test samples per class). Samples are ordered
/// round-robin by class. Blobs put a Gaussian bump at a class-specific point
/// on a circle around the image centre; rings draw a class-specific radius.
DatasetPair synthetic_dataset(SyntheticKind kind, std::size_t n_per_class,
                              std::size_t classes, std::size_t image_size,
                              std::uint64_t seed, std::size_t channels = 1);

// --- normalization and subsets ---------------------------------------------

enum class NormalizeMode { unit_range, per_channel_standard };

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Per-channel mean and population standard deviation. Throws
/// std::invalid_argument for a zero-variance channel.
ChannelStats channel_stats(const Dataset& ds);

/// unit_range: identity when pixels already lie in [0,1], otherwise a
/// global min-max rescale. per_channel_standard: subtracts `stats` (or the
/// dataset's own statistics when null, which a test split refuses).
Dataset normalize(const Dataset& ds, NormalizeMode mode,
                  const ChannelStats* stats = nullptr);

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

/// First ceil(scale·N) samples after a seeded shuffle. scale in (0,1].
Dataset subsample(const Dataset& ds, double scale, std::uint64_t seed);

/// First `per_class` samples of each class in file order.
Dataset take_per_class(const Dataset& ds, std::size_t per_class);

}  // namespace interflow

#endif  // INTERFLOW_DATA_HPP_
