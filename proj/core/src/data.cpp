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

#include "interflow/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "interflow/error.hpp"
#include "interflow/rng.hpp"

namespace interflow {
namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::uint32_t read_be32(std::string_view bytes, std::size_t offset,
                        const char* what) {
  if (bytes.size() < offset + 4) {
    throw FormatError(std::string("truncated ") + what, bytes.size());
  }
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
  }
  return v;
}

void put_be32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

unsigned char to_byte(double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::invalid_argument("pixel value outside [0,1] cannot be encoded");
  }
  return static_cast<unsigned char>(std::lround(x * 255.0));
}

bool ends_with_gz(const std::filesystem::path& p) {
  return p.extension() == ".gz";
}

}  // namespace

void Dataset::validate() const {
  if (labels.empty()) {
    throw std::invalid_argument("dataset is empty");
  }
  if (images.shape().rank() != 4 || images.shape()[0] != labels.size()) {
    throw std::invalid_argument("dataset has " + std::to_string(labels.size()) +
                                " labels but images of shape " +
                                images.shape().to_string());
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw std::invalid_argument("label " + std::to_string(labels[i]) +
                                  " of sample " + std::to_string(i) +
                                  " is outside [0, " +
                                  std::to_string(num_classes) + ")");
    }
  }
}

std::string read_file_bytes(const std::filesystem::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) {
    throw Error("cannot open " + path.string());
  }
  std::string out;
  char buf[1 << 16];
  while (true) {
    const int n = gzread(f, buf, sizeof(buf));
    if (n < 0) {
      int errnum = 0;
      const std::string msg = gzerror(f, &errnum);
      gzclose(f);
      throw FormatError("cannot inflate " + path.string() + ": " + msg,
                        out.size());
    }
    if (n == 0) break;
    out.append(buf, static_cast<std::size_t>(n));
  }
  gzclose(f);
  return out;
}

void write_file_bytes(const std::filesystem::path& path,
                      std::string_view bytes) {
  gzFile f = gzopen(path.c_str(), ends_with_gz(path) ? "wb9" : "wbT");
  if (f == nullptr) {
    throw Error("cannot create " + path.string());
  }
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<unsigned>(
        std::min<std::size_t>(bytes.size() - done, 1u << 20));
    if (gzwrite(f, bytes.data() + done, chunk) != static_cast<int>(chunk)) {
      gzclose(f);
      throw Error("cannot write " + path.string());
    }
    done += chunk;
  }
  if (gzclose(f) != Z_OK) {
    throw Error("cannot finish " + path.string());
  }
}

Dataset decode_idx(std::string_view image_bytes, std::string_view label_bytes,
                   std::size_t num_classes, Split split) {
  if (read_be32(image_bytes, 0, "image header") != kIdxImageMagic) {
    throw FormatError("image file has wrong IDX magic", 0);
  }
  if (read_be32(label_bytes, 0, "label header") != kIdxLabelMagic) {
    throw FormatError("label file has wrong IDX magic", 0);
  }
  const std::size_t n = read_be32(image_bytes, 4, "image header");
  const std::size_t h = read_be32(image_bytes, 8, "image header");
  const std::size_t w = read_be32(image_bytes, 12, "image header");
  const std::size_t n_labels = read_be32(label_bytes, 4, "label header");
  if (n != n_labels) {
    throw FormatError("image file holds " + std::to_string(n) +
                          " items but label file holds " +
                          std::to_string(n_labels),
                      4);
  }
  if (n == 0 || h == 0 || w == 0) {
    throw FormatError("IDX image file declares an empty tensor", 4);
  }
  const std::size_t pixels = n * h * w;
  if (image_bytes.size() - 16 < pixels) {
    throw FormatError("image payload truncated", image_bytes.size());
  }
  if (label_bytes.size() - 8 < n) {
    throw FormatError("label payload truncated", label_bytes.size());
  }

  Dataset ds;
  ds.num_classes = num_classes;
  ds.split = split;
  std::vector<double> values(pixels);
  for (std::size_t i = 0; i < pixels; ++i) {
    values[i] = static_cast<unsigned char>(image_bytes[16 + i]) / 255.0;
  }
  ds.images = Tensor(Shape{n, 1, h, w}, std::move(values));
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<unsigned char>(label_bytes[8 + i]);
    if (static_cast<std::size_t>(label) >= num_classes) {
      throw FormatError("label " + std::to_string(label) + " out of range",
                        8 + i);
    }
    ds.labels[i] = label;
  }
  return ds;
}

Dataset load_idx(const std::filesystem::path& image_path,
                 const std::filesystem::path& label_path,
                 std::size_t num_classes, Split split) {
  return decode_idx(read_file_bytes(image_path), read_file_bytes(label_path),
                    num_classes, split);
}

std::string encode_idx_images(const Dataset& ds) {
  if (ds.channels() != 1) {
    throw std::invalid_argument("IDX images must have one channel");
  }
  std::string out;
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(ds.size()));
  put_be32(out, static_cast<std::uint32_t>(ds.height()));
  put_be32(out, static_cast<std::uint32_t>(ds.width()));
  for (double x : ds.images.values()) out.push_back(static_cast<char>(to_byte(x)));
  return out;
}

std::string encode_idx_labels(const Dataset& ds) {
  std::string out;
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(ds.size()));
  for (int label : ds.labels) out.push_back(static_cast<char>(label));
  return out;
}

void write_idx(const Dataset& ds, const std::filesystem::path& image_path,
               const std::filesystem::path& label_path) {
  write_file_bytes(image_path, encode_idx_images(ds));
  write_file_bytes(label_path, encode_idx_labels(ds));
}

Dataset load_idx_dir(const std::filesystem::path& dir, Split split,
                     std::size_t num_classes) {
  const std::string prefix = split == Split::train ? "train" : "t10k";
  auto pick = [&](const std::string& stem) {
    const auto plain = dir / stem;
    if (std::filesystem::exists(plain)) return plain;
    const auto gz = dir / (stem + ".gz");
    if (std::filesystem::exists(gz)) return gz;
    throw Error("missing " + plain.string() + "[.gz]");
  };
  return load_idx(pick(prefix + "-images-idx3-ubyte"),
                  pick(prefix + "-labels-idx1-ubyte"), num_classes, split);
}

std::size_t cifar_record_size(CifarVariant variant) {
  return variant == CifarVariant::cifar10 ? 3073 : 3074;
}

std::size_t cifar_classes(CifarVariant variant) {
  switch (variant) {
    case CifarVariant::cifar10:
      return 10;
    case CifarVariant::cifar100_coarse:
      return 20;
    case CifarVariant::cifar100_fine:
      return 100;
  }
  return 0;
}

Dataset decode_cifar(std::string_view bytes, CifarVariant variant,
                     Split split) {
  const std::size_t record = cifar_record_size(variant);
  const std::size_t prefix = record - 3072;
  if (bytes.empty() || bytes.size() % record != 0) {
    throw FormatError("CIFAR file size " + std::to_string(bytes.size()) +
                          " is not a positive multiple of " +
                          std::to_string(record),
                      bytes.size() - bytes.size() % record);
  }
  const std::size_t n = bytes.size() / record;
  const std::size_t classes = cifar_classes(variant);
  Dataset ds;
  ds.num_classes = classes;
  ds.split = split;
  ds.labels.resize(n);
  std::vector<double> values(n * 3072);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t at = r * record;
    const std::size_t label_at =
        variant == CifarVariant::cifar100_fine ? at + 1 : at;
    const int label = static_cast<unsigned char>(bytes[label_at]);
    if (static_cast<std::size_t>(label) >= classes) {
      throw FormatError("record " + std::to_string(r) + " has label " +
                            std::to_string(label),
                        label_at);
    }
    ds.labels[r] = label;
    for (std::size_t i = 0; i < 3072; ++i) {
      values[r * 3072 + i] =
          static_cast<unsigned char>(bytes[at + prefix + i]) / 255.0;
    }
  }
  ds.images = Tensor(Shape{n, 3, 32, 32}, std::move(values));
  return ds;
}

Dataset load_cifar_binary(const std::vector<std::filesystem::path>& paths,
                          CifarVariant variant, Split split) {
  if (paths.empty()) {
    throw std::invalid_argument("no CIFAR files given");
  }
  std::string all;
  for (const auto& p : paths) {
    const std::string bytes = read_file_bytes(p);
    try {
      decode_cifar(bytes, variant, split);
    } catch (const FormatError& e) {
      throw FormatError(p.string() + ": " + e.what(), e.offset());
    }
    all += bytes;
  }
  return decode_cifar(all, variant, split);
}

std::string encode_cifar(const Dataset& ds, CifarVariant variant) {
  if (ds.channels() != 3 || ds.height() != 32 || ds.width() != 32) {
    throw std::invalid_argument("CIFAR records hold 3×32×32 images");
  }
  std::string out;
  out.reserve(ds.size() * cifar_record_size(variant));
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const int label = ds.labels[r];
    switch (variant) {
      case CifarVariant::cifar10:
        out.push_back(static_cast<char>(label));
        break;
      case CifarVariant::cifar100_coarse:
        out.push_back(static_cast<char>(label));
        out.push_back(static_cast<char>(label * 5));
        break;
      case CifarVariant::cifar100_fine:
        out.push_back(static_cast<char>(label / 5));
        out.push_back(static_cast<char>(label));
        break;
    }
    for (double x : ds.image(r)) out.push_back(static_cast<char>(to_byte(x)));
  }
  return out;
}

DatasetPair synthetic_dataset(SyntheticKind kind, std::size_t n_per_class,
                              std::size_t classes, std::size_t image_size,
                              std::uint64_t seed, std::size_t channels) {
  if (classes < 2) {
    throw std::invalid_argument("synthetic data needs at least 2 classes");
  }
  if (n_per_class < 5) {
    throw std::invalid_argument("synthetic data needs at least 5 samples "
                                "per class for the 80/20 split");
  }
  if (image_size < 4 || channels == 0) {
    throw std::invalid_argument("synthetic images must be at least 4×4");
  }
  const std::size_t n_test = n_per_class / 5;
  const std::size_t n_train = n_per_class - n_test;
  const double s = static_cast<double>(image_size);
  const double centre = (s - 1.0) / 2.0;
  const double noise = 0.05;

  auto render = [&](std::size_t c, std::size_t index, std::vector<double>& out) {
    Rng rng = Rng::derive(seed, {c, index});
    const double jx = 0.5 * rng.normal();
    const double jy = 0.5 * rng.normal();
    double cx = centre + jx;
    double cy = centre + jy;
    double radius = 0.0;
    double sigma = s / 8.0;
    if (kind == SyntheticKind::blobs) {
      const double angle =
          2.0 * std::numbers::pi * static_cast<double>(c) / classes;
      cx += 0.25 * s * std::sin(angle);
      cy -= 0.25 * s * std::cos(angle);
    } else {
      radius = (static_cast<double>(c) + 1.0) / (classes + 1.0) * (s / 2.0);
      sigma = std::max(0.5, s / (4.0 * (classes + 1.0)));
    }
    for (std::size_t ch = 0; ch < channels; ++ch) {
      for (std::size_t y = 0; y < image_size; ++y) {
        for (std::size_t x = 0; x < image_size; ++x) {
          const double dx = static_cast<double>(x) - cx;
          const double dy = static_cast<double>(y) - cy;
          const double d = kind == SyntheticKind::blobs
                               ? std::sqrt(dx * dx + dy * dy)
                               : std::sqrt(dx * dx + dy * dy) - radius;
          double v = std::exp(-(d * d) / (2.0 * sigma * sigma));
          v += noise * rng.normal();
          out.push_back(std::clamp(v, 0.0, 1.0));
        }
      }
    }
  };

  auto make = [&](std::size_t first, std::size_t count, Split split) {
    Dataset ds;
    ds.num_classes = classes;
    ds.split = split;
    std::vector<double> values;
    values.reserve(count * classes * channels * image_size * image_size);
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t c = 0; c < classes; ++c) {
        render(c, first + i, values);
        ds.labels.push_back(static_cast<int>(c));
      }
    }
    ds.images = Tensor(Shape{count * classes, channels, image_size, image_size},
                       std::move(values));
    return ds;
  };

  return DatasetPair{make(0, n_train, Split::train),
                     make(n_train, n_test, Split::test)};
}

ChannelStats channel_stats(const Dataset& ds) {
  const std::size_t c = ds.channels();
  const std::size_t plane = ds.height() * ds.width();
  const auto v = ds.images.values();
  ChannelStats stats;
  stats.mean.assign(c, 0.0);
  stats.stddev.assign(c, 0.0);
  const double count = static_cast<double>(ds.size() * plane);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t n = 0; n < ds.size(); ++n) {
      const std::size_t base = (n * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) sum += v[base + i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < ds.size(); ++n) {
      const std::size_t base = (n * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = v[base + i] - mean;
        sq += d * d;
      }
    }
    const double sd = std::sqrt(sq / count);
    if (!(sd > 0.0)) {
      throw std::invalid_argument("channel " + std::to_string(ch) +
                                  " has zero standard deviation");
    }
    stats.mean[ch] = mean;
    stats.stddev[ch] = sd;
  }
  return stats;
}

Dataset normalize(const Dataset& ds, NormalizeMode mode,
                  const ChannelStats* stats) {
  Dataset out = ds;
  out.images = ds.images.clone();
  auto v = out.images.mutable_values();
  if (mode == NormalizeMode::unit_range) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (*lo >= 0.0 && *hi <= 1.0) return out;
    const double min = *lo;
    const double range = *hi - *lo;
    for (double& x : v) x = range > 0.0 ? (x - min) / range : 0.0;
    return out;
  }
  ChannelStats own;
  if (stats == nullptr) {
    if (ds.split == Split::test) {
      throw std::invalid_argument(
          "a test split must be standardized with training statistics");
    }
    own = channel_stats(ds);
    stats = &own;
  }
  const std::size_t c = ds.channels();
  if (stats->mean.size() != c || stats->stddev.size() != c) {
    throw std::invalid_argument("channel statistics do not match the dataset");
  }
  for (double sd : stats->stddev) {
    if (!(sd > 0.0)) {
      throw std::invalid_argument("zero standard deviation channel");
    }
  }
  const std::size_t plane = ds.height() * ds.width();
  for (std::size_t n = 0; n < ds.size(); ++n) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (n * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        v[base + i] = (v[base + i] - stats->mean[ch]) / stats->stddev[ch];
      }
    }
  }
  return out;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  if (indices.empty()) {
    throw std::invalid_argument("subset would be empty");
  }
  const std::size_t per = ds.image_size();
  Dataset out;
  out.num_classes = ds.num_classes;
  out.split = ds.split;
  std::vector<double> values;
  values.reserve(indices.size() * per);
  for (std::size_t i : indices) {
    if (i >= ds.size()) {
      throw std::out_of_range("subset index " + std::to_string(i) +
                              " out of range");
    }
    const auto img = ds.image(i);
    values.insert(values.end(), img.begin(), img.end());
    out.labels.push_back(ds.labels[i]);
  }
  out.images = Tensor(
      Shape{indices.size(), ds.channels(), ds.height(), ds.width()},
      std::move(values));
  return out;
}

Dataset subsample(const Dataset& ds, double scale, std::uint64_t seed) {
  if (!(scale > 0.0 && scale <= 1.0)) {
    throw std::invalid_argument("scale must lie in (0, 1]");
  }
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (scale == 1.0) return subset(ds, order);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto keep = static_cast<std::size_t>(
      std::ceil(scale * static_cast<double>(ds.size())));
  order.resize(std::max<std::size_t>(1, keep));
  return subset(ds, order);
}

Dataset take_per_class(const Dataset& ds, std::size_t per_class) {
  std::vector<std::size_t> taken(ds.num_classes, 0);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto& t = taken[static_cast<std::size_t>(ds.labels[i])];
    if (t < per_class) {
      ++t;
      keep.push_back(i);
    }
  }
  return subset(ds, keep);
}

}  // namespace interflow
