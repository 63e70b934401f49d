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

#include "interflow/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <stdexcept>

#include "interflow/error.hpp"

namespace interflow {
namespace {

constexpr char kMagic[8] = {'I', 'F', 'L', 'W', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t offset() const { return pos_; }

  template <typename T>
  T le() {
    need(sizeof(T), "integer");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::uint64_t n, const char* what) {
    need(n, what);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated while reading ") +
                            what,
                        pos_);
    }
  }

  std::string_view bytes_;
  std::uint64_t pos_ = 0;
};

std::string opt_to_string(const std::optional<bool>& v) {
  return v ? (*v ? "true" : "false") : "-";
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::size_t to_size(std::string_view s, const std::string& key) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error("checkpoint manifest: bad number '" + std::string(s) +
                "' for key " + key);
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<bool> parse_opt_bool(const std::string& v) {
  if (v == "-") return std::nullopt;
  return v == "true";
}

}  // namespace

std::string model_manifest(const InterflowModel& model) {
  const MethodConfig& m = model.method();
  std::ostringstream out;
  out << "format = interflow-checkpoint\n";
  out << "method = " << m.name << "\n";
  out << "interflow = " << (m.interflow ? "true" : "false") << "\n";
  out << "branches = "
      << (m.branches ? std::to_string(*m.branches) : std::string("-")) << "\n";
  out << "shared_per_class = " << opt_to_string(m.shared_per_class) << "\n";
  out << "initialization = " << opt_to_string(m.initialization) << "\n";
  out << "learned = " << opt_to_string(m.learned) << "\n";
  out << "attention = "
      << (model.attention() ? std::string(to_string(model.attention()->mode))
                            : std::string("none"))
      << "\n";
  out << "num_classes = " << model.num_classes() << "\n";
  out << "input_channels = " << model.backbone().input_channels << "\n";
  out << "layers = ";
  const auto& layers = model.backbone().layers;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const ConvSpec& c = layers[i];
    if (i > 0) out << ",";
    out << c.in_channels << ":" << c.out_channels << ":" << c.kernel << ":"
        << c.stride << ":" << c.padding;
  }
  out << "\n";
  out << "boundaries = " << join(model.partition().boundaries) << "\n";
  out << "share_classifiers = "
      << (model.options().share_classifiers ? "true" : "false") << "\n";
  out << "frozen = " << join(model.frozen_layers()) << "\n";
  return out.str();
}

Checkpoint make_checkpoint(const InterflowModel& model) {
  Checkpoint ck;
  ck.manifest = model_manifest(model);
  for (const NamedTensor& t : model.state()) {
    ck.tensors.push_back({t.name, t.tensor.clone()});
  }
  return ck;
}

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, checkpoint.manifest.size());
  out += checkpoint.manifest;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const NamedTensor& t : checkpoint.tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    const auto& dims = t.tensor.shape().dims();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
    for (std::size_t d : dims) put_le<std::uint64_t>(out, d);
    for (double v : t.tensor.values()) {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof(kMagic), "magic") != std::string_view(kMagic, sizeof(kMagic))) {
    throw FormatError("not a checkpoint (bad magic)", 0);
  }
  const std::uint64_t version_at = r.offset();
  if (r.le<std::uint32_t>() != kVersion) {
    throw FormatError("unsupported checkpoint version", version_at);
  }
  Checkpoint ck;
  const auto manifest_len = r.le<std::uint64_t>();
  ck.manifest = std::string(r.take(manifest_len, "manifest"));
  const auto count = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t entry_at = r.offset();
    const auto name_len = r.le<std::uint32_t>();
    std::string name(r.take(name_len, "tensor name"));
    const auto rank = r.le<std::uint32_t>();
    if (rank == 0) {
      throw FormatError("tensor '" + name + "' has rank 0", entry_at);
    }
    std::vector<std::size_t> dims;
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint64_t dims_at = r.offset();
      const auto extent = r.le<std::uint64_t>();
      if (extent == 0 || numel > (bytes.size() / 8) / extent) {
        throw FormatError("tensor '" + name + "' has an invalid extent",
                          dims_at);
      }
      numel *= extent;
      dims.push_back(static_cast<std::size_t>(extent));
    }
    std::vector<double> values(numel);
    for (double& v : values) v = std::bit_cast<double>(r.le<std::uint64_t>());
    ck.tensors.push_back({std::move(name),
                          Tensor(Shape(std::move(dims)), std::move(values))});
  }
  if (r.offset() != bytes.size()) {
    throw FormatError("trailing bytes after last tensor", r.offset());
  }
  return ck;
}

void write_checkpoint(const std::filesystem::path& path,
                      const InterflowModel& model) {
  const std::string bytes = encode_checkpoint(make_checkpoint(model));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error("cannot write checkpoint " + path.string());
  }
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open checkpoint " + path.string());
  }
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

InterflowModel restore_model(const Checkpoint& checkpoint) {
  std::map<std::string, std::string> kv;
  std::istringstream lines(checkpoint.manifest);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw Error("checkpoint manifest is missing key '" + key + "'");
    }
    return it->second;
  };

  MethodConfig method;
  method.name = get("method");
  method.interflow = get("interflow") == "true";
  if (get("branches") != "-") {
    method.branches = static_cast<int>(to_size(get("branches"), "branches"));
  }
  method.shared_per_class = parse_opt_bool(get("shared_per_class"));
  method.initialization = parse_opt_bool(get("initialization"));
  method.learned = parse_opt_bool(get("learned"));

  BackboneSpec backbone;
  backbone.input_channels = to_size(get("input_channels"), "input_channels");
  for (std::string_view layer : split(get("layers"), ',')) {
    const auto f = split(layer, ':');
    if (f.size() != 5) {
      throw Error("checkpoint manifest: malformed layer '" +
                  std::string(layer) + "'");
    }
    backbone.layers.push_back(ConvSpec{to_size(f[0], "layers"),
                                       to_size(f[1], "layers"),
                                       to_size(f[2], "layers"),
                                       to_size(f[3], "layers"),
                                       to_size(f[4], "layers")});
  }
  StagePartition partition;
  for (std::string_view b : split(get("boundaries"), ',')) {
    partition.boundaries.push_back(to_size(b, "boundaries"));
  }
  ModelOptions options;
  options.share_classifiers = get("share_classifiers") == "true";
  const std::size_t classes = to_size(get("num_classes"), "num_classes");

  std::vector<double> attention;
  for (const NamedTensor& t : checkpoint.tensors) {
    if (t.name == "attention.weights") {
      attention.assign(t.tensor.values().begin(), t.tensor.values().end());
    }
  }
  InterflowModel model = InterflowModel::build_with_attention(
      backbone, method, partition, classes, 0, std::move(attention), options);
  model.load_state(checkpoint.tensors);
  for (std::string_view f : split(get("frozen"), ',')) {
    const std::size_t layer = to_size(f, "frozen");
    model.freeze_layers(layer, layer);
  }
  return model;
}

}  // namespace interflow
