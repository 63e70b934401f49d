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

#include "interflow/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "interflow/backbone.hpp"
#include "interflow/checkpoint.hpp"
#include "interflow/error.hpp"
#include "interflow/method.hpp"
#include "interflow/rng.hpp"

namespace interflow {
namespace {

namespace fs = std::filesystem;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_bool(std::string_view s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

std::optional<DatasetKind> parse_dataset(std::string_view s) {
  for (DatasetKind k : {DatasetKind::mnist, DatasetKind::kmnist,
                        DatasetKind::fmnist, DatasetKind::cifar10,
                        DatasetKind::cifar100, DatasetKind::synthetic}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

class SpecBuilder {
 public:
  void set(const std::string& key, std::string_view value, int line) {
    auto bad = [&](const std::string& expected) {
      throw ConfigError("bad value '" + std::string(value) + "' for " + key +
                            " (expected " + expected + ")",
                        line);
    };
    auto number = [&](auto& field, const char* expected) {
      std::remove_reference_t<decltype(field)> v{};
      if (!parse_number(value, v)) bad(expected);
      field = v;
    };
    auto optional_number = [&](auto& field, const char* expected) {
      typename std::remove_reference_t<decltype(field)>::value_type v{};
      if (!parse_number(value, v)) bad(expected);
      field = v;
    };

    if (key == "method") {
      try {
        resolve_method_config(value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what(), line);
      }
      spec_.method = std::string(value);
    } else if (key == "dataset") {
      const auto kind = parse_dataset(value);
      if (!kind) bad("mnist, kmnist, fmnist, cifar10, cifar100 or synthetic");
      spec_.dataset = *kind;
    } else if (key == "data_dir") {
      spec_.data_dir = std::string(value);
    } else if (key == "output_dir" || key == "out") {
      spec_.output_dir = std::string(value);
    } else if (key == "seed") {
      number(spec_.seed, "a non-negative integer");
    } else if (key == "scale") {
      number(spec_.scale, "a number in (0, 1]");
      if (!(spec_.scale > 0.0 && spec_.scale <= 1.0)) bad("a number in (0, 1]");
    } else if (key == "epochs") {
      optional_number(spec_.epochs, "a positive integer");
      if (*spec_.epochs < 1) bad("a positive integer");
    } else if (key == "batch_size" || key == "batch") {
      optional_number(spec_.batch_size, "an integer >= 2");
      if (*spec_.batch_size < 2) bad("an integer >= 2");
    } else if (key == "lr_initial") {
      optional_number(spec_.lr_initial, "a number >= 0");
      if (!(*spec_.lr_initial >= 0.0)) bad("a number >= 0");
    } else if (key == "lr_final") {
      optional_number(spec_.lr_final, "a number >= 0");
      if (!(*spec_.lr_final >= 0.0)) bad("a number >= 0");
    } else if (key == "lr_drop_epoch") {
      optional_number(spec_.lr_drop_epoch, "an integer");
    } else if (key == "momentum") {
      optional_number(spec_.momentum, "a number in [0, 1)");
    } else if (key == "weight_decay") {
      optional_number(spec_.weight_decay, "a non-negative number");
    } else if (key == "augment") {
      bool b = false;
      if (!parse_bool(value, b)) bad("true or false");
      spec_.augment = b;
    } else if (key == "depth") {
      number(spec_.depth, "a positive integer");
      if (spec_.depth < 1) bad("a positive integer");
    } else if (key == "branches") {
      optional_number(spec_.branches, "a positive integer");
      if (*spec_.branches < 1) bad("a positive integer");
    } else if (key == "width_divisor") {
      number(spec_.width_divisor, "a positive integer");
      if (spec_.width_divisor < 1) bad("a positive integer");
    } else if (key == "normalize") {
      if (value == "unit_range") {
        spec_.normalize = NormalizeMode::unit_range;
      } else if (value == "per_channel_standard") {
        spec_.normalize = NormalizeMode::per_channel_standard;
      } else {
        bad("unit_range or per_channel_standard");
      }
    } else if (key == "synthetic_kind") {
      if (value == "blobs") {
        spec_.synthetic_kind = SyntheticKind::blobs;
      } else if (value == "rings") {
        spec_.synthetic_kind = SyntheticKind::rings;
      } else {
        bad("blobs or rings");
      }
    } else if (key == "synthetic_classes") {
      number(spec_.synthetic_classes, "an integer >= 2");
      if (spec_.synthetic_classes < 2) bad("an integer >= 2");
    } else if (key == "synthetic_per_class") {
      number(spec_.synthetic_per_class, "an integer >= 5");
      if (spec_.synthetic_per_class < 5) bad("an integer >= 5");
    } else if (key == "synthetic_size") {
      number(spec_.synthetic_size, "an integer >= 4");
      if (spec_.synthetic_size < 4) bad("an integer >= 4");
    } else if (key == "synthetic_channels") {
      number(spec_.synthetic_channels, "a positive integer");
      if (spec_.synthetic_channels < 1) bad("a positive integer");
    } else if (key == "data_seed") {
      number(spec_.data_seed, "a non-negative integer");
    } else if (key == "jobs") {
      number(spec_.jobs, "a positive integer");
      if (spec_.jobs < 1) bad("a positive integer");
    } else {
      throw ConfigError("unknown key '" + key + "'", line);
    }
    lines_[key] = line;
  }

  ExperimentSpec finish() {
    const int dataset_line = line_of("dataset");
    if (spec_.dataset != DatasetKind::synthetic) {
      const int line = lines_.count("data_dir") ? lines_["data_dir"] : dataset_line;
      if (spec_.data_dir.empty()) {
        throw ConfigError("dataset " + std::string(to_string(spec_.dataset)) +
                              " needs data_dir",
                          line);
      }
      if (!fs::is_directory(spec_.data_dir)) {
        throw ConfigError("data_dir " + spec_.data_dir.string() +
                              " does not exist",
                          line);
      }
    }
    try {
      spec_.train_config().validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what(), 0);
    }
    return spec_;
  }

 private:
  int line_of(const std::string& key) const {
    auto it = lines_.find(key);
    return it == lines_.end() ? 0 : it->second;
  }

  ExperimentSpec spec_;
  std::map<std::string, int> lines_;
};

void run_indexed(std::size_t count, std::size_t jobs,
                 const std::function<void(std::size_t)>& task) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < std::min(jobs, count); ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::mnist:
      return "mnist";
    case DatasetKind::kmnist:
      return "kmnist";
    case DatasetKind::fmnist:
      return "fmnist";
    case DatasetKind::cifar10:
      return "cifar10";
    case DatasetKind::cifar100:
      return "cifar100";
    case DatasetKind::synthetic:
      return "synthetic";
  }
  return "?";
}

TrainConfig ExperimentSpec::train_config() const {
  const bool cifar =
      dataset == DatasetKind::cifar10 || dataset == DatasetKind::cifar100;
  TrainConfig cfg;
  cfg.epochs = epochs.value_or(cifar ? 100 : 40);
  cfg.batch_size = batch_size.value_or(cfg.batch_size);
  cfg.momentum = momentum.value_or(cfg.momentum);
  cfg.weight_decay = weight_decay.value_or(cfg.weight_decay);
  cfg.lr_initial = lr_initial.value_or(cfg.lr_initial);
  cfg.lr_final = lr_final.value_or(cfg.lr_final);
  cfg.lr_drop_epoch = lr_drop_epoch;
  cfg.augment = augment.value_or(cifar);
  cfg.seed = seed;
  return cfg;
}

ExperimentSpec parse_config(std::string_view text,
                            const ConfigOverrides& overrides) {
  SpecBuilder builder;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    ++line_no;
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("expected 'key = value'", line_no);
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("missing key", line_no);
    builder.set(key, value, line_no);
  }
  for (const auto& [key, value] : overrides) {
    try {
      builder.set(key, trim(value), 0);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("--") + key + ": " + e.what(), 0);
    }
  }
  return builder.finish();
}

ExperimentSpec load_config(const fs::path& path,
                           const ConfigOverrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot read config " + path.string(), 0);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

DatasetPair load_experiment_data(const ExperimentSpec& spec) {
  DatasetPair data;
  switch (spec.dataset) {
    case DatasetKind::mnist:
    case DatasetKind::kmnist:
    case DatasetKind::fmnist:
      data.train = load_idx_dir(spec.data_dir, Split::train);
      data.test = load_idx_dir(spec.data_dir, Split::test);
      break;
    case DatasetKind::cifar10: {
      std::vector<fs::path> train_files;
      for (int i = 1; i <= 5; ++i) {
        train_files.push_back(spec.data_dir /
                              ("data_batch_" + std::to_string(i) + ".bin"));
      }
      data.train = load_cifar_binary(train_files, CifarVariant::cifar10,
                                     Split::train);
      data.test = load_cifar_binary({spec.data_dir / "test_batch.bin"},
                                    CifarVariant::cifar10, Split::test);
      break;
    }
    case DatasetKind::cifar100:
      data.train = load_cifar_binary({spec.data_dir / "train.bin"},
                                     CifarVariant::cifar100_fine, Split::train);
      data.test = load_cifar_binary({spec.data_dir / "test.bin"},
                                    CifarVariant::cifar100_fine, Split::test);
      break;
    case DatasetKind::synthetic:
      data = synthetic_dataset(spec.synthetic_kind, spec.synthetic_per_class,
                               spec.synthetic_classes, spec.synthetic_size,
                               spec.data_seed, spec.synthetic_channels);
      break;
  }
  if (spec.scale < 1.0) {
    data.train = subsample(data.train, spec.scale, spec.data_seed);
  }
  if (spec.normalize == NormalizeMode::per_channel_standard) {
    const ChannelStats stats = channel_stats(data.train);
    data.train = normalize(data.train, NormalizeMode::per_channel_standard, &stats);
    data.test = normalize(data.test, NormalizeMode::per_channel_standard, &stats);
  } else {
    data.train = normalize(data.train, NormalizeMode::unit_range);
    data.test = normalize(data.test, NormalizeMode::unit_range);
  }
  return data;
}

InterflowModel build_experiment_model(const ExperimentSpec& spec,
                                      std::size_t num_classes,
                                      std::size_t input_channels) {
  BackboneOptions opts;
  opts.width_divisor = spec.width_divisor;
  MethodConfig method = resolve_method_config(spec.method);

  if (spec.method.starts_with("deep:")) {
    const auto colon = spec.method.rfind(':');
    std::size_t depth = 0;
    parse_number(std::string_view(spec.method).substr(5, colon - 5), depth);
    return build_deep_backbone(depth, static_cast<std::size_t>(*method.branches),
                               num_classes, input_channels, spec.seed, opts);
  }

  const BackboneSpec backbone =
      spec.depth > 13 ? deep_backbone_spec(spec.depth, input_channels, opts)
                      : vgg16_backbone_spec(input_channels, spec.depth, opts);
  if (!method.interflow) {
    return InterflowModel::build(backbone, method, StagePartition{{spec.depth}},
                                 num_classes, spec.seed);
  }
  if (spec.branches) method = with_branches(method, *spec.branches);
  const StagePartition partition = default_stage_partition(
      spec.depth, static_cast<std::size_t>(*method.branches));
  return InterflowModel::build(backbone, method, partition, num_classes,
                               spec.seed);
}

std::string weight_dump_json(const InterflowModel& model,
                             const RunRecord& record) {
  const MethodConfig& method = model.method();
  nlohmann::ordered_json j;
  j["method"] = method.name;
  j["branches"] = model.attention() ? model.branches() : 0;
  j["classes"] = model.num_classes();
  if (const auto mode = method.attention_mode()) {
    j["attention"] = std::string(to_string(*mode));
    j["learned"] = *mode != AttentionMode::hard;
    j["parameter_count"] = method.learnable_weight_count(model.num_classes());
    j["weights"] = record.final_attention_weights;
  } else {
    j["attention"] = "none";
    j["learned"] = false;
    j["parameter_count"] = 0;
    j["weights"] = nullptr;
  }
  j["seed"] = record.seed;
  j["final_accuracy"] = record.per_epoch.empty()
                            ? 0.0
                            : record.final_test_accuracy();
  return j.dump(2) + "\n";
}

RunRecord run_experiment(const ExperimentSpec& spec) {
  return run_experiment(spec, load_experiment_data(spec));
}

RunRecord run_experiment(const ExperimentSpec& spec, const DatasetPair& data,
                         const EpochCallback& on_epoch) {
  InterflowModel model =
      build_experiment_model(spec, data.train.num_classes, data.train.channels());
  fs::create_directories(spec.output_dir);
  const fs::path metrics_path = spec.output_dir / "metrics.csv";
  const fs::path weights_path = spec.output_dir / "weights.json";
  const fs::path checkpoint_path = spec.output_dir / "checkpoint.bin";
  try {
    std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
    if (!metrics) throw Error("cannot write " + metrics_path.string());
    metrics << metrics_csv_header() << "\n";
    const RunRecord record = train_epochs(
        model, data.train, data.test, spec.train_config(),
        [&](const EpochMetrics& m) {
          metrics << metrics_csv_line(m) << "\n" << std::flush;
          if (on_epoch) on_epoch(m);
        });
    metrics.close();
    if (!metrics) throw Error("cannot write " + metrics_path.string());
    write_text(weights_path, weight_dump_json(model, record));
    write_checkpoint(checkpoint_path, model);
    return record;
  } catch (...) {
    std::error_code ec;
    fs::remove(metrics_path, ec);
    fs::remove(weights_path, ec);
    fs::remove(checkpoint_path, ec);
    throw;
  }
}

std::vector<DepthResult> depth_sweep(const ExperimentSpec& base,
                                     const std::vector<std::size_t>& depths) {
  if (depths.empty()) throw std::invalid_argument("no depths given");
  const DatasetPair data = load_experiment_data(base);
  std::vector<DepthResult> rows(depths.size());
  run_indexed(depths.size(), base.jobs, [&](std::size_t i) {
    ExperimentSpec spec = base;
    spec.method = "Normal";
    spec.branches.reset();
    spec.depth = depths[i];
    spec.seed = Rng::derive(base.seed, {depths[i]}).next_u64();
    spec.output_dir = base.output_dir / ("depth-" + std::to_string(depths[i]));
    const RunRecord r = run_experiment(spec, data);
    rows[i] = DepthResult{depths[i], r.final_test_accuracy()};
  });
  fs::create_directories(base.output_dir);
  write_text(base.output_dir / "depth_sweep.csv", depth_sweep_csv(rows));
  return rows;
}

std::string depth_sweep_csv(const std::vector<DepthResult>& rows) {
  std::string out = "depth,test_accuracy\n";
  for (const DepthResult& r : rows) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), r.test_accuracy);
    out += std::to_string(r.depth) + "," + std::string(buf, res.ptr) + "\n";
  }
  return out;
}

std::string repeat_and_summarize(const ExperimentSpec& spec,
                                 std::size_t repetitions,
                                 const std::vector<std::size_t>& exclude_runs,
                                 std::vector<RunRecord>* records) {
  if (repetitions < 2) {
    throw std::invalid_argument("repetitions must be at least 2");
  }
  for (std::size_t k : exclude_runs) {
    if (k < 1 || k > repetitions) {
      throw std::invalid_argument("excluded run " + std::to_string(k) +
                                  " is outside 1.." +
                                  std::to_string(repetitions));
    }
  }
  const DatasetPair data = load_experiment_data(spec);
  std::vector<RunRecord> runs(repetitions);
  run_indexed(repetitions, spec.jobs, [&](std::size_t i) {
    ExperimentSpec s = spec;
    s.seed = spec.seed + i;
    s.output_dir = spec.output_dir / ("run-" + std::to_string(i + 1));
    runs[i] = run_experiment(s, data);
  });
  const std::string table = weight_table_csv(runs, exclude_runs);
  fs::create_directories(spec.output_dir);
  write_text(spec.output_dir / "summary.csv", table);
  if (records != nullptr) *records = std::move(runs);
  return table;
}

std::vector<std::size_t> parse_depth_list(std::string_view text) {
  auto bad = [&] {
    return std::invalid_argument("bad depth list '" + std::string(text) +
                                 "' (expected e.g. 4..13 or 4,7,13)");
  };
  std::vector<std::size_t> out;
  text = trim(text);
  if (const auto dots = text.find(".."); dots != std::string_view::npos) {
    std::size_t lo = 0;
    std::size_t hi = 0;
    if (!parse_number(trim(text.substr(0, dots)), lo) ||
        !parse_number(trim(text.substr(dots + 2)), hi) || lo < 1 || lo > hi) {
      throw bad();
    }
    for (std::size_t d = lo; d <= hi; ++d) out.push_back(d);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = trim(text.substr(
        start, comma == std::string_view::npos ? std::string_view::npos
                                               : comma - start));
    std::size_t d = 0;
    if (!parse_number(item, d) || d < 1) throw bad();
    out.push_back(d);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace interflow
