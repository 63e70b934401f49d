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

#ifndef INTERFLOW_EXPERIMENT_HPP_
#define INTERFLOW_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "interflow/data.hpp"
#include "interflow/model.hpp"
#include "interflow/training.hpp"

namespace interflow {

enum class DatasetKind { mnist, kmnist, fmnist, cifar10, cifar100, synthetic };

std::string_view to_string(DatasetKind kind);

/// Fully resolved experiment description.
///
/// Config files hold `key = value` lines; '#' starts a comment. Keys match
/// the field names below. Unset optional fields fall back to the training
/// defaults (100 epochs and augmentation for CIFAR, 40 epochs and no
/// augmentation otherwise).
struct ExperimentSpec {
  std::string method = "Normal";
  DatasetKind dataset = DatasetKind::synthetic;
  std::filesystem::path data_dir;
  std::filesystem::path output_dir = "interflow-out";
  std::uint64_t seed = 0;
  double scale = 1.0;

  std::optional<int> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr_initial;
  std::optional<double> lr_final;
  std::optional<int> lr_drop_epoch;
  std::optional<double> momentum;
  std::optional<double> weight_decay;
  std::optional<bool> augment;

  /// VGG-plan depth (1..13) for Normal and S0..S9; depths above 13 use the
  /// deep plan for Normal.
  std::size_t depth = 13;
  /// Overrides the method's branch count (even stage split unless the
  /// 13-layer 4/7-branch layout applies).
  std::optional<int> branches;
  std::size_t width_divisor = 1;
  NormalizeMode normalize = NormalizeMode::unit_range;

  SyntheticKind synthetic_kind = SyntheticKind::blobs;
  std::size_t synthetic_classes = 10;
  std::size_t synthetic_per_class = 50;
  std::size_t synthetic_size = 16;
  std::size_t synthetic_channels = 1;
  std::uint64_t data_seed = 1;

  /// Worker threads for sweeps and repetitions; 1 runs them in order.
  std::size_t jobs = 1;

  TrainConfig train_config() const;
};

/// `key` / `value` pairs from the command line, applied after the file.
using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Throws ConfigError (with the 1-based line for file entries) on unknown
/// keys, unparseable values, unknown methods and missing dataset paths.
ExperimentSpec parse_config(std::string_view text,
                            const ConfigOverrides& overrides = {});
ExperimentSpec load_config(const std::filesystem::path& path,
                           const ConfigOverrides& overrides = {});

DatasetPair load_experiment_data(const ExperimentSpec& spec);

InterflowModel build_experiment_model(const ExperimentSpec& spec,
                                      std::size_t num_classes,
                                      std::size_t input_channels);

/// JSON object describing the attention weights of a trained model.
std::string weight_dump_json(const InterflowModel& model,
                             const RunRecord& record);

/// Trains one model and writes metrics.csv, weights.json and checkpoint.bin
/// into spec.output_dir. On failure those files are removed before the
/// exception propagates.
RunRecord run_experiment(const ExperimentSpec& spec);

/// Variant that reuses already loaded data and reports each epoch.
RunRecord run_experiment(const ExperimentSpec& spec, const DatasetPair& data,
                         const EpochCallback& on_epoch = {});

struct DepthResult {
  std::size_t depth = 0;
  double test_accuracy = 0.0;
};

/// Normal models truncated to each depth; run i lives in
/// output_dir/depth-<d>. Writes depth_sweep.csv.
std::vector<DepthResult> depth_sweep(const ExperimentSpec& base,
                                     const std::vector<std::size_t>& depths);
std::string depth_sweep_csv(const std::vector<DepthResult>& rows);

/// Runs seeds seed, seed+1, ... in output_dir/run-<k> (k 1-based), writes
/// summary.csv and returns its contents.
std::string repeat_and_summarize(const ExperimentSpec& spec,
                                 std::size_t repetitions,
                                 const std::vector<std::size_t>& exclude_runs,
                                 std::vector<RunRecord>* records = nullptr);

/// Parses "4..13" or "4,7,13".
std::vector<std::size_t> parse_depth_list(std::string_view text);

}  // namespace interflow

#endif  // INTERFLOW_EXPERIMENT_HPP_
