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

#ifndef INTERFLOW_TRAINING_HPP_
#define INTERFLOW_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "interflow/data.hpp"
#include "interflow/model.hpp"
#include "interflow/rng.hpp"
#include "interflow/tensor.hpp"

namespace interflow {

struct TrainConfig {
  int epochs = 40;
  std::size_t batch_size = 64;
  double momentum = 0.95;
  double weight_decay = 5e-4;
  double lr_initial = 1e-3;
  double lr_final = 1e-4;
  /// Defaults to max(0, epochs - 20).
  std::optional<int> lr_drop_epoch;
  bool augment = true;
  std::uint64_t seed = 0;

  int drop_epoch() const;
  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double lr = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

struct RunRecord {
  std::vector<EpochMetrics> per_epoch;
  std::vector<double> final_attention_weights;
  std::uint64_t seed = 0;
  std::string method;

  double final_test_accuracy() const;
  bool operator==(const RunRecord&) const = default;
};

double lr_schedule(int epoch, const TrainConfig& cfg);

/// g' = grad + weight_decay·param; v = momentum·v + g'; param -= lr·v.
/// An empty `grad` counts as zero.
void sgd_momentum_step(std::span<double> param, std::span<const double> grad,
                       std::span<double> velocity, double lr, double momentum,
                       double weight_decay);

/// Heavy-ball SGD over a fixed set of parameter tensors.
class SgdMomentum {
 public:
  explicit SgdMomentum(std::vector<Tensor> params);

  void step(double lr, double momentum, double weight_decay);

  std::span<const double> velocity(std::size_t i) const { return velocity_[i]; }
  std::size_t size() const { return params_.size(); }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
};

constexpr std::size_t kAugmentPadding = 4;

/// Zero-pads a C×H×W image by 4 on every side, crops H×W at (offset_y,
/// offset_x) in 0..8 and optionally mirrors left-right.
void pad_crop_flip(std::span<const double> src, std::size_t channels,
                   std::size_t height, std::size_t width, std::size_t offset_y,
                   std::size_t offset_x, bool flip, std::span<double> dst);
Tensor pad_crop_flip(const Tensor& image, std::size_t offset_y,
                     std::size_t offset_x, bool flip);

/// Random offsets uniform on {0..8}², flip with probability 0.5; draws
/// offset_y, offset_x, flip in that order.
Tensor augment_pad_crop_flip(const Tensor& image, Rng& rng);

/// "epoch,train_loss,train_acc,test_acc,lr"
std::string metrics_csv_header();
/// Locale-independent shortest round-trip decimal formatting.
std::string metrics_csv_line(const EpochMetrics& m);

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Mini-batch training on the fused logits. Each epoch shuffles with a
/// seeded Fisher-Yates pass and augments every image from its own stream
/// keyed by (seed, epoch, sample index). A trailing batch of one sample is
/// merged into the previous batch because batch norm needs two values per
/// channel. Throws TrainingAborted on a non-finite loss.
RunRecord train_epochs(InterflowModel& model, const Dataset& train,
                       const Dataset& test, const TrainConfig& cfg,
                       const EpochCallback& on_epoch = {});

/// Fraction of samples whose argmax fused logit (first maximum on ties)
/// equals the label, with batch norm in eval mode.
double evaluate(InterflowModel& model, const Dataset& ds,
                std::size_t batch_size = 256);

/// Argmax fused-logit predictions in dataset order.
std::vector<int> predict(InterflowModel& model, const Dataset& ds,
                         std::size_t batch_size = 256);

struct WeightStatistics {
  std::size_t runs = 0;
  std::vector<double> weight_mean;
  std::vector<double> weight_var;
  double accuracy_mean = 0.0;
  double accuracy_var = 0.0;
};

/// Mean and population variance per attention coordinate and of the final
/// test accuracy. `exclude` holds 0-based record indices to leave out.
WeightStatistics weight_statistics(std::span<const RunRecord> records,
                                   std::span<const std::size_t> exclude = {});

/// Table with one column per weight coordinate plus accuracy and rows
/// "Mean", "Var", then "Mean (-k)", "Var (-k)" when runs are excluded.
/// `exclude_runs` are 1-based run numbers.
std::string weight_table_csv(std::span<const RunRecord> records,
                             std::span<const std::size_t> exclude_runs = {});

}  // namespace interflow

#endif  // INTERFLOW_TRAINING_HPP_
