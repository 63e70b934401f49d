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

#include "interflow/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "interflow/error.hpp"
#include "interflow/layers.hpp"
#include "interflow/tape.hpp"

namespace interflow {
namespace {

constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kAugmentStream = 2;

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

// [begin, end) ranges; a lone trailing sample joins the previous batch.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(
    std::size_t n, std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    out.emplace_back(begin, std::min(n, begin + batch_size));
  }
  if (out.size() > 1 && out.back().second - out.back().first == 1) {
    out.pop_back();
    out.back().second = n;
  }
  return out;
}

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

void check_compatible(const InterflowModel& model, const Dataset& ds) {
  if (ds.num_classes != model.num_classes()) {
    throw std::invalid_argument(
        "dataset has " + std::to_string(ds.num_classes) +
        " classes but the model predicts " +
        std::to_string(model.num_classes()));
  }
  if (ds.channels() != model.backbone().input_channels) {
    throw std::invalid_argument(
        "dataset images have " + std::to_string(ds.channels()) +
        " channels but the model expects " +
        std::to_string(model.backbone().input_channels));
  }
}

}  // namespace

int TrainConfig::drop_epoch() const {
  return lr_drop_epoch.value_or(std::max(0, epochs - 20));
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 2) {
    throw std::invalid_argument("batch_size must be at least 2");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) {
    throw std::invalid_argument("weight_decay must be non-negative");
  }
  if (!(lr_initial >= 0.0 && std::isfinite(lr_initial)) ||
      !(lr_final >= 0.0 && std::isfinite(lr_final))) {
    throw std::invalid_argument("learning rates must be finite and >= 0");
  }
  const int drop = drop_epoch();
  if (drop < 0 || drop > epochs) {
    throw std::invalid_argument("lr_drop_epoch must lie in [0, epochs]");
  }
}

double RunRecord::final_test_accuracy() const {
  if (per_epoch.empty()) throw std::logic_error("run has no epochs");
  return per_epoch.back().test_acc;
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  return epoch < cfg.drop_epoch() ? cfg.lr_initial : cfg.lr_final;
}

void sgd_momentum_step(std::span<double> param, std::span<const double> grad,
                       std::span<double> velocity, double lr, double momentum,
                       double weight_decay) {
  if (velocity.size() != param.size() ||
      (!grad.empty() && grad.size() != param.size())) {
    throw ShapeError("sgd_momentum_step: parameter has " +
                     std::to_string(param.size()) + " values, gradient " +
                     std::to_string(grad.size()) + ", velocity " +
                     std::to_string(velocity.size()));
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = (grad.empty() ? 0.0 : grad[i]) + weight_decay * param[i];
    velocity[i] = momentum * velocity[i] + g;
    param[i] -= lr * velocity[i];
  }
}

SgdMomentum::SgdMomentum(std::vector<Tensor> params)
    : params_(std::move(params)) {
  velocity_.reserve(params_.size());
  for (const Tensor& p : params_) velocity_.emplace_back(p.numel(), 0.0);
}

void SgdMomentum::step(double lr, double momentum, double weight_decay) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    sgd_momentum_step(params_[i].mutable_values(), params_[i].grad(),
                      velocity_[i], lr, momentum, weight_decay);
  }
}

void pad_crop_flip(std::span<const double> src, std::size_t channels,
                   std::size_t height, std::size_t width, std::size_t offset_y,
                   std::size_t offset_x, bool flip, std::span<double> dst) {
  const std::size_t span = 2 * kAugmentPadding;
  if (offset_y > span || offset_x > span) {
    throw std::invalid_argument("crop offset outside 0..8");
  }
  if (src.size() != channels * height * width || dst.size() != src.size()) {
    throw ShapeError("pad_crop_flip: buffer size does not match C×H×W");
  }
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      // Row y of the crop is row y + offset_y of the padded image.
      const std::size_t py = y + offset_y;
      const bool row_in = py >= kAugmentPadding && py - kAugmentPadding < height;
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t cx = flip ? width - 1 - x : x;
        const std::size_t px = cx + offset_x;
        const bool col_in =
            px >= kAugmentPadding && px - kAugmentPadding < width;
        dst[(c * height + y) * width + x] =
            row_in && col_in
                ? src[(c * height + (py - kAugmentPadding)) * width +
                      (px - kAugmentPadding)]
                : 0.0;
      }
    }
  }
}

Tensor pad_crop_flip(const Tensor& image, std::size_t offset_y,
                     std::size_t offset_x, bool flip) {
  if (image.shape().rank() != 3) {
    throw ShapeError("pad_crop_flip expects C×H×W, got " +
                     image.shape().to_string());
  }
  Tensor out = Tensor::zeros(image.shape());
  pad_crop_flip(image.values(), image.shape()[0], image.shape()[1],
                image.shape()[2], offset_y, offset_x, flip,
                out.mutable_values());
  return out;
}

Tensor augment_pad_crop_flip(const Tensor& image, Rng& rng) {
  const auto oy = static_cast<std::size_t>(rng.uniform_int(2 * kAugmentPadding + 1));
  const auto ox = static_cast<std::size_t>(rng.uniform_int(2 * kAugmentPadding + 1));
  const bool flip = rng.bernoulli(0.5);
  return pad_crop_flip(image, oy, ox, flip);
}

std::string metrics_csv_header() {
  return "epoch,train_loss,train_acc,test_acc,lr";
}

std::string metrics_csv_line(const EpochMetrics& m) {
  return std::to_string(m.epoch) + "," + format_double(m.train_loss) + "," +
         format_double(m.train_acc) + "," + format_double(m.test_acc) + "," +
         format_double(m.lr);
}

RunRecord train_epochs(InterflowModel& model, const Dataset& train,
                       const Dataset& test, const TrainConfig& cfg,
                       const EpochCallback& on_epoch) {
  cfg.validate();
  train.validate();
  test.validate();
  check_compatible(model, train);
  check_compatible(model, test);

  const std::size_t n = train.size();
  const std::size_t c = train.channels();
  const std::size_t h = train.height();
  const std::size_t w = train.width();
  const std::size_t per = train.image_size();

  RunRecord record;
  record.seed = cfg.seed;
  record.method = model.method().name;

  std::vector<Tensor> params;
  for (NamedTensor& p : model.trainable_parameters()) params.push_back(p.tensor);
  SgdMomentum optimizer(std::move(params));

  Rng shuffle_rng = Rng::derive(cfg.seed, {kShuffleStream});
  std::vector<std::size_t> order(n);
  const auto batches = batch_ranges(n, cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto [begin, end] = batches[b];
      const std::size_t count = end - begin;
      std::vector<double> pixels(count * per);
      std::vector<int> labels(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t idx = order[begin + i];
        const auto src = train.image(idx);
        std::span<double> dst(pixels.data() + i * per, per);
        if (cfg.augment) {
          Rng rng = Rng::derive(cfg.seed, {kAugmentStream,
                                           static_cast<std::uint64_t>(epoch),
                                           idx});
          const auto oy = static_cast<std::size_t>(
              rng.uniform_int(2 * kAugmentPadding + 1));
          const auto ox = static_cast<std::size_t>(
              rng.uniform_int(2 * kAugmentPadding + 1));
          const bool flip = rng.bernoulli(0.5);
          pad_crop_flip(src, c, h, w, oy, ox, flip, dst);
        } else {
          std::copy(src.begin(), src.end(), dst.begin());
        }
        labels[i] = train.labels[idx];
      }
      const Tensor x(Shape{count, c, h, w}, std::move(pixels));

      Tape tape;
      const ForwardResult out = model.forward(tape, x, Mode::train);
      const Tensor loss = softmax_cross_entropy(tape, out.logits, labels);
      const double loss_value = loss.item();
      if (!std::isfinite(loss_value)) {
        throw TrainingAborted(epoch, static_cast<int>(b));
      }
      model.zero_grad();
      tape.backward(loss);
      optimizer.step(lr, cfg.momentum, cfg.weight_decay);

      loss_sum += loss_value * static_cast<double>(count);
      const auto logits = out.logits.values();
      const std::size_t classes = model.num_classes();
      for (std::size_t i = 0; i < count; ++i) {
        if (argmax_row(logits.subspan(i * classes, classes)) ==
            static_cast<std::size_t>(labels[i])) {
          ++correct;
        }
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(n);
    m.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    m.test_acc = evaluate(model, test);
    m.lr = lr;
    record.per_epoch.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  record.final_attention_weights = model.attention_values();
  return record;
}

std::vector<int> predict(InterflowModel& model, const Dataset& ds,
                         std::size_t batch_size) {
  if (ds.size() == 0) {
    throw std::invalid_argument("cannot evaluate an empty dataset");
  }
  if (batch_size == 0) {
    throw std::invalid_argument("batch_size must be positive");
  }
  const std::size_t per = ds.image_size();
  const std::size_t classes = model.num_classes();
  std::vector<int> out;
  out.reserve(ds.size());
  for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, ds.size() - begin);
    const auto src = ds.images.values().subspan(begin * per, count * per);
    const Tensor x(Shape{count, ds.channels(), ds.height(), ds.width()},
                   std::vector<double>(src.begin(), src.end()));
    Tape tape(false);
    const ForwardResult r = model.forward(tape, x, Mode::eval);
    const auto logits = r.logits.values();
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(static_cast<int>(
          argmax_row(logits.subspan(i * classes, classes))));
    }
  }
  return out;
}

double evaluate(InterflowModel& model, const Dataset& ds,
                std::size_t batch_size) {
  if (ds.size() == 0) {
    throw std::invalid_argument("cannot evaluate an empty dataset");
  }
  check_compatible(model, ds);
  const std::vector<int> pred = predict(model, ds, batch_size);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == ds.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

WeightStatistics weight_statistics(std::span<const RunRecord> records,
                                   std::span<const std::size_t> exclude) {
  if (records.size() < 2) {
    throw std::invalid_argument("weight statistics need at least 2 runs");
  }
  const std::size_t width = records.front().final_attention_weights.size();
  for (const RunRecord& r : records) {
    if (r.final_attention_weights.size() != width) {
      throw std::invalid_argument(
          "runs have different attention weight counts (" +
          std::to_string(width) + " vs " +
          std::to_string(r.final_attention_weights.size()) + ")");
    }
  }
  for (std::size_t k : exclude) {
    if (k >= records.size()) {
      throw std::out_of_range("excluded run " + std::to_string(k) +
                              " does not exist");
    }
  }
  std::vector<const RunRecord*> kept;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (std::find(exclude.begin(), exclude.end(), i) == exclude.end()) {
      kept.push_back(&records[i]);
    }
  }
  if (kept.empty()) {
    throw std::invalid_argument("every run was excluded");
  }

  const double count = static_cast<double>(kept.size());
  auto moments = [&](auto value_of) {
    double sum = 0.0;
    for (const RunRecord* r : kept) sum += value_of(*r);
    const double mean = sum / count;
    double sq = 0.0;
    for (const RunRecord* r : kept) {
      const double d = value_of(*r) - mean;
      sq += d * d;
    }
    return std::pair{mean, sq / count};
  };

  WeightStatistics s;
  s.runs = kept.size();
  for (std::size_t j = 0; j < width; ++j) {
    const auto [mean, var] = moments(
        [j](const RunRecord& r) { return r.final_attention_weights[j]; });
    s.weight_mean.push_back(mean);
    s.weight_var.push_back(var);
  }
  const auto [acc_mean, acc_var] =
      moments([](const RunRecord& r) { return r.final_test_accuracy(); });
  s.accuracy_mean = acc_mean;
  s.accuracy_var = acc_var;
  return s;
}

std::string weight_table_csv(std::span<const RunRecord> records,
                             std::span<const std::size_t> exclude_runs) {
  const WeightStatistics all = weight_statistics(records);
  std::string out = "statistic";
  for (std::size_t j = 0; j < all.weight_mean.size(); ++j) {
    out += ",w" + std::to_string(j + 1);
  }
  out += ",accuracy\n";

  auto row = [&out](const std::string& label, const std::vector<double>& w,
                    double acc) {
    out += label;
    for (double v : w) out += "," + format_double(v);
    out += "," + format_double(acc) + "\n";
  };
  row("Mean", all.weight_mean, all.accuracy_mean);
  row("Var", all.weight_var, all.accuracy_var);

  if (!exclude_runs.empty()) {
    std::vector<std::size_t> zero_based;
    std::string suffix = " (";
    for (std::size_t i = 0; i < exclude_runs.size(); ++i) {
      if (exclude_runs[i] == 0) {
        throw std::out_of_range("run numbers start at 1");
      }
      zero_based.push_back(exclude_runs[i] - 1);
      if (i > 0) suffix += ",";
      suffix += "-" + std::to_string(exclude_runs[i]);
    }
    suffix += ")";
    const WeightStatistics ex = weight_statistics(records, zero_based);
    row("Mean" + suffix, ex.weight_mean, ex.accuracy_mean);
    row("Var" + suffix, ex.weight_var, ex.accuracy_var);
  }
  return out;
}

}  // namespace interflow
