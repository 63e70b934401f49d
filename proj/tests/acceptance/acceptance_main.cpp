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

// Acceptance gate. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Pass criterion numbers as arguments to
// run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "interflow/attention.hpp"
#include "interflow/backbone.hpp"
#include "interflow/data.hpp"
#include "interflow/error.hpp"
#include "interflow/gradcheck.hpp"
#include "interflow/init.hpp"
#include "interflow/layers.hpp"
#include "interflow/method.hpp"
#include "interflow/model.hpp"
#include "interflow/rng.hpp"
#include "interflow/tape.hpp"
#include "interflow/training.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace interflow;

namespace {

// Tolerances and budgets, fixed here and nowhere else.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr int kGradSeeds = 10;
constexpr double kGradBudgetSeconds = 120.0;

constexpr double kOracleTolerance = 1e-12;
constexpr double kOracleBudgetSeconds = 60.0;
constexpr std::size_t kOracleMaxExtent = 16;

constexpr double kFusionTolerance = 1e-12;

constexpr double kSgdTolerance = 1e-12;
constexpr int kSgdSteps = 20;
constexpr std::size_t kXavierSamples = 1000000;
constexpr double kXavierRelTolerance = 0.02;

constexpr double kDeskAccuracy = 0.92;
constexpr double kDeskBudgetSeconds = 600.0;

constexpr int kInformativeSeeds = 10;
constexpr int kInformativeRequired = 9;
constexpr double kInformativeBudgetSeconds = 300.0;

constexpr int kDegradationSeeds = 5;
constexpr int kDegradationFrozenRequired = 4;
constexpr double kDegradationBudgetSeconds = 900.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

Tensor make(Shape shape, std::vector<double> v, bool rg = false) {
  return Tensor(std::move(shape), std::move(v), rg);
}

// sum(out ⊙ r) for a fixed random r, giving generic upstream gradients.
Tensor project(Tape& tape, const Tensor& out, const std::vector<double>& r) {
  return tape.sum(tape.mul(out, make(out.shape(), r)));
}

// ---------------------------------------------------------------------------
// 1. Gradient suite

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_case;
  int checks = 0;
  auto check = [&](const std::string& name, const ScalarFunction& f,
                   const Tensor& x) {
    const GradCheckResult r = finite_diff_check(f, x, kGradStep);
    ++checks;
    if (worst_case.empty() || r.max_relative_error > worst) {
      worst = r.max_relative_error;
      worst_case = name;
    }
  };

  for (int seed = 0; seed < kGradSeeds; ++seed) {
    oracle::Gen gen(static_cast<unsigned>(1000 + seed));

    {  // conv2d
      const std::size_t stride = 1 + seed % 2;
      const std::size_t pad = seed % 3 == 0 ? 0 : 1;
      Conv2dLayer conv = Conv2dLayer::make(2, 3, 3, stride, pad);
      std::copy_n(gen.values(conv.weight.numel()).begin(), conv.weight.numel(),
                  conv.weight.mutable_values().begin());
      std::copy_n(gen.values(3).begin(), 3, conv.bias.mutable_values().begin());
      Tensor x = make(Shape{2, 2, 5, 5}, gen.values(100), true);
      const std::size_t o = conv.output_extent(5);
      const auto r = gen.values(2 * 3 * o * o);
      auto f = [&](Tape& t) { return project(t, conv2d_forward(t, conv, x), r); };
      check("conv2d.x", f, x);
      check("conv2d.weight", f, conv.weight);
      check("conv2d.bias", f, conv.bias);
    }
    {  // batch norm, train and eval
      BatchNormLayer bn = BatchNormLayer::make(2);
      std::copy_n(gen.values(2, 0.5, 1.5).begin(), 2, bn.gamma.mutable_values().begin());
      std::copy_n(gen.values(2).begin(), 2, bn.beta.mutable_values().begin());
      Tensor x = make(Shape{3, 2, 2, 2}, gen.values(24), true);
      const auto r = gen.values(24);
      auto ftrain = [&](Tape& t) {
        return project(t, batchnorm_forward(t, bn, x, Mode::train), r);
      };
      check("batchnorm.train.x", ftrain, x);
      check("batchnorm.train.gamma", ftrain, bn.gamma);
      check("batchnorm.train.beta", ftrain, bn.beta);
      auto feval = [&](Tape& t) {
        return project(t, batchnorm_forward(t, bn, x, Mode::eval), r);
      };
      check("batchnorm.eval.x", feval, x);
      check("batchnorm.eval.gamma", feval, bn.gamma);
    }
    {  // relu away from the kink
      Tensor x = make(Shape{2, 3, 2, 2}, gen.away_from_zero(24), true);
      const auto r = gen.values(24);
      check("relu", [&](Tape& t) { return project(t, relu(t, x), r); }, x);
    }
    {  // global average pool
      Tensor x = make(Shape{2, 3, 3, 2}, gen.values(36), true);
      const auto r = gen.values(6);
      check("gap", [&](Tape& t) { return project(t, global_avg_pool(t, x), r); },
            x);
    }
    {  // linear
      LinearLayer fc = LinearLayer::make(4, 3);
      std::copy_n(gen.values(12).begin(), 12, fc.weight.mutable_values().begin());
      std::copy_n(gen.values(3).begin(), 3, fc.bias.mutable_values().begin());
      Tensor x = make(Shape{5, 4}, gen.values(20), true);
      const auto r = gen.values(15);
      auto f = [&](Tape& t) { return project(t, linear_forward(t, fc, x), r); };
      check("linear.x", f, x);
      check("linear.weight", f, fc.weight);
      check("linear.bias", f, fc.bias);
    }
    {  // softmax cross-entropy
      Tensor logits = make(Shape{4, 5}, gen.values(20, -3.0, 3.0), true);
      const std::vector<int> labels = {0, 4, 2, static_cast<int>(seed % 5)};
      check("softmax_cross_entropy",
            [&](Tape& t) { return softmax_cross_entropy(t, logits, labels); },
            logits);
    }
    {  // tape arithmetic
      Tensor a = make(Shape{3, 4}, gen.values(12), true);
      Tensor b = make(Shape{3, 4}, gen.values(12), true);
      Tensor m = make(Shape{4, 2}, gen.values(8), true);
      Tensor s = make(Shape{1}, gen.values(1), true);
      const auto r12 = gen.values(12);
      const auto r6 = gen.values(6);
      auto f = [&](Tape& t) {
        Tensor u = t.mul(t.add(a, b), t.sub(a, t.scale(b, 0.7)));
        Tensor v = t.mul(u, s);
        return t.add(project(t, v, r12), project(t, t.matmul(a, m), r6));
      };
      check("tape.a", f, a);
      check("tape.b", f, b);
      check("tape.matmul", f, m);
      check("tape.scalar", f, s);
    }
    {  // the three fuse modes
      const std::size_t n = 4;
      const std::size_t c = 3;
      std::vector<Tensor> z;
      for (std::size_t i = 0; i < n; ++i) {
        z.push_back(make(Shape{5, c}, gen.values(5 * c), true));
      }
      const auto r = gen.values(5 * c);
      const std::vector<double> hard_w = gen.values(n);
      auto fhard = [&](Tape& t) {
        return project(t, attention_fuse_hard(t, z, hard_w), r);
      };
      AttentionModule scalar = AttentionModule::soft_scalar(gen.values(n));
      auto fscalar = [&](Tape& t) {
        return project(t, attention_fuse(t, z, scalar), r);
      };
      AttentionModule perclass =
          AttentionModule::soft_perclass(n, c, gen.values(n * c));
      auto fper = [&](Tape& t) {
        return project(t, attention_fuse(t, z, perclass), r);
      };
      for (std::size_t i = 0; i < n; ++i) {
        check("fuse.hard.z", fhard, z[i]);
        check("fuse.soft_scalar.z", fscalar, z[i]);
        check("fuse.soft_perclass.z", fper, z[i]);
      }
      check("fuse.soft_scalar.w", fscalar, scalar.weights);
      check("fuse.soft_perclass.w", fper, perclass.weights);
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst <= kGradTolerance && secs <= kGradBudgetSeconds;
  o.detail = std::to_string(checks) + " checks over " +
             std::to_string(kGradSeeds) + " seeds, max rel err " + fmt(worst) +
             " (" + worst_case + ", limit " + fmt(kGradTolerance) + "), " +
             fmt(secs) + " s (limit " + fmt(kGradBudgetSeconds) + " s)";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Oracle equivalence

Outcome criterion_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  oracle::Gen gen(2024);
  double worst = 0.0;
  int cases = 0;
  Tape tape(false);
  for (int trial = 0; trial < 60; ++trial) {
    {  // conv2d
      oracle::ConvGeometry g{};
      g.k = std::vector<std::size_t>{1, 3, 5}[gen.index(0, 2)];
      g.n = gen.index(1, 3);
      g.c = gen.index(1, 4);
      g.o = gen.index(1, 4);
      g.h = gen.index(g.k, kOracleMaxExtent);
      g.w = gen.index(g.k, kOracleMaxExtent);
      g.stride = gen.index(1, 3);
      g.pad = gen.index(0, 2);
      const auto x = gen.values(g.n * g.c * g.h * g.w);
      const auto w = gen.values(g.o * g.c * g.k * g.k);
      const auto b = gen.values(g.o);
      Conv2dLayer conv = Conv2dLayer::make(g.c, g.o, g.k, g.stride, g.pad);
      std::copy(w.begin(), w.end(), conv.weight.mutable_values().begin());
      std::copy(b.begin(), b.end(), conv.bias.mutable_values().begin());
      const Tensor y = conv2d_forward(tape, conv, make(Shape{g.n, g.c, g.h, g.w}, x));
      worst = std::max(worst, oracle::max_abs_diff(y.values(), oracle::conv2d(x, w, b, g)));
      ++cases;
    }
    {  // matmul
      const std::size_t m = gen.index(1, kOracleMaxExtent);
      const std::size_t k = gen.index(1, kOracleMaxExtent);
      const std::size_t n = gen.index(1, kOracleMaxExtent);
      const auto a = gen.values(m * k);
      const auto b = gen.values(k * n);
      const Tensor y = tape.matmul(make(Shape{m, k}, a), make(Shape{k, n}, b));
      worst = std::max(worst, oracle::max_abs_diff(y.values(), oracle::matmul(a, b, m, k, n)));
      ++cases;
    }
    {  // global average pool
      const std::size_t n = gen.index(1, 4);
      const std::size_t c = gen.index(1, kOracleMaxExtent);
      const std::size_t h = gen.index(1, kOracleMaxExtent);
      const std::size_t w = gen.index(1, kOracleMaxExtent);
      const auto x = gen.values(n * c * h * w);
      const Tensor y = global_avg_pool(tape, make(Shape{n, c, h, w}, x));
      worst = std::max(worst, oracle::max_abs_diff(y.values(), oracle::global_avg_pool(x, n, c, h, w)));
      ++cases;
    }
    {  // linear
      const std::size_t n = gen.index(1, kOracleMaxExtent);
      const std::size_t in = gen.index(1, kOracleMaxExtent);
      const std::size_t out = gen.index(1, kOracleMaxExtent);
      const auto x = gen.values(n * in);
      const auto w = gen.values(out * in);
      const auto b = gen.values(out);
      LinearLayer fc = LinearLayer::make(in, out);
      std::copy(w.begin(), w.end(), fc.weight.mutable_values().begin());
      std::copy(b.begin(), b.end(), fc.bias.mutable_values().begin());
      const Tensor y = linear_forward(tape, fc, make(Shape{n, in}, x));
      worst = std::max(worst, oracle::max_abs_diff(y.values(), oracle::linear(x, w, b, n, in, out)));
      ++cases;
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst <= kOracleTolerance && secs <= kOracleBudgetSeconds;
  o.detail = std::to_string(cases) + " random cases (conv2d, matmul, gap, linear), "
             "max abs diff " + fmt(worst) + " (limit " + fmt(kOracleTolerance) +
             "), " + fmt(secs) + " s (limit " + fmt(kOracleBudgetSeconds) + " s)";
  return o;
}

// ---------------------------------------------------------------------------
// 3. Fusion algebra

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
           return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
         });
}

double normal_equivalence_error(std::uint64_t seed) {
  BackboneOptions opts;
  opts.width_divisor = 16;
  InterflowModel normal = build_vgg16_backbone(10, 1, seed, 13, opts);
  const BackboneSpec spec = vgg16_backbone_spec(1, 13, opts);
  MethodConfig s1 = resolve_method_config("S1");
  InterflowModel inter = InterflowModel::build_with_attention(
      spec, s1, stage_partition(13, 4), 10, seed + 1, {0.0, 0.0, 0.0, 1.0});
  // Same trunk, and the last head's classifier set to the Normal classifier.
  std::vector<NamedTensor> trunk;
  for (const NamedTensor& t : normal.state()) {
    if (t.name.rfind("conv", 0) == 0 || t.name.rfind("bn", 0) == 0) trunk.push_back(t);
  }
  std::vector<NamedTensor> merged = inter.state();
  for (NamedTensor& t : merged) {
    for (const NamedTensor& s : trunk) {
      if (s.name == t.name) t.tensor = s.tensor;
    }
  }
  inter.load_state(merged);
  LinearLayer& last = inter.classifiers()[inter.heads().back().classifier];
  const LinearLayer& base = normal.classifiers().front();
  std::copy(base.weight.values().begin(), base.weight.values().end(),
            last.weight.mutable_values().begin());
  std::copy(base.bias.values().begin(), base.bias.values().end(),
            last.bias.mutable_values().begin());

  oracle::Gen gen(static_cast<unsigned>(seed));
  const Tensor x = make(Shape{4, 1, 8, 8}, gen.values(256));
  double worst = 0.0;
  for (Mode mode : {Mode::eval, Mode::train}) {
    Tape t1(false);
    Tape t2(false);
    const Tensor a = normal.forward(t1, x, mode).logits;
    const Tensor b = inter.forward(t2, x, mode).logits;
    worst = std::max(worst, oracle::max_abs_diff(a.values(), b.values()));
  }
  return worst;
}

Outcome criterion_fusion() {
  oracle::Gen gen(77);
  Tape tape(false);
  const std::size_t n = 4;
  const std::size_t rows = 6;
  const std::size_t c = 10;
  std::vector<Tensor> z;
  for (std::size_t i = 0; i < n; ++i) z.push_back(make(Shape{rows, c}, gen.values(rows * c)));

  // Hard fuse with the S0 weights against a hand-written combination.
  const std::vector<double> s0 = manual_branch_weights(4);
  const Tensor hard = attention_fuse_hard(tape, z, s0);
  std::vector<double> hand(rows * c);
  for (std::size_t k = 0; k < rows * c; ++k) {
    hand[k] = 0.1 * z[0].values()[k] + 0.2 * z[1].values()[k] +
              0.3 * z[2].values()[k] + 0.4 * z[3].values()[k];
  }
  const double hard_err = oracle::max_abs_diff(hard.values(), hand);

  // One-hot soft weights select a branch bit for bit.
  bool one_hot_ok = true;
  for (std::size_t sel = 0; sel < n; ++sel) {
    std::vector<double> w(n, 0.0);
    w[sel] = 1.0;
    const Tensor s = attention_fuse(tape, z, AttentionModule::soft_scalar(w));
    std::vector<double> wc(n * c, 0.0);
    for (std::size_t j = 0; j < c; ++j) wc[sel * c + j] = 1.0;
    const Tensor p = attention_fuse(tape, z, AttentionModule::soft_perclass(n, c, wc));
    one_hot_ok = one_hot_ok && bitwise_equal(s.values(), z[sel].values()) &&
                 bitwise_equal(p.values(), z[sel].values());
  }

  // Per-class weights constant across classes equal scalar fusion.
  bool perclass_ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = gen.values(n, -2.0, 2.0);
    std::vector<double> wc(n * c);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) wc[i * c + j] = w[i];
    const Tensor s = attention_fuse(tape, z, AttentionModule::soft_scalar(w));
    const Tensor p = attention_fuse(tape, z, AttentionModule::soft_perclass(n, c, wc));
    perclass_ok = perclass_ok && bitwise_equal(s.values(), p.values());
  }

  double normal_err = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    normal_err = std::max(normal_err, normal_equivalence_error(seed));
  }

  Outcome o;
  o.pass = hard_err <= kFusionTolerance && one_hot_ok && perclass_ok &&
           normal_err <= kFusionTolerance;
  o.detail = "hard vs hand err " + fmt(hard_err) + ", one-hot bitwise " +
             (one_hot_ok ? "yes" : "no") + ", per-class==scalar bitwise " +
             (perclass_ok ? "yes" : "no") + ", Normal-equivalence err " +
             fmt(normal_err) + " (limit " + fmt(kFusionTolerance) + ")";
  return o;
}

// ---------------------------------------------------------------------------
// 4. Config matrix

Outcome criterion_config() {
  struct Row {
    const char* name;
    bool interflow;
    std::optional<int> branches;
    std::optional<bool> shared, init, learned;
  };
  // Method table as published: Interflow, Branches, Shared, Initialization,
  // Learned.
  const std::vector<Row> expected = {
      {"Normal", false, std::nullopt, std::nullopt, std::nullopt, std::nullopt},
      {"S0", true, 4, true, true, false},
      {"S1", true, 4, true, false, true},
      {"S2", true, 4, true, true, true},
      {"S3", true, 4, false, false, true},
      {"S4", true, 4, false, true, true},
      {"S5", true, 7, true, true, false},
      {"S6", true, 7, true, false, true},
      {"S7", true, 7, true, true, true},
      {"S8", true, 7, false, false, true},
      {"S9", true, 7, false, true, true},
  };
  int matched = 0;
  std::string mismatch;
  for (const Row& r : expected) {
    const MethodConfig m = resolve_method_config(r.name);
    const bool ok = m.name == r.name && m.interflow == r.interflow &&
                    m.branches == r.branches && m.shared_per_class == r.shared &&
                    m.initialization == r.init && m.learned == r.learned;
    if (ok) {
      ++matched;
    } else {
      mismatch += std::string(" ") + r.name;
    }
  }
  const bool table_size_ok = standard_methods().size() == expected.size();

  BackboneOptions opts;
  opts.width_divisor = 16;
  InterflowModel s3 = build_method_model(resolve_method_config("S3"), 10, 3, 5, opts);
  std::size_t attention_params = 0;
  for (const NamedTensor& p : s3.trainable_parameters()) {
    if (p.name == "attention.weights") attention_params += p.tensor.numel();
  }
  const std::size_t declared = s3.method().learnable_weight_count(10);

  Outcome o;
  o.pass = matched == 11 && table_size_ok && attention_params == 40 && declared == 40;
  o.detail = std::to_string(matched) + "/11 method rows match field by field" +
             (mismatch.empty() ? "" : " (mismatch:" + mismatch + ")") +
             ", S3 with 10 classes exposes " + std::to_string(attention_params) +
             " attention parameters (expected 40)";
  return o;
}

// ---------------------------------------------------------------------------
// 5. Recipe fidelity

Outcome criterion_recipe() {
  TrainConfig c100;
  c100.epochs = 100;
  TrainConfig c40;
  c40.epochs = 40;
  const bool lr_ok = lr_schedule(79, c100) == 1e-3 && lr_schedule(80, c100) == 1e-4 &&
                     lr_schedule(19, c40) == 1e-3 && lr_schedule(20, c40) == 1e-4;

  // f(x) = x²/2 from x0 = 1, v0 = 0. The state (x, v) evolves linearly with
  // matrix [[1-lr, -lr·mu], [1, mu]]; x_k follows from its eigenvalues.
  const double lr = 0.1;
  const double mu = 0.95;
  const std::complex<double> tr = 1.0 - lr + mu;
  const std::complex<double> disc = std::sqrt(tr * tr - 4.0 * mu);
  const std::complex<double> l1 = (tr + disc) / 2.0;
  const std::complex<double> l2 = (tr - disc) / 2.0;
  const double x0 = 1.0;
  const double x1 = 1.0 - lr;
  const std::complex<double> c1 = (x1 - l2 * x0) / (l1 - l2);
  const std::complex<double> c2 = x0 - c1;

  std::vector<double> param = {x0};
  std::vector<double> velocity = {0.0};
  double sgd_err = 0.0;
  for (int k = 1; k <= kSgdSteps; ++k) {
    const std::vector<double> grad = {param[0]};
    sgd_momentum_step(param, grad, velocity, lr, mu, 0.0);
    const double closed = (c1 * std::pow(l1, k) + c2 * std::pow(l2, k)).real();
    sgd_err = std::max(sgd_err, std::abs(param[0] - closed));
  }

  Rng rng(12345);
  const std::size_t fan_in = 300;
  const std::size_t fan_out = 500;
  const Tensor w = xavier_init(Shape{kXavierSamples}, fan_in, fan_out, rng);
  double mean = 0.0;
  for (double v : w.values()) mean += v;
  mean /= static_cast<double>(kXavierSamples);
  double var = 0.0;
  for (double v : w.values()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(kXavierSamples);
  const double target = 2.0 / static_cast<double>(fan_in + fan_out);
  const double var_rel = std::abs(var / target - 1.0);

  Outcome o;
  o.pass = lr_ok && sgd_err <= kSgdTolerance && var_rel <= kXavierRelTolerance;
  o.detail = std::string("lr drop at 80/100 and 20/40 ") + (lr_ok ? "ok" : "WRONG") +
             ", sgd vs closed form over " + std::to_string(kSgdSteps) +
             " steps err " + fmt(sgd_err) + " (limit " + fmt(kSgdTolerance) +
             "), xavier variance off by " + fmt(100.0 * var_rel) + "% (limit " +
             fmt(100.0 * kXavierRelTolerance) + "%)";
  return o;
}

// ---------------------------------------------------------------------------
// 6. Desk-scale end-to-end run through the command-line tool

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Outcome criterion_desk_run() {
  const fs::path work = fs::temp_directory_path() / "interflow-acceptance-desk";
  fs::remove_all(work);
  const fs::path data = fs::path(INTERFLOW_SOURCE_DIR) / "tests/data/mnist-5k";
  const fs::path config = fs::path(INTERFLOW_SOURCE_DIR) / "configs/mnist-desk.cfg";
  const Dataset train = load_idx_dir(data, Split::train);
  const Dataset test = load_idx_dir(data, Split::test);

  double slowest = 0.0;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("\"") + INTERFLOW_CLI_PATH + "\" train --config \"" +
                            config.string() + "\" --data-dir \"" + data.string() +
                            "\" --seed 0 --out \"" + (work / run).string() +
                            "\" > /dev/null 2>&1";
    const auto t0 = std::chrono::steady_clock::now();
    const int status = std::system(cmd.c_str());
    slowest = std::max(slowest, seconds_since(t0));
    if (status != 0) {
      return Outcome{false, "command exited with status " + std::to_string(status) + ": " + cmd};
    }
  }
  const std::string metrics = slurp(work / "a/metrics.csv");
  const bool identical = metrics == slurp(work / "b/metrics.csv") &&
                         slurp(work / "a/weights.json") == slurp(work / "b/weights.json") &&
                         slurp(work / "a/checkpoint.bin") == slurp(work / "b/checkpoint.bin");
  // Last metrics row: epoch,train_loss,train_acc,test_acc,lr
  std::istringstream lines(metrics);
  std::string line;
  std::string last;
  int rows = -1;
  while (std::getline(lines, line)) {
    if (!line.empty()) {
      last = line;
      ++rows;
    }
  }
  std::vector<std::string> fields;
  std::stringstream ls(last);
  for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
  const double acc = fields.size() == 5 ? std::stod(fields[3]) : 0.0;

  Outcome o;
  o.pass = train.size() == 2000 && test.size() == 1000 && rows == 5 &&
           acc >= kDeskAccuracy && identical && slowest <= kDeskBudgetSeconds;
  o.detail = "S1, 6 conv layers, 2 branches, MNIST " + std::to_string(train.size()) +
             "/" + std::to_string(test.size()) + ", " + std::to_string(rows) +
             " epochs: test acc " + fmt(acc) + " (limit " + fmt(kDeskAccuracy) +
             "), rerun byte-identical " + (identical ? "yes" : "no") +
             ", slowest run " + fmt(slowest) + " s (limit " + fmt(kDeskBudgetSeconds) + " s)";
  fs::remove_all(work);
  return o;
}

// ---------------------------------------------------------------------------
// 7. Informative-branch property

TrainConfig desk_recipe(int epochs, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 32;
  cfg.lr_initial = 0.05;
  cfg.lr_final = 0.005;
  cfg.lr_drop_epoch = epochs - 1;
  cfg.augment = false;
  cfg.seed = seed;
  return cfg;
}

Outcome criterion_informative_branch() {
  const auto t0 = std::chrono::steady_clock::now();
  const DatasetPair data = synthetic_dataset(SyntheticKind::blobs, 50, 4, 16, 7);
  // Branch 1 taps a single full-resolution layer; after global pooling its
  // features do not depend on where the blob is, which is all that separates
  // the classes. Branch 2 downsamples and can localize.
  BackboneSpec spec;
  spec.input_channels = 1;
  spec.layers = {ConvSpec{1, 8, 3, 1, 1}, ConvSpec{8, 16, 3, 2, 1},
                 ConvSpec{16, 16, 3, 2, 1}, ConvSpec{16, 16, 3, 2, 1}};
  const MethodConfig method = with_branches(resolve_method_config("S1"), 2);

  int wins = 0;
  std::string weights;
  for (int seed = 0; seed < kInformativeSeeds; ++seed) {
    InterflowModel model =
        InterflowModel::build(spec, method, StagePartition{{1, 4}}, 4, seed);
    model.freeze_layers(1, 1);
    const RunRecord r = train_epochs(model, data.train, data.test, desk_recipe(8, seed));
    const double w1 = std::abs(r.final_attention_weights[0]);
    const double w2 = std::abs(r.final_attention_weights[1]);
    if (w2 > w1) ++wins;
    weights += " (" + fmt(w1) + "," + fmt(w2) + ")";
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = wins >= kInformativeRequired && secs <= kInformativeBudgetSeconds;
  o.detail = "|w_informative| > |w_frozen| for " + std::to_string(wins) + "/" +
             std::to_string(kInformativeSeeds) + " seeds (need " +
             std::to_string(kInformativeRequired) + "), |w1|,|w2|:" + weights + ", " +
             fmt(secs) + " s (limit " + fmt(kInformativeBudgetSeconds) + " s)";
  return o;
}

// ---------------------------------------------------------------------------
// 8. Degradation smoke test

Outcome criterion_degradation() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t depth = 30;
  const std::size_t branches = 4;
  const int epochs = 5;
  BackboneOptions opts;
  opts.width_divisor = 16;
  const DatasetPair data = synthetic_dataset(SyntheticKind::blobs, 250, 4, 16, 11);

  std::vector<double> inter_acc;
  std::vector<double> normal_acc;
  int frozen_wins = 0;
  std::string frozen_detail;
  for (int seed = 0; seed < kDegradationSeeds; ++seed) {
    InterflowModel inter = build_deep_backbone(depth, branches, 4, 1, seed, opts);
    inter_acc.push_back(
        train_epochs(inter, data.train, data.test, desk_recipe(epochs, seed)).final_test_accuracy());

    InterflowModel normal = InterflowModel::build(
        deep_backbone_spec(depth, 1, opts), resolve_method_config("Normal"),
        StagePartition{{depth}}, 4, seed);
    normal_acc.push_back(
        train_epochs(normal, data.train, data.test, desk_recipe(epochs, seed)).final_test_accuracy());

    // Layers 21..30 frozen at zero weights: their output is the same for
    // every input, so the deepest branch carries no label information.
    InterflowModel noisy = build_deep_backbone(depth, branches, 4, 1, seed, opts);
    for (std::size_t layer = 21; layer <= depth; ++layer) {
      ConvBlock& b = noisy.blocks()[layer - 1];
      std::fill(b.conv.weight.mutable_values().begin(), b.conv.weight.mutable_values().end(), 0.0);
      std::fill(b.conv.bias.mutable_values().begin(), b.conv.bias.mutable_values().end(), 0.0);
    }
    noisy.freeze_layers(21, depth);
    const RunRecord r = train_epochs(noisy, data.train, data.test, desk_recipe(epochs, seed));
    const auto& w = r.final_attention_weights;
    double shallow = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) shallow += std::abs(w[i]);
    shallow /= static_cast<double>(w.size() - 1);
    const double deepest = std::abs(w.back());
    if (deepest < shallow) ++frozen_wins;
    frozen_detail += " (" + fmt(deepest) + " vs " + fmt(shallow) + ")";
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  std::string accs;
  for (int i = 0; i < kDegradationSeeds; ++i) accs += " (" + fmt(inter_acc[i]) + "," + fmt(normal_acc[i]) + ")";
  const double mi = median(inter_acc);
  const double mn = median(normal_acc);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = mi >= mn && frozen_wins >= kDegradationFrozenRequired &&
           secs <= kDegradationBudgetSeconds;
  o.detail = "depth 30, 4 branches, median acc Interflow " + fmt(mi) + " vs Normal " +
             fmt(mn) + " (per seed" + accs + "); frozen tail: deepest |w| below shallow mean for " +
             std::to_string(frozen_wins) + "/" + std::to_string(kDegradationSeeds) +
             " seeds (need " + std::to_string(kDegradationFrozenRequired) + "):" +
             frozen_detail + ", " + fmt(secs) + " s (limit " +
             fmt(kDegradationBudgetSeconds) + " s)";
  return o;
}

// ---------------------------------------------------------------------------
// 9. Format suite

template <typename Fn>
std::optional<std::uint64_t> format_error_offset(Fn&& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.offset();
  } catch (...) {
    return std::nullopt;
  }
  return std::nullopt;
}

Dataset byte_exact_dataset(std::size_t n, std::size_t c, std::size_t h, std::size_t w,
                           std::size_t classes, unsigned seed) {
  oracle::Gen gen(seed);
  std::vector<double> v(n * c * h * w);
  for (double& x : v) x = static_cast<double>(gen.index(0, 255)) / 255.0;
  Dataset ds;
  ds.images = make(Shape{n, c, h, w}, std::move(v));
  for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<int>(gen.index(0, classes - 1)));
  ds.num_classes = classes;
  return ds;
}

Outcome criterion_formats() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // IDX round trip through files (plain and gzip).
  const fs::path dir = fs::temp_directory_path() / "interflow-acceptance-formats";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Dataset idx = byte_exact_dataset(7, 1, 5, 4, 10, 3);
  for (const char* ext : {"", ".gz"}) {
    const fs::path ip = dir / (std::string("img") + ext);
    const fs::path lp = dir / (std::string("lbl") + ext);
    write_idx(idx, ip, lp);
    const Dataset back = load_idx(ip, lp);
    expect(bitwise_equal(back.images.values(), idx.images.values()) &&
               back.labels == idx.labels && back.images.shape() == idx.images.shape(),
           std::string("idx round trip") + ext);
  }
  const std::string img = encode_idx_images(idx);
  const std::string lbl = encode_idx_labels(idx);
  std::string bad_magic = img;
  bad_magic[3] = 0x02;
  expect(format_error_offset([&] { decode_idx(bad_magic, lbl); }) == 0u, "idx wrong magic");
  expect(format_error_offset([&] { decode_idx(img.substr(0, img.size() - 1), lbl); }) ==
             img.size() - 1,
         "idx truncated images");
  expect(format_error_offset([&] { decode_idx(img, lbl.substr(0, 6)); }).has_value(),
         "idx truncated label header");
  std::string short_labels = lbl;
  short_labels[7] = 6;
  expect(format_error_offset([&] { decode_idx(img, short_labels); }) == 4u, "idx count mismatch");

  // CIFAR-10 and CIFAR-100 round trips and corruption.
  const Dataset cifar = byte_exact_dataset(3, 3, 32, 32, 10, 4);
  const std::string c10 = encode_cifar(cifar, CifarVariant::cifar10);
  const Dataset c10_back = decode_cifar(c10, CifarVariant::cifar10);
  expect(bitwise_equal(c10_back.images.values(), cifar.images.values()) &&
             c10_back.labels == cifar.labels,
         "cifar10 round trip");
  const Dataset fine = byte_exact_dataset(2, 3, 32, 32, 100, 5);
  const Dataset fine_back =
      decode_cifar(encode_cifar(fine, CifarVariant::cifar100_fine), CifarVariant::cifar100_fine);
  expect(bitwise_equal(fine_back.images.values(), fine.images.values()) &&
             fine_back.labels == fine.labels,
         "cifar100 round trip");
  expect(format_error_offset([&] { decode_cifar(c10.substr(0, 3072), CifarVariant::cifar10); }) ==
             0u,
         "cifar truncated record");
  expect(format_error_offset([&] { decode_cifar(c10.substr(0, 3073 + 100), CifarVariant::cifar10); }) ==
             3073u,
         "cifar partial second record");
  std::string bad_label = c10;
  bad_label[3073] = 10;
  expect(format_error_offset([&] { decode_cifar(bad_label, CifarVariant::cifar10); }) == 3073u,
         "cifar label out of range");
  fs::remove_all(dir);

  // Full MNIST, when available.
  std::string mnist_note;
  const char* env = std::getenv("INTERFLOW_MNIST_DIR");
  const fs::path mnist = env ? fs::path(env) : fs::path(INTERFLOW_SOURCE_DIR) / "tests/data/mnist";
  if (fs::is_directory(mnist)) {
    const Dataset tr = load_idx_dir(mnist, Split::train);
    const Dataset te = load_idx_dir(mnist, Split::test);
    expect(tr.size() == 60000 && te.size() == 10000 && tr.height() == 28 && tr.width() == 28,
           "full MNIST counts");
    mnist_note = "full MNIST " + std::to_string(tr.size()) + "/" + std::to_string(te.size());
  } else {
    mnist_note = "full MNIST check skipped (files absent)";
  }

  Outcome o;
  o.pass = failures.empty();
  o.detail = "IDX plain+gzip and CIFAR-10/100 round trips, magic/truncation/count/label "
             "errors carry offsets; " + mnist_note;
  for (const std::string& f : failures) o.detail += "; FAILED " + f;
  return o;
}

// ---------------------------------------------------------------------------
// 10. Statistics

RunRecord record(std::vector<double> weights, double accuracy) {
  RunRecord r;
  r.per_epoch.push_back(EpochMetrics{0, 0.0, 0.0, accuracy, 1e-3});
  r.final_attention_weights = std::move(weights);
  return r;
}

Outcome criterion_statistics() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  // Two runs: weights 0 and 2 give mean 1 and population variance 1.
  const std::vector<RunRecord> two = {record({0.0}, 0.5), record({2.0}, 0.7)};
  const WeightStatistics s2 = weight_statistics(two);
  expect(s2.weight_mean == std::vector<double>{1.0} && s2.weight_var == std::vector<double>{1.0},
         "two-run mean/var");
  expect(std::abs(s2.accuracy_mean - 0.6) <= 1e-15 && std::abs(s2.accuracy_var - 0.01) <= 1e-15,
         "two-run accuracy moments");

  // Three runs with two branches; excluding run 3 leaves runs 1 and 2.
  const std::vector<RunRecord> three = {record({1.0, -1.0}, 0.5), record({3.0, -1.0}, 0.75),
                                        record({8.0, 2.0}, 1.0)};
  const WeightStatistics all = weight_statistics(three);
  expect(all.weight_mean == std::vector<double>{4.0, 0.0} &&
             all.weight_var == std::vector<double>{26.0 / 3.0, 2.0} && all.accuracy_mean == 0.75,
         "three-run moments");
  const std::vector<std::size_t> drop_third = {2};
  const WeightStatistics ex = weight_statistics(three, drop_third);
  expect(ex.runs == 2 && ex.weight_mean == std::vector<double>{2.0, -1.0} &&
             ex.weight_var == std::vector<double>{1.0, 0.0} && ex.accuracy_mean == 0.625,
         "exclusion moments");

  const std::vector<std::size_t> exclude_runs = {3};
  const std::string table = weight_table_csv(three, exclude_runs);
  const std::string expected_table =
      "statistic,w1,w2,accuracy\n"
      "Mean,4,0,0.75\n"
      "Var,8.666666666666666,2,0.041666666666666664\n"
      "Mean (-3),2,-1,0.625\n"
      "Var (-3),1,0,0.015625\n";
  expect(table == expected_table, "table layout:\n" + table);

  bool mixed_rejected = false;
  try {
    const std::vector<RunRecord> mixed = {record({1.0}, 0.5), record({1.0, 2.0}, 0.5)};
    weight_statistics(mixed);
  } catch (const std::invalid_argument&) {
    mixed_rejected = true;
  }
  expect(mixed_rejected, "mixed branch counts rejected");

  Outcome o;
  o.pass = failures.empty();
  o.detail = "Mean/Var rows with per-branch columns plus accuracy, exact 2- and 3-run "
             "fixtures, Mean (-k)/Var (-k) exclusion rows";
  for (const std::string& f : failures) o.detail += "; FAILED " + f;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", criterion_gradients},
      {"oracle equivalence", criterion_oracles},
      {"fusion algebra", criterion_fusion},
      {"config matrix", criterion_config},
      {"recipe fidelity", criterion_recipe},
      {"desk-scale end-to-end", criterion_desk_run},
      {"informative branch", criterion_informative_branch},
      {"degradation smoke test", criterion_degradation},
      {"format suite", criterion_formats},
      {"statistics", criterion_statistics},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = Outcome{false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << number << " ("
              << criteria[i].first << "): " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
