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

#include <gtest/gtest.h>

#include <vector>

#include "interflow/attention.hpp"
#include "interflow/error.hpp"
#include "interflow/gradcheck.hpp"
#include "interflow/layers.hpp"
#include "support/oracles.hpp"

namespace interflow {
namespace {

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

std::vector<Tensor> random_branches(oracle::Gen& gen, std::size_t n, std::size_t rows,
                                    std::size_t classes, bool grad = false) {
  std::vector<Tensor> z;
  for (std::size_t i = 0; i < n; ++i)
    z.emplace_back(Shape{rows, classes}, gen.values(rows * classes, -3, 3), grad);
  return z;
}

// Σ_i w[i, c]·z_i[r, c] as a plain loop; w_cols == 1 means per-branch.
std::vector<double> fuse_oracle(const std::vector<Tensor>& z, const std::vector<double>& w,
                                std::size_t w_cols) {
  const std::size_t rows = z[0].shape()[0], classes = z[0].shape()[1];
  std::vector<double> out(rows * classes, 0.0);
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < classes; ++c)
        out[r * classes + c] +=
            w[i * w_cols + (w_cols == 1 ? 0 : c)] * z[i].values()[r * classes + c];
  return out;
}

TEST(AttentionHardTest, ManualWeightsOnEqualBranches) {
  oracle::Gen gen(0);
  Tensor z({3, 10}, gen.values(30));
  std::vector<Tensor> zs(4, z);
  std::vector<double> w{0.1, 0.2, 0.3, 0.4};
  Tape tape;
  Tensor y = attention_fuse_hard(tape, zs, w);
  EXPECT_LE(oracle::max_abs_diff(y.values(), z.values()), 1e-12);
}

TEST(AttentionHardTest, OneHotSelectsExactly) {
  oracle::Gen gen(1);
  auto zs = random_branches(gen, 4, 2, 5);
  std::vector<double> w{0, 0, 0, 1};
  Tape tape;
  EXPECT_EQ(to_vec(attention_fuse_hard(tape, zs, w).values()), to_vec(zs[3].values()));
}

TEST(AttentionHardTest, SevenBranchManualWeightsMatchOracle) {
  const std::vector<double> w{0.1, 0.1, 0.1, 0.1, 0.2, 0.2, 0.2};
  for (unsigned seed = 0; seed < 10; ++seed) {
    oracle::Gen gen(seed);
    auto zs = random_branches(gen, 7, 4, 10);
    Tape tape;
    Tensor y = attention_fuse_hard(tape, zs, w);
    EXPECT_LE(oracle::max_abs_diff(y.values(), fuse_oracle(zs, w, 1)), 1e-12);
  }
}

TEST(AttentionHardTest, WeightsGetNoGradient) {
  oracle::Gen gen(2);
  auto zs = random_branches(gen, 2, 2, 3, true);
  AttentionModule att = AttentionModule::hard({0.5, 2.0});
  EXPECT_FALSE(att.learnable());
  Tape tape;
  tape.backward(tape.sum(attention_fuse(tape, zs, att)));
  EXPECT_FALSE(att.weights.has_grad());
  for (double g : zs[1].grad()) EXPECT_EQ(g, 2.0);
}

TEST(AttentionHardTest, LengthMismatch) {
  oracle::Gen gen(3);
  auto zs = random_branches(gen, 4, 2, 3);
  std::vector<double> w{0.5, 0.5};
  Tape tape;
  EXPECT_THROW(attention_fuse_hard(tape, zs, w), ShapeError);
}

TEST(AttentionSoftScalarTest, OneHotMasksOtherBranches) {
  oracle::Gen gen(4);
  auto zs = random_branches(gen, 4, 3, 6, true);
  AttentionModule att = AttentionModule::soft_scalar({0, 1, 0, 0});
  EXPECT_TRUE(att.learnable());
  Tape tape;
  Tensor y = attention_fuse_soft_scalar(tape, zs, att);
  EXPECT_EQ(to_vec(y.values()), to_vec(zs[1].values()));
  tape.backward(tape.sum(y));
  for (std::size_t j : {0u, 2u, 3u})
    for (double g : zs[j].grad()) EXPECT_EQ(g, 0.0);
  for (double g : zs[1].grad()) EXPECT_EQ(g, 1.0);
}

TEST(AttentionSoftScalarTest, WeightGradientIsInnerProduct) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    oracle::Gen gen(seed);
    auto zs = random_branches(gen, 3, 4, 5);
    AttentionModule att = AttentionModule::soft_scalar(gen.values(3));
    Tensor g({4, 5}, gen.values(20));
    Tape tape;
    tape.backward(tape.sum(tape.mul(attention_fuse_soft_scalar(tape, zs, att), g)));
    for (std::size_t i = 0; i < 3; ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < 20; ++k) dot += g.values()[k] * zs[i].values()[k];
      EXPECT_NEAR(att.weights.grad()[i], dot, 1e-12);
    }
  }
}

TEST(AttentionSoftScalarTest, NegativeWeightsAllowedAndUnnormalized) {
  oracle::Gen gen(5);
  auto zs = random_branches(gen, 2, 1, 4);
  std::vector<double> w{-0.6881, 2.3720};
  AttentionModule att = AttentionModule::soft_scalar(w);
  Tape tape;
  Tensor y = attention_fuse(tape, zs, att);
  EXPECT_LE(oracle::max_abs_diff(y.values(), fuse_oracle(zs, w, 1)), 1e-12);
}

TEST(AttentionSoftScalarTest, ShapeMismatch) {
  oracle::Gen gen(6);
  auto zs = random_branches(gen, 3, 2, 2);
  Tape tape;
  EXPECT_THROW(attention_fuse_soft_scalar(tape, zs, AttentionModule::soft_scalar({1, 2})),
               ShapeError);
  std::vector<Tensor> ragged{Tensor::zeros({2, 2}), Tensor::zeros({2, 3})};
  EXPECT_THROW(attention_fuse_soft_scalar(tape, ragged, AttentionModule::soft_scalar({1, 2})),
               ShapeError);
}

TEST(AttentionPerClassTest, ConstantColumnsEqualScalarBitwise) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    oracle::Gen gen(seed);
    const std::size_t n = 4, classes = 10;
    auto zs = random_branches(gen, n, 5, classes);
    auto w = gen.values(n);
    std::vector<double> wide(n * classes);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < classes; ++c) wide[i * classes + c] = w[i];
    Tape tape;
    Tensor a = attention_fuse_soft_scalar(tape, zs, AttentionModule::soft_scalar(w));
    Tensor b = attention_fuse_soft_perclass(
        tape, zs, AttentionModule::soft_perclass(n, classes, wide));
    EXPECT_EQ(to_vec(a.values()), to_vec(b.values()));
  }
}

TEST(AttentionPerClassTest, OneHotPerClassSelection) {
  oracle::Gen gen(7);
  const std::size_t n = 3, classes = 5;
  auto zs = random_branches(gen, n, 4, classes);
  std::vector<double> w(n * classes, 0.0);
  std::vector<std::size_t> pick{2, 0, 1, 1, 0};
  for (std::size_t c = 0; c < classes; ++c) w[pick[c] * classes + c] = 1.0;
  Tape tape;
  Tensor y = attention_fuse_soft_perclass(tape, zs, AttentionModule::soft_perclass(n, classes, w));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < classes; ++c)
      EXPECT_EQ(y.values()[r * classes + c], zs[pick[c]].values()[r * classes + c]);
}

TEST(AttentionPerClassTest, FortyWeightsForFourBranchesTenClasses) {
  AttentionModule att = AttentionModule::soft_perclass(4, 10, std::vector<double>(40, 0.0));
  EXPECT_EQ(att.weights.numel(), 40u);
  EXPECT_EQ(att.branches(), 4u);
  EXPECT_TRUE(att.weights.requires_grad());
}

TEST(AttentionPerClassTest, GradientsPassFiniteDifferences) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    oracle::Gen gen(seed);
    auto zs = random_branches(gen, 3, 2, 4, true);
    AttentionModule att = AttentionModule::soft_perclass(3, 4, gen.values(12));
    std::vector<int> labels{1, 3};
    auto f = [&](Tape& t) {
      return softmax_cross_entropy(t, attention_fuse(t, zs, att), labels);
    };
    EXPECT_LE(finite_diff_check(f, att.weights).max_relative_error, 1e-4);
    for (Tensor& z : zs) EXPECT_LE(finite_diff_check(f, z).max_relative_error, 1e-4);
  }
}

TEST(AttentionPerClassTest, ShapeMismatch) {
  oracle::Gen gen(8);
  auto zs = random_branches(gen, 2, 2, 3);
  Tape tape;
  EXPECT_THROW(attention_fuse_soft_perclass(
                   tape, zs, AttentionModule::soft_perclass(2, 4, std::vector<double>(8))),
               ShapeError);
  EXPECT_THROW(AttentionModule::soft_perclass(2, 3, std::vector<double>(5)), ShapeError);
}

TEST(AttentionPropertyTest, EveryModeIsLinearInBranchLogits) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    oracle::Gen gen(seed);
    const std::size_t n = 3, rows = 2, classes = 4;
    auto a = random_branches(gen, n, rows, classes);
    auto b = random_branches(gen, n, rows, classes);
    const double alpha = gen.uniform(-2, 2), beta = gen.uniform(-2, 2);
    std::vector<Tensor> mix;
    Tape tape;
    for (std::size_t i = 0; i < n; ++i)
      mix.push_back(tape.add(tape.scale(a[i], alpha), tape.scale(b[i], beta)));
    const AttentionModule modules[] = {
        AttentionModule::hard(gen.values(n)), AttentionModule::soft_scalar(gen.values(n)),
        AttentionModule::soft_perclass(n, classes, gen.values(n * classes))};
    for (const auto& att : modules) {
      Tensor lhs = attention_fuse(tape, mix, att);
      Tensor fa = attention_fuse(tape, a, att);
      Tensor fb = attention_fuse(tape, b, att);
      Tensor rhs = tape.add(tape.scale(fa, alpha), tape.scale(fb, beta));
      EXPECT_LE(oracle::max_abs_diff(lhs.values(), rhs.values()), 1e-12)
          << to_string(att.mode);
    }
  }
}

}  // namespace
}  // namespace interflow
