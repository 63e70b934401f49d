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

#include <cmath>
#include <string>
#include <vector>

#include "interflow/error.hpp"
#include "interflow/tape.hpp"
#include "interflow/tensor.hpp"
#include "support/oracles.hpp"

namespace interflow {
namespace {

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

TEST(ShapeTest, NumelAndRendering) {
  Shape s{2, 3, 4};
  EXPECT_EQ(s.rank(), 3u);
  EXPECT_EQ(s.numel(), 24u);
  EXPECT_EQ(s.to_string(), "[2, 3, 4]");
}

TEST(ShapeTest, RejectsZeroExtentAndEmptyRank) {
  EXPECT_THROW(Shape({2, 0}), ShapeError);
  EXPECT_THROW(Shape(std::vector<std::size_t>{}), ShapeError);
}

TEST(TensorTest, ValueCountMustMatchShape) {
  EXPECT_THROW(Tensor(Shape{2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  Tensor t(Shape{2, 2}, {1.0, 2.0, 3.0, 4.0});
  EXPECT_EQ(t.numel(), 4u);
  EXPECT_FALSE(t.has_grad());
}

TEST(TensorTest, FactoriesAndItem) {
  EXPECT_EQ(to_vec(Tensor::zeros({3}).values()), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(to_vec(Tensor::full({2}, 1.5).values()), (std::vector<double>{1.5, 1.5}));
  EXPECT_EQ(Tensor::scalar(4.0).item(), 4.0);
  EXPECT_THROW(Tensor::zeros({2}).item(), ShapeError);
}

TEST(TensorTest, HandlesShareStorageAndCloneDoesNot) {
  Tensor a = Tensor::zeros({2});
  Tensor alias = a;
  Tensor copy = a.clone();
  alias.mutable_values()[0] = 7.0;
  EXPECT_EQ(a.values()[0], 7.0);
  EXPECT_EQ(copy.values()[0], 0.0);
  EXPECT_TRUE(a.same_as(alias));
  EXPECT_FALSE(a.same_as(copy));
}

TEST(TensorTest, GradAllocatedOnDemand) {
  Tensor t = Tensor::zeros({3}, true);
  EXPECT_TRUE(t.grad().empty());
  t.mutable_grad()[1] = 2.0;
  EXPECT_EQ(t.grad().size(), 3u);
  t.zero_grad();
  EXPECT_EQ(t.grad()[1], 0.0);
}

TEST(ElementwiseTest, AddExample) {
  Tape tape;
  Tensor y = tape.add(Tensor({2}, {1, 2}), Tensor({2}, {3, 4}));
  EXPECT_EQ(to_vec(y.values()), (std::vector<double>{4, 6}));
}

TEST(ElementwiseTest, MulByScalarZero) {
  Tape tape;
  Tensor x({2, 3}, {1, -2, 3, 4, 5, -6});
  Tensor y = tape.mul(x, Tensor::scalar(0.0));
  EXPECT_EQ(y.shape(), x.shape());
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(ElementwiseTest, SubMatchesLoopOracle) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    oracle::Gen gen(seed);
    auto av = gen.values(6);
    auto bv = gen.values(6);
    Tape tape;
    Tensor y = tape.sub(Tensor({2, 3}, av), Tensor({2, 3}, bv));
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(y.values()[i], av[i] - bv[i]);
  }
}

TEST(ElementwiseTest, MismatchReportsBothShapes) {
  Tape tape;
  try {
    tape.add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos);
    EXPECT_NE(msg.find("[3, 2]"), std::string::npos);
  }
}

TEST(ElementwiseTest, ScalarBroadcastGradientSums) {
  Tape tape;
  Tensor a({3}, {1, 2, 3}, true);
  Tensor b = Tensor::scalar(2.0, true);
  tape.backward(tape.sum(tape.mul(a, b)));
  EXPECT_EQ(to_vec(a.grad()), (std::vector<double>{2, 2, 2}));
  EXPECT_EQ(b.grad()[0], 6.0);
}

TEST(MatmulTest, IdentityLeavesOperandUnchanged) {
  Tape tape;
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor b({3, 2}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(to_vec(tape.matmul(eye, b).values()), to_vec(b.values()));
}

TEST(MatmulTest, OneByOne) {
  Tape tape;
  EXPECT_EQ(tape.matmul(Tensor({1, 1}, {2}), Tensor({1, 1}, {3})).item(), 6.0);
}

TEST(MatmulTest, MatchesTripleLoopOracle) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    oracle::Gen gen(100 + seed);
    auto av = gen.values(20);
    auto bv = gen.values(15);
    Tape tape;
    Tensor c = tape.matmul(Tensor({4, 5}, av), Tensor({5, 3}, bv));
    EXPECT_EQ(c.shape(), (Shape{4, 3}));
    EXPECT_LE(oracle::max_abs_diff(c.values(), oracle::matmul(av, bv, 4, 5, 3)), 1e-12);
  }
}

TEST(MatmulTest, BackwardRule) {
  oracle::Gen gen(7);
  auto av = gen.values(6);
  auto bv = gen.values(8);
  auto gv = gen.values(12);
  Tape tape;
  Tensor a({3, 2}, av, true);
  Tensor b({2, 4}, bv, true);
  Tensor g({3, 4}, gv);
  tape.backward(tape.sum(tape.mul(tape.matmul(a, b), g)));
  // dA = G·Bᵀ, dB = Aᵀ·G
  std::vector<double> bt(8), at(6);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j) bt[j * 2 + i] = bv[i * 4 + j];
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) at[j * 3 + i] = av[i * 2 + j];
  EXPECT_LE(oracle::max_abs_diff(a.grad(), oracle::matmul(gv, bt, 3, 4, 2)), 1e-12);
  EXPECT_LE(oracle::max_abs_diff(b.grad(), oracle::matmul(at, gv, 2, 3, 4)), 1e-12);
}

TEST(MatmulTest, InnerMismatchRejected) {
  Tape tape;
  EXPECT_THROW(tape.matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
  EXPECT_THROW(tape.matmul(Tensor::zeros({6}), Tensor::zeros({6, 1})), ShapeError);
}

TEST(ScaleTest, ForwardAndBackward) {
  Tape tape;
  Tensor x({2}, {1, -3}, true);
  Tensor y = tape.scale(x, -2.0);
  EXPECT_EQ(to_vec(y.values()), (std::vector<double>{-2, 6}));
  tape.backward(tape.sum(y));
  EXPECT_EQ(to_vec(x.grad()), (std::vector<double>{-2, -2}));
}

}  // namespace
}  // namespace interflow
