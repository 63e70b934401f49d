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

#include "interflow/tape.hpp"

#include <algorithm>
#include <utility>

#include "interflow/error.hpp"
#include "kernels.hpp"

namespace interflow {

void accumulate_grad(Tensor& t, std::span<const double> grad) {
  if (!t.requires_grad()) return;
  std::span<double> dst = t.mutable_grad();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] += grad[i];
  }
}

Tensor Tape::record(Tensor output, std::vector<Tensor> inputs,
                    BackwardRule rule) {
  const bool needs_grad =
      std::any_of(inputs.begin(), inputs.end(),
                  [](const Tensor& t) { return t.requires_grad(); });
  output.set_requires_grad(needs_grad);
  if (recording_ && needs_grad) {
    nodes_.push_back(Node{std::move(inputs), output, std::move(rule)});
  }
  return output;
}

Tensor Tape::binary(const Tensor& a, const Tensor& b, BinaryKind kind) {
  const bool broadcast = b.numel() == 1 && !(a.shape() == b.shape());
  if (!broadcast && !(a.shape() == b.shape())) {
    throw ShapeError("elementwise op needs identical shapes or a scalar "
                     "right operand, got " +
                     a.shape().to_string() + " and " + b.shape().to_string());
  }
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double bi = broadcast ? bv[0] : bv[i];
    switch (kind) {
      case BinaryKind::add: out[i] = av[i] + bi; break;
      case BinaryKind::sub: out[i] = av[i] - bi; break;
      case BinaryKind::mul: out[i] = av[i] * bi; break;
    }
  }
  return record(
      Tensor(a.shape(), std::move(out)), {a, b},
      [a = a, b = b, kind, broadcast](const Tensor& y) mutable {
        const auto g = y.grad();
        const auto av = a.values();
        const auto bv = b.values();
        if (a.requires_grad()) {
          auto ga = a.mutable_grad();
          for (std::size_t i = 0; i < g.size(); ++i) {
            const double bi = broadcast ? bv[0] : bv[i];
            ga[i] += kind == BinaryKind::mul ? g[i] * bi : g[i];
          }
        }
        if (b.requires_grad()) {
          auto gb = b.mutable_grad();
          for (std::size_t i = 0; i < g.size(); ++i) {
            double d = g[i];
            if (kind == BinaryKind::sub) d = -d;
            if (kind == BinaryKind::mul) d *= av[i];
            gb[broadcast ? 0 : i] += d;
          }
        }
      });
}

Tensor Tape::scale(const Tensor& a, double c) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= c;
  return record(Tensor(a.shape(), std::move(out)), {a},
                [a = a, c](const Tensor& y) mutable {
                  const auto g = y.grad();
                  auto ga = a.mutable_grad();
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
                });
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().rank() != 2 || b.shape().rank() != 2 ||
      a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul needs (M×K)·(K×N), got " + a.shape().to_string() +
                     " and " + b.shape().to_string());
  }
  const std::size_t m = a.shape()[0];
  const std::size_t k = a.shape()[1];
  const std::size_t n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  kernels::gemm_nn(m, n, k, a.values().data(), b.values().data(), out.data());
  return record(Tensor(Shape{m, n}, std::move(out)), {a, b},
                [a = a, b = b, m, n, k](const Tensor& y) mutable {
                  const double* g = y.grad().data();
                  if (a.requires_grad()) {
                    kernels::gemm_nt(m, k, n, g, b.values().data(),
                                     a.mutable_grad().data());
                  }
                  if (b.requires_grad()) {
                    kernels::gemm_tn(k, n, m, a.values().data(), g,
                                     b.mutable_grad().data());
                  }
                });
}

Tensor Tape::sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return record(Tensor::scalar(total), {a}, [a = a](const Tensor& y) mutable {
    const double g = y.grad()[0];
    for (double& d : a.mutable_grad()) d += g;
  });
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward needs a scalar loss, got " +
                     (loss.defined() ? loss.shape().to_string()
                                     : std::string("an undefined tensor")));
  }
  auto it = std::find_if(nodes_.rbegin(), nodes_.rend(), [&](const Node& n) {
    return n.output.same_as(loss);
  });
  if (it == nodes_.rend()) {
    throw Error("backward: loss was not produced by this tape");
  }
  if (replayed_) {
    throw Error("backward: tape was already replayed");
  }
  replayed_ = true;
  Tensor seed = it->output;
  seed.mutable_grad()[0] += 1.0;
  for (; it != nodes_.rend(); ++it) {
    if (it->output.has_grad()) {
      it->rule(it->output);
    }
  }
}

}  // namespace interflow
