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

#include "interflow/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "interflow/error.hpp"
#include "kernels.hpp"

namespace interflow {
namespace {

struct ConvGeometry {
  std::size_t n, c, h, w;        // input
  std::size_t o, k, stride, pad;  // filter
  std::size_t oh, ow;            // output

  std::size_t rows() const { return c * k * k; }
  std::size_t positions() const { return oh * ow; }
};

// cols[(ci·k + ky)·k + kx][n·P + oy·ow + ox] = x[n][ci][oy·s + ky - pad][ox·s + kx - pad]
void im2col(const ConvGeometry& g, const double* x, double* cols) {
  const std::size_t np = g.n * g.positions();
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        double* row = cols + ((ci * g.k + ky) * g.k + kx) * np;
        for (std::size_t n = 0; n < g.n; ++n) {
          const double* plane = x + (n * g.c + ci) * g.h * g.w;
          double* dst = row + n * g.positions();
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                            static_cast<std::ptrdiff_t>(g.pad);
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                              static_cast<std::ptrdiff_t>(g.pad);
              const bool inside = iy >= 0 && ix >= 0 &&
                                  iy < static_cast<std::ptrdiff_t>(g.h) &&
                                  ix < static_cast<std::ptrdiff_t>(g.w);
              dst[oy * g.ow + ox] =
                  inside ? plane[static_cast<std::size_t>(iy) * g.w +
                                 static_cast<std::size_t>(ix)]
                         : 0.0;
            }
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const double* cols, double* dx) {
  const std::size_t np = g.n * g.positions();
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const double* row = cols + ((ci * g.k + ky) * g.k + kx) * np;
        for (std::size_t n = 0; n < g.n; ++n) {
          double* plane = dx + (n * g.c + ci) * g.h * g.w;
          const double* src = row + n * g.positions();
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                              static_cast<std::ptrdiff_t>(g.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
              plane[static_cast<std::size_t>(iy) * g.w +
                    static_cast<std::size_t>(ix)] += src[oy * g.ow + ox];
            }
          }
        }
      }
    }
  }
}

void require_rank4(const Tensor& x, const char* op) {
  if (x.shape().rank() != 4) {
    throw ShapeError(std::string(op) + " expects an N×C×H×W input, got " +
                     x.shape().to_string());
  }
}

}  // namespace

Conv2dLayer Conv2dLayer::make(std::size_t in_channels,
                              std::size_t out_channels, std::size_t kernel,
                              std::size_t stride, std::size_t padding) {
  if (kernel == 0 || stride == 0) {
    throw std::invalid_argument("conv2d: kernel and stride must be positive");
  }
  Conv2dLayer layer;
  layer.weight =
      Tensor::zeros(Shape{out_channels, in_channels, kernel, kernel}, true);
  layer.bias = Tensor::zeros(Shape{out_channels}, true);
  layer.stride = stride;
  layer.padding = padding;
  return layer;
}

std::size_t Conv2dLayer::output_extent(std::size_t extent) const {
  const std::size_t padded = extent + 2 * padding;
  if (padded < kernel()) return 0;
  return (padded - kernel()) / stride + 1;
}

BatchNormLayer BatchNormLayer::make(std::size_t channels) {
  BatchNormLayer layer;
  layer.gamma = Tensor::full(Shape{channels}, 1.0, true);
  layer.beta = Tensor::zeros(Shape{channels}, true);
  layer.running_mean = Tensor::zeros(Shape{channels});
  layer.running_var = Tensor::full(Shape{channels}, 1.0);
  return layer;
}

LinearLayer LinearLayer::make(std::size_t in_features,
                              std::size_t out_features) {
  LinearLayer layer;
  layer.weight = Tensor::zeros(Shape{out_features, in_features}, true);
  layer.bias = Tensor::zeros(Shape{out_features}, true);
  return layer;
}

Tensor conv2d_forward(Tape& tape, const Conv2dLayer& layer, const Tensor& x) {
  require_rank4(x, "conv2d");
  if (x.shape()[1] != layer.in_channels()) {
    throw ShapeError("conv2d: input has " + std::to_string(x.shape()[1]) +
                     " channels, layer expects " +
                     std::to_string(layer.in_channels()));
  }
  ConvGeometry g{x.shape()[0],         x.shape()[1],  x.shape()[2],
                 x.shape()[3],         layer.out_channels(),
                 layer.kernel(),       layer.stride,  layer.padding,
                 layer.output_extent(x.shape()[2]),
                 layer.output_extent(x.shape()[3])};
  if (g.oh == 0 || g.ow == 0) {
    throw ShapeError("conv2d: input " + x.shape().to_string() +
                     " is too small for kernel " + std::to_string(g.k) +
                     " with padding " + std::to_string(g.pad));
  }

  const std::size_t np = g.n * g.positions();
  std::vector<double> cols(g.rows() * np);
  im2col(g, x.values().data(), cols.data());
  std::vector<double> tmp(g.o * np, 0.0);
  kernels::gemm_nn(g.o, np, g.rows(), layer.weight.values().data(),
                   cols.data(), tmp.data());

  std::vector<double> out(g.n * g.o * g.positions());
  const auto bias = layer.bias.values();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t o = 0; o < g.o; ++o) {
      const double* src = tmp.data() + o * np + n * g.positions();
      double* dst = out.data() + (n * g.o + o) * g.positions();
      for (std::size_t p = 0; p < g.positions(); ++p) dst[p] = src[p] + bias[o];
    }
  }

  return tape.record(
      Tensor(Shape{g.n, g.o, g.oh, g.ow}, std::move(out)),
      {x, layer.weight, layer.bias},
      [g, x = x, w = layer.weight, b = layer.bias](const Tensor& y) mutable {
        const std::size_t np = g.n * g.positions();
        const auto dy = y.grad();
        std::vector<double> gt(g.o * np);
        for (std::size_t n = 0; n < g.n; ++n) {
          for (std::size_t o = 0; o < g.o; ++o) {
            const double* src = dy.data() + (n * g.o + o) * g.positions();
            std::copy(src, src + g.positions(),
                      gt.data() + o * np + n * g.positions());
          }
        }
        if (b.requires_grad()) {
          auto db = b.mutable_grad();
          for (std::size_t o = 0; o < g.o; ++o) {
            double acc = 0.0;
            for (std::size_t j = 0; j < np; ++j) acc += gt[o * np + j];
            db[o] += acc;
          }
        }
        if (w.requires_grad()) {
          std::vector<double> cols(g.rows() * np);
          im2col(g, x.values().data(), cols.data());
          kernels::gemm_nt(g.o, g.rows(), np, gt.data(), cols.data(),
                           w.mutable_grad().data());
        }
        if (x.requires_grad()) {
          std::vector<double> dcols(g.rows() * np, 0.0);
          kernels::gemm_tn(g.rows(), np, g.o, w.values().data(), gt.data(),
                           dcols.data());
          col2im(g, dcols.data(), x.mutable_grad().data());
        }
      });
}

Tensor batchnorm_forward(Tape& tape, BatchNormLayer& layer, const Tensor& x,
                         Mode mode) {
  require_rank4(x, "batchnorm");
  const std::size_t n = x.shape()[0];
  const std::size_t c = x.shape()[1];
  const std::size_t hw = x.shape()[2] * x.shape()[3];
  const std::size_t m = n * hw;
  if (c != layer.channels()) {
    throw ShapeError("batchnorm: input has " + std::to_string(c) +
                     " channels, layer expects " +
                     std::to_string(layer.channels()));
  }
  if (mode == Mode::train && m < 2) {
    throw std::invalid_argument(
        "batchnorm: train mode needs at least 2 values per channel, got " +
        std::to_string(m));
  }

  const auto xv = x.values();
  const auto gamma = layer.gamma.values();
  const auto beta = layer.beta.values();
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(c);
  std::vector<double> out(xv.size());

  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean;
    double var;
    if (mode == Mode::train) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = xv.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) s += p[j];
      }
      mean = s / static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = xv.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) ss += (p[j] - mean) * (p[j] - mean);
      }
      var = ss / static_cast<double>(m);
      const double unbiased = ss / static_cast<double>(m - 1);
      auto rm = layer.running_mean.mutable_values();
      auto rv = layer.running_var.mutable_values();
      rm[ch] = (1.0 - layer.momentum) * rm[ch] + layer.momentum * mean;
      rv[ch] = (1.0 - layer.momentum) * rv[ch] + layer.momentum * unbiased;
    } else {
      mean = layer.running_mean.values()[ch];
      var = layer.running_var.values()[ch];
    }
    inv_std[ch] = 1.0 / std::sqrt(var + layer.eps);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        xhat[base + j] = (xv[base + j] - mean) * inv_std[ch];
        out[base + j] = gamma[ch] * xhat[base + j] + beta[ch];
      }
    }
  }

  return tape.record(
      Tensor(x.shape(), std::move(out)), {x, layer.gamma, layer.beta},
      [x = x, gamma_t = layer.gamma, beta_t = layer.beta, xhat = std::move(xhat),
       inv_std = std::move(inv_std), n, c, hw, m,
       mode](const Tensor& y) mutable {
        const auto dy = y.grad();
        const auto gamma = gamma_t.values();
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sum_dy = 0.0;
          double sum_dy_xhat = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t base = (i * c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
              sum_dy += dy[base + j];
              sum_dy_xhat += dy[base + j] * xhat[base + j];
            }
          }
          if (gamma_t.requires_grad()) gamma_t.mutable_grad()[ch] += sum_dy_xhat;
          if (beta_t.requires_grad()) beta_t.mutable_grad()[ch] += sum_dy;
          if (!x.requires_grad()) continue;
          auto dx = x.mutable_grad();
          const double scale = gamma[ch] * inv_std[ch];
          const double md = static_cast<double>(m);
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t base = (i * c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
              if (mode == Mode::train) {
                dx[base + j] += scale / md *
                                (md * dy[base + j] - sum_dy -
                                 xhat[base + j] * sum_dy_xhat);
              } else {
                dx[base + j] += scale * dy[base + j];
              }
            }
          }
        }
      });
}

Tensor relu(Tape& tape, const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return tape.record(Tensor(x.shape(), std::move(out)), {x},
                     [x = x](const Tensor& y) mutable {
                       const auto dy = y.grad();
                       const auto xv = x.values();
                       auto dx = x.mutable_grad();
                       for (std::size_t i = 0; i < dy.size(); ++i) {
                         if (xv[i] > 0.0) dx[i] += dy[i];
                       }
                     });
}

Tensor global_avg_pool(Tape& tape, const Tensor& x) {
  require_rank4(x, "global_avg_pool");
  const std::size_t n = x.shape()[0];
  const std::size_t c = x.shape()[1];
  const std::size_t hw = x.shape()[2] * x.shape()[3];
  const auto xv = x.values();
  std::vector<double> out(n * c);
  for (std::size_t i = 0; i < n * c; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += xv[i * hw + j];
    out[i] = s / static_cast<double>(hw);
  }
  return tape.record(Tensor(Shape{n, c}, std::move(out)), {x},
                     [x = x, hw](const Tensor& y) mutable {
                       const auto dy = y.grad();
                       auto dx = x.mutable_grad();
                       const double inv = 1.0 / static_cast<double>(hw);
                       for (std::size_t i = 0; i < dy.size(); ++i) {
                         for (std::size_t j = 0; j < hw; ++j) {
                           dx[i * hw + j] += dy[i] * inv;
                         }
                       }
                     });
}

Tensor linear_forward(Tape& tape, const LinearLayer& layer, const Tensor& x) {
  if (x.shape().rank() != 2 || x.shape()[1] != layer.in_features()) {
    throw ShapeError("linear: input " + x.shape().to_string() +
                     " does not match weight " +
                     layer.weight.shape().to_string());
  }
  const std::size_t n = x.shape()[0];
  const std::size_t in = layer.in_features();
  const std::size_t out_f = layer.out_features();
  std::vector<double> out(n * out_f, 0.0);
  kernels::gemm_nt(n, out_f, in, x.values().data(),
                   layer.weight.values().data(), out.data());
  const auto b = layer.bias.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < out_f; ++j) out[i * out_f + j] += b[j];
  }
  return tape.record(
      Tensor(Shape{n, out_f}, std::move(out)), {x, layer.weight, layer.bias},
      [x = x, w = layer.weight, b = layer.bias, n, in, out_f](const Tensor& y) mutable {
        const double* dy = y.grad().data();
        if (x.requires_grad()) {
          kernels::gemm_nn(n, in, out_f, dy, w.values().data(),
                           x.mutable_grad().data());
        }
        if (w.requires_grad()) {
          kernels::gemm_tn(out_f, in, n, dy, x.values().data(),
                           w.mutable_grad().data());
        }
        if (b.requires_grad()) {
          auto db = b.mutable_grad();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < out_f; ++j) db[j] += dy[i * out_f + j];
          }
        }
      });
}

std::vector<double> softmax_rows(const Tensor& logits) {
  if (logits.shape().rank() != 2) {
    throw ShapeError("softmax expects N×C logits, got " +
                     logits.shape().to_string());
  }
  const std::size_t n = logits.shape()[0];
  const std::size_t c = logits.shape()[1];
  const auto z = logits.values();
  std::vector<double> p(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = z.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      p[i * c + j] = std::exp(row[j] - mx);
      total += p[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) p[i * c + j] /= total;
  }
  return p;
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits,
                             std::span<const int> labels) {
  if (logits.shape().rank() != 2) {
    throw ShapeError("cross-entropy expects N×C logits, got " +
                     logits.shape().to_string());
  }
  const std::size_t n = logits.shape()[0];
  const std::size_t c = logits.shape()[1];
  if (labels.size() != n) {
    throw ShapeError("cross-entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(n) + " rows");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw std::invalid_argument("cross-entropy: label " +
                                  std::to_string(labels[i]) + " at row " +
                                  std::to_string(i) + " is outside [0, " +
                                  std::to_string(c) + ")");
    }
  }

  const auto z = logits.values();
  std::vector<double> probs(n * c);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = z.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(row[j] - mx);
    const double log_total = std::log(total);
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx - log_total);
    }
    loss -= row[labels[i]] - mx - log_total;
  }
  loss /= static_cast<double>(n);

  std::vector<int> owned(labels.begin(), labels.end());
  return tape.record(
      Tensor::scalar(loss), {logits},
      [logits = logits, probs = std::move(probs), owned = std::move(owned), n,
       c](const Tensor& y) mutable {
        const double g = y.grad()[0] / static_cast<double>(n);
        auto dz = logits.mutable_grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            const double onehot =
                static_cast<std::size_t>(owned[i]) == j ? 1.0 : 0.0;
            dz[i * c + j] += g * (probs[i * c + j] - onehot);
          }
        }
      });
}

}  // namespace interflow
