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

// Row-major dense kernels shared by matmul, linear and conv2d. All of them
// ACCUMULATE into C; callers zero C when they want an assignment. Summation
// order over the reduction index is always ascending, which keeps results
// reproducible and makes gemm_nn bit-identical to a plain triple loop.

#ifndef INTERFLOW_SRC_KERNELS_HPP_
#define INTERFLOW_SRC_KERNELS_HPP_

#include <cstddef>

namespace interflow::kernels {

// C[M×N] += A[M×K] · B[K×N]
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c_row = c + i * n;
    const double* a_row = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double a_ip = a_row[p];
      const double* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        c_row[j] += a_ip * b_row[j];
      }
    }
  }
}

// C[M×N] += A[M×K] · B[N×K]ᵀ
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* b_row = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        acc += a_row[p] * b_row[p];
      }
      c[i * n + j] += acc;
    }
  }
}

// C[M×N] += A[K×M]ᵀ · B[K×N]
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* a_row = a + p * m;
    const double* b_row = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double a_pi = a_row[i];
      double* c_row = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        c_row[j] += a_pi * b_row[j];
      }
    }
  }
}

}  // namespace interflow::kernels

#endif  // INTERFLOW_SRC_KERNELS_HPP_
