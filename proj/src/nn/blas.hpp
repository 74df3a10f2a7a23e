// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "vidbrain/simd/kernels.hpp"

namespace vidbrain::nn::detail {

// Row-major [rows, cols] -> [cols, rows].
inline void transpose_into(const double* src, std::size_t rows, std::size_t cols,
                           std::vector<double>& dst) {
  dst.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

// C[m,n] += op(A) op(B). A is [m,k] (or [k,m] when ta), B is [k,n] (or
// [n,k] when tb). Transposed operands are packed once, then the row-major
// kernel runs.
inline void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
                 const double* b, double* c) {
  if (m == 0 || n == 0 || k == 0) return;
  thread_local std::vector<double> pack_a;
  thread_local std::vector<double> pack_b;
  const double* pa = a;
  const double* pb = b;
  if (ta) {
    transpose_into(a, k, m, pack_a);
    pa = pack_a.data();
  }
  if (tb) {
    transpose_into(b, n, k, pack_b);
    pb = pack_b.data();
  }
  simd::kernels().gemm_nn(m, n, k, pa, k, pb, n, c, n);
}

}  // namespace vidbrain::nn::detail
