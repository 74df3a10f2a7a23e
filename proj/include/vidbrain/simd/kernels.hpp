// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string_view>

namespace vidbrain::simd {

enum class Backend { kScalar, kAvx2 };

std::string_view backend_name(Backend b);

/// Inner-loop kernels used by the tensor ops. Every entry has a portable
/// scalar reference; vector variants must agree with it to rounding (the
/// FMA contraction is the only permitted difference) and round_half must
/// agree bit for bit.
///
/// All matrices are row-major with explicit leading dimensions.
struct KernelTable {
  Backend backend;

  double (*dot)(const double* a, const double* b, std::size_t n);

  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // C[m,n] += A[m,k] * B[k,n]. Each output element is accumulated over k in
  // increasing order, independently of every other row of A.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc);

  // Round to the nearest IEEE binary16 value (ties to even) and widen back.
  // Magnitudes past the binary16 range become +/-inf.
  void (*round_half)(const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_kernels();

/// nullptr when the CPU (or the compiler) lacks AVX2+FMA.
const KernelTable* avx2_kernels();

/// The table ops should call. Picked once from CPU features; the
/// VIDBRAIN_SIMD environment variable ("scalar" or "avx2") overrides.
const KernelTable& kernels();

/// Force a backend (tests). Throws std::invalid_argument if unavailable.
void set_backend(Backend b);

Backend detect_backend();

}  // namespace vidbrain::simd
