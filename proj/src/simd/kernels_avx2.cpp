// SPDX-License-Identifier: Apache-2.0
//
// AVX2+FMA variants. Functions carry target attributes instead of the whole
// file being built with -mavx2, so no inline STL code compiled for AVX2 can
// leak into the rest of the binary. Keep this file free of STL templates.

#include "vidbrain/simd/kernels.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define VIDBRAIN_HAVE_AVX2_PATH 1
#include <immintrin.h>
#else
#define VIDBRAIN_HAVE_AVX2_PATH 0
#endif

namespace vidbrain::simd {

#if VIDBRAIN_HAVE_AVX2_PATH
namespace {

#define VB_AVX2 __attribute__((target("avx2,fma")))

VB_AVX2 double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

VB_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd();
  __m256d s3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
    s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), s2);
    s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), s3);
  }
  for (; i + 4 <= n; i += 4) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
  }
  double s = hsum(_mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3)));
  for (; i < n; ++i) s = __builtin_fma(a[i], b[i], s);
  return s;
}

VB_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = __builtin_fma(alpha, x[i], y[i]);
}

// Every path below accumulates one output element as a zero-started fma
// chain over p = 0..k-1 and adds it to C once, so an element's value does not
// depend on which block it landed in.

VB_AVX2 void block_4x8(std::size_t k, const double* a, std::size_t lda, const double* b,
                       std::size_t ldb, double* c, std::size_t ldc) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * ldb);
    const __m256d b1 = _mm256_loadu_pd(b + p * ldb + 4);
    __m256d av = _mm256_broadcast_sd(a + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a + lda + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a + 2 * lda + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a + 3 * lda + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  double* r0 = c;
  double* r1 = c + ldc;
  double* r2 = c + 2 * ldc;
  double* r3 = c + 3 * ldc;
  _mm256_storeu_pd(r0, _mm256_add_pd(_mm256_loadu_pd(r0), c00));
  _mm256_storeu_pd(r0 + 4, _mm256_add_pd(_mm256_loadu_pd(r0 + 4), c01));
  _mm256_storeu_pd(r1, _mm256_add_pd(_mm256_loadu_pd(r1), c10));
  _mm256_storeu_pd(r1 + 4, _mm256_add_pd(_mm256_loadu_pd(r1 + 4), c11));
  _mm256_storeu_pd(r2, _mm256_add_pd(_mm256_loadu_pd(r2), c20));
  _mm256_storeu_pd(r2 + 4, _mm256_add_pd(_mm256_loadu_pd(r2 + 4), c21));
  _mm256_storeu_pd(r3, _mm256_add_pd(_mm256_loadu_pd(r3), c30));
  _mm256_storeu_pd(r3 + 4, _mm256_add_pd(_mm256_loadu_pd(r3 + 4), c31));
}

VB_AVX2 void block_1x8(std::size_t k, const double* a, const double* b, std::size_t ldb,
                       double* c) {
  __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d av = _mm256_broadcast_sd(a + p);
    c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb), c0);
    c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + 4), c1);
  }
  _mm256_storeu_pd(c, _mm256_add_pd(_mm256_loadu_pd(c), c0));
  _mm256_storeu_pd(c + 4, _mm256_add_pd(_mm256_loadu_pd(c + 4), c1));
}

VB_AVX2 void block_4x4(std::size_t k, const double* a, std::size_t lda, const double* b,
                       std::size_t ldb, double* c, std::size_t ldc) {
  __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
  __m256d c2 = _mm256_setzero_pd(), c3 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d bv = _mm256_loadu_pd(b + p * ldb);
    c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), bv, c0);
    c1 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + lda + p), bv, c1);
    c2 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + 2 * lda + p), bv, c2);
    c3 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + 3 * lda + p), bv, c3);
  }
  _mm256_storeu_pd(c, _mm256_add_pd(_mm256_loadu_pd(c), c0));
  _mm256_storeu_pd(c + ldc, _mm256_add_pd(_mm256_loadu_pd(c + ldc), c1));
  _mm256_storeu_pd(c + 2 * ldc, _mm256_add_pd(_mm256_loadu_pd(c + 2 * ldc), c2));
  _mm256_storeu_pd(c + 3 * ldc, _mm256_add_pd(_mm256_loadu_pd(c + 3 * ldc), c3));
}

VB_AVX2 void block_1x4(std::size_t k, const double* a, const double* b, std::size_t ldb,
                       double* c) {
  __m256d c0 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), _mm256_loadu_pd(b + p * ldb), c0);
  }
  _mm256_storeu_pd(c, _mm256_add_pd(_mm256_loadu_pd(c), c0));
}

VB_AVX2 void element_1x1(std::size_t k, const double* a, const double* b, std::size_t ldb,
                         double* c) {
  double s = 0.0;
  for (std::size_t p = 0; p < k; ++p) s = __builtin_fma(a[p], b[p * ldb], s);
  *c += s;
}

VB_AVX2 void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                          std::size_t lda, const double* b, std::size_t ldb, double* c,
                          std::size_t ldc) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) block_4x8(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    for (; i < m; ++i) block_1x8(k, a + i * lda, b + j, ldb, c + i * ldc + j);
  }
  for (; j + 4 <= n; j += 4) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) block_4x4(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    for (; i < m; ++i) block_1x4(k, a + i * lda, b + j, ldb, c + i * ldc + j);
  }
  for (; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) element_1x1(k, a + i * lda, b + j, ldb, c + i * ldc + j);
  }
}

VB_AVX2 void round_half_avx2(const double* x, double* y, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256d half_max = _mm256_set1_pd(65504.0);
  const __m256d inf = _mm256_set1_pd(__builtin_inf());
  const __m256i min_biased = _mm256_set1_epi64x(1023 - 14);
  const __m256i ten = _mm256_set1_epi64x(10);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    const __m256d av = _mm256_andnot_pd(sign, v);
    const __m256i biased = _mm256_srli_epi64(_mm256_castpd_si256(av), 52);
    // high 32 bits of every lane are zero, so a 32-bit max is a 64-bit max
    const __m256i clamped = _mm256_max_epi32(biased, min_biased);
    const __m256d q = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_sub_epi64(clamped, ten), 52));
    __m256d r = _mm256_mul_pd(
        _mm256_round_pd(_mm256_div_pd(v, q), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC), q);
    const __m256d over = _mm256_cmp_pd(_mm256_andnot_pd(sign, r), half_max, _CMP_GT_OQ);
    const __m256d signed_inf = _mm256_or_pd(_mm256_and_pd(v, sign), inf);
    r = _mm256_blendv_pd(r, signed_inf, over);
    _mm256_storeu_pd(y + i, r);
  }
  if (i < n) scalar_kernels().round_half(x + i, y + i, n - i);
}

#undef VB_AVX2

}  // namespace

const KernelTable* avx2_kernels() {
  __builtin_cpu_init();
  if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) return nullptr;
  static const KernelTable table{Backend::kAvx2, &dot_avx2, &axpy_avx2, &gemm_nn_avx2,
                                 &round_half_avx2};
  return &table;
}

#else

const KernelTable* avx2_kernels() { return nullptr; }

#endif

}  // namespace vidbrain::simd
