// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>

#include "vidbrain/simd/kernels.hpp"

namespace vidbrain::simd {
namespace {

constexpr double kHalfMax = 65504.0;

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    std::size_t lda, const double* b, std::size_t ldb, double* c,
                    std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    const double* arow = a + i * lda;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// The binary16 grid spacing around x is 2^(max(e, -14) - 10) where e is the
// unbiased exponent of x; below 2^-14 the grid is the subnormal step 2^-24.
// Scaling by a power of two is exact, so one nearbyint does the rounding.
double round_half_one(double x) {
  if (!std::isfinite(x)) return x;
  int e = 0;
  std::frexp(x, &e);
  const int qexp = std::max(e - 1, -14) - 10;
  const double r = std::ldexp(std::nearbyint(std::ldexp(x, -qexp)), qexp);
  if (std::fabs(r) > kHalfMax) return std::copysign(std::numeric_limits<double>::infinity(), x);
  return r;
}

void round_half_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = round_half_one(x[i]);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Backend::kScalar, &dot_scalar, &axpy_scalar, &gemm_nn_scalar,
                                 &round_half_scalar};
  return table;
}

}  // namespace vidbrain::simd
