// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "vidbrain/simd/kernels.hpp"

using namespace vidbrain::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("avx2 dot and axpy agree with scalar") {
  const KernelTable* fast = avx2_kernels();
  if (!fast) return;
  const KernelTable& ref = scalar_kernels();
  std::mt19937_64 rng(1);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 16u, 33u, 257u}) {
    auto a = random_vec(n, rng), b = random_vec(n, rng);
    double bound = 0;
    for (std::size_t i = 0; i < n; ++i) bound += std::abs(a[i] * b[i]);
    CHECK(std::abs(fast->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <=
          1e-14 * (1 + bound));
    auto y1 = random_vec(n, rng), y2 = y1;
    fast->axpy(0.37, a.data(), y1.data(), n);
    ref.axpy(0.37, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (1 + std::abs(y2[i])));
  }
}

TEST_CASE("avx2 gemm agrees with scalar on ragged shapes") {
  const KernelTable* fast = avx2_kernels();
  if (!fast) return;
  const KernelTable& ref = scalar_kernels();
  std::mt19937_64 rng(2);
  for (std::size_t m : {1u, 3u, 4u, 9u})
    for (std::size_t n : {1u, 5u, 8u, 13u})
      for (std::size_t k : {1u, 2u, 17u}) {
        auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
        auto c1 = random_vec(m * n, rng), c2 = c1;
        fast->gemm_nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n);
        ref.gemm_nn(m, n, k, a.data(), k, b.data(), n, c2.data(), n);
        for (std::size_t i = 0; i < m * n; ++i) CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-12));
      }
}

TEST_CASE("avx2 gemm rows do not depend on other rows") {
  const KernelTable* fast = avx2_kernels();
  if (!fast) return;
  std::mt19937_64 rng(3);
  const std::size_t m = 11, n = 10, k = 7;
  auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
  std::vector<double> c_full(m * n, 0.0);
  fast->gemm_nn(m, n, k, a.data(), k, b.data(), n, c_full.data(), n);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> row(n, 0.0);
    fast->gemm_nn(1, n, k, a.data() + i * k, k, b.data(), n, row.data(), n);
    CHECK(std::memcmp(row.data(), c_full.data() + i * n, n * sizeof(double)) == 0);
  }
}

TEST_CASE("avx2 round_half is bit-identical to scalar") {
  const KernelTable* fast = avx2_kernels();
  if (!fast) return;
  const KernelTable& ref = scalar_kernels();
  std::mt19937_64 rng(4);
  std::vector<double> xs;
  for (double s : {1e-9, 1e-6, 1e-3, 1.0, 1e3, 6e4, 1e6}) {
    auto v = random_vec(203, rng, s);
    xs.insert(xs.end(), v.begin(), v.end());
  }
  for (double x : {0.0, -0.0, 65504.0, 65519.0, 65520.0, -65520.0, 6.103515625e-05, 5.9604644775390625e-08,
                   2.98e-08, 1.0 + 1.0 / 2048, double(INFINITY), -double(INFINITY)})
    xs.push_back(x);
  std::vector<double> a(xs.size()), b(xs.size());
  fast->round_half(xs.data(), a.data(), xs.size());
  ref.round_half(xs.data(), b.data(), xs.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("backend selection") {
  set_backend(Backend::kScalar);
  CHECK(kernels().backend == Backend::kScalar);
  set_backend(detect_backend());
  CHECK(kernels().backend == detect_backend());
}
