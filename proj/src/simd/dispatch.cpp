// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "vidbrain/simd/kernels.hpp"

namespace vidbrain::simd {
namespace {

const KernelTable* initial_table() {
  if (const char* env = std::getenv("VIDBRAIN_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_kernels();
    if (want == "avx2" && avx2_kernels() != nullptr) return avx2_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

Backend detect_backend() { return avx2_kernels() != nullptr ? Backend::kAvx2 : Backend::kScalar; }

void set_backend(Backend b) {
  if (b == Backend::kScalar) {
    active().store(&scalar_kernels(), std::memory_order_release);
    return;
  }
  const KernelTable* t = avx2_kernels();
  if (t == nullptr) throw std::invalid_argument("avx2 backend not available on this CPU");
  active().store(t, std::memory_order_release);
}

}  // namespace vidbrain::simd
