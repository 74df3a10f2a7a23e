// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/nn/precision.hpp"

#include <cmath>
#include <stdexcept>

#include "op_builder.hpp"
#include "vidbrain/simd/kernels.hpp"

namespace vidbrain::nn {
namespace {
thread_local bool t_half_storage = false;
}

std::string_view precision_name(PrecisionMode m) {
  return m == PrecisionMode::kSingle ? "single" : "mixed-half";
}

PrecisionMode parse_precision(std::string_view s) {
  if (s == "single") return PrecisionMode::kSingle;
  if (s == "mixed-half") return PrecisionMode::kMixedHalf;
  throw std::invalid_argument("precision must be 'single' or 'mixed-half', got '" +
                              std::string(s) + "'");
}

PrecisionPolicy PrecisionPolicy::single() { return PrecisionPolicy{}; }

PrecisionPolicy PrecisionPolicy::mixed_half(double initial_scale) {
  PrecisionPolicy p;
  p.mode = PrecisionMode::kMixedHalf;
  p.loss_scale = initial_scale;
  return p;
}

void PrecisionPolicy::validate() const {
  if (!(backoff_factor > 0.0 && backoff_factor < 1.0))
    throw std::invalid_argument("backoff_factor must lie in (0, 1)");
  if (!(loss_scale > 0.0)) throw std::invalid_argument("loss_scale must be positive");
  if (mode == PrecisionMode::kSingle) {
    if (loss_scale != 1.0) throw std::invalid_argument("single precision requires loss_scale = 1");
    return;
  }
  int e = 0;
  if (std::frexp(loss_scale, &e) != 0.5)
    throw std::invalid_argument("mixed-half loss_scale must be a power of two");
}

double round_half(double x) {
  double y = 0.0;
  simd::kernels().round_half(&x, &y, 1);
  return y;
}

void round_half_inplace(std::span<double> xs) {
  simd::kernels().round_half(xs.data(), xs.data(), xs.size());
}

bool has_nonfinite(std::span<const double> xs) {
  for (double v : xs)
    if (!std::isfinite(v)) return true;
  return false;
}

bool round_half_overflowed(std::span<const double> xs) {
  for (double x : xs)
    if (!std::isfinite(round_half(x))) return true;
  return false;
}

Tensor round_half(const Tensor& x) {
  std::vector<double> out(x.numel());
  simd::kernels().round_half(x.data().data(), out.data(), out.size());
  // Straight-through: rounding is treated as identity in the reverse pass.
  return detail::make_result(x.shape(), std::move(out), "round_half", {x},
                             [x](detail::Node& self) {
                               if (auto* gx = detail::grad_of(x.node_ptr()))
                                 for (std::size_t i = 0; i < self.grad.size(); ++i)
                                   (*gx)[i] += self.grad[i];
                             });
}

HalfStorageScope::HalfStorageScope(bool enabled) : prev_(t_half_storage) {
  t_half_storage = enabled;
}
HalfStorageScope::~HalfStorageScope() { t_half_storage = prev_; }

bool half_storage_enabled() { return t_half_storage; }

}  // namespace vidbrain::nn
