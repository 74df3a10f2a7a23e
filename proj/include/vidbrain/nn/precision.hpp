// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>

#include "vidbrain/nn/tensor.hpp"

namespace vidbrain::nn {

enum class PrecisionMode { kSingle, kMixedHalf };

std::string_view precision_name(PrecisionMode m);
PrecisionMode parse_precision(std::string_view s);

/// Numeric policy for a training run. "single" keeps every value at full
/// working precision; "mixed-half" stores weights, activations and
/// activation gradients on the binary16 grid (1 sign, 5 exponent, 10
/// mantissa bits) and scales the loss before the reverse pass.
struct PrecisionPolicy {
  PrecisionMode mode = PrecisionMode::kSingle;
  double loss_scale = 1.0;
  double backoff_factor = 0.5;
  double growth_factor = 2.0;
  int growth_interval = 2000;

  static PrecisionPolicy single();
  static PrecisionPolicy mixed_half(double initial_scale = 65536.0);

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
};

/// Largest finite binary16 value.
inline constexpr double kHalfMax = 65504.0;

double round_half(double x);
void round_half_inplace(std::span<double> xs);
/// Returns true if any element is non-finite after rounding.
bool round_half_overflowed(std::span<const double> xs);

/// Elementwise rounding to the binary16 grid. Overflow produces +/-inf,
/// which callers detect with has_nonfinite().
Tensor round_half(const Tensor& x);

bool has_nonfinite(std::span<const double> xs);

/// While alive, every op result on this thread is rounded to binary16 and
/// its gradient is rounded during the reverse pass.
class HalfStorageScope {
 public:
  explicit HalfStorageScope(bool enabled = true);
  ~HalfStorageScope();
  HalfStorageScope(const HalfStorageScope&) = delete;
  HalfStorageScope& operator=(const HalfStorageScope&) = delete;

 private:
  bool prev_;
};

bool half_storage_enabled();

}  // namespace vidbrain::nn
