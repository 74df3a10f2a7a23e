// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vidbrain::trainer {

/// Raised when training produces a non-finite value that cannot be skipped.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Eq 2: eta_min + (eta_max - eta_min) * (1 + cos(pi * t / t_max)) / 2.
/// Throws std::invalid_argument for t_max = 0 or t > t_max.
double cosine_lr(std::size_t t, double eta_max, double eta_min, std::size_t t_max);

struct OptimState {
  std::vector<std::vector<double>> m, v;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Zero moments shaped like `sizes`.
OptimState make_optim_state(std::span<const std::size_t> sizes);

/// One bias-corrected Adam update of every parameter block in place.
/// Throws std::invalid_argument on a size mismatch and DivergenceError on a
/// non-finite gradient (nothing is modified in that case).
void adam_step(std::vector<std::span<double>> params, const std::vector<std::span<const double>>& grads,
               OptimState& state, double lr);

}  // namespace vidbrain::trainer
