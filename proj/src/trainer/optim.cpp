// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/trainer/optim.hpp"

#include <cmath>
#include <numbers>

namespace vidbrain::trainer {

double cosine_lr(std::size_t t, double eta_max, double eta_min, std::size_t t_max) {
  if (t_max == 0) throw std::invalid_argument("cosine_lr: T_max must be positive");
  if (t > t_max) throw std::invalid_argument("cosine_lr: t exceeds T_max");
  const double c = std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(t_max));
  return eta_min + (eta_max - eta_min) * (1.0 + c) / 2.0;
}

OptimState make_optim_state(std::span<const std::size_t> sizes) {
  OptimState s;
  for (std::size_t n : sizes) {
    s.m.emplace_back(n, 0.0);
    s.v.emplace_back(n, 0.0);
  }
  return s;
}

void adam_step(std::vector<std::span<double>> params, const std::vector<std::span<const double>>& grads,
               OptimState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter, gradient and state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || params[i].size() != state.m[i].size())
      throw std::invalid_argument("adam_step: size mismatch in block " + std::to_string(i));
    for (double g : grads[i])
      if (!std::isfinite(g)) throw DivergenceError("adam_step: non-finite gradient in block " + std::to_string(i));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t), c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double g = grads[i][j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      params[i][j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.eps);
    }
  }
}

}  // namespace vidbrain::trainer
