// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "vidbrain/nn/tensor.hpp"

namespace vidbrain::testing {

// Worst relative error between reverse-mode gradients and central
// differences over every element of every leaf.
inline double max_fd_error(const std::function<nn::Tensor()>& loss_fn,
                           std::vector<nn::Tensor> leaves, double h = 1e-4) {
  const nn::Tensor loss = loss_fn();
  const std::vector<nn::Tensor> g = nn::grad(loss, leaves);
  double worst = 0.0;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto data = leaves[l].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = loss_fn().item();
      data[i] = saved - h;
      const double down = loss_fn().item();
      data[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = g[l].at(i);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return worst;
}

}  // namespace vidbrain::testing
