// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vidbrain/prior/prior.hpp"

namespace vidbrain::prior {

/// One draw from softmax(logits / temperature). Throws
/// std::invalid_argument unless temperature > 0.
std::int32_t sample_categorical(std::span<const double> logits, double temperature, nn::Rng& rng);

/// Raster-order autoregressive completion of `prefix` (the first
/// prefix.size() positions are kept) to a full code grid.
std::vector<std::int32_t> sample(const Prior& model, std::span<const std::int32_t> prefix, double temperature,
                                 nn::Rng& rng, const nn::Tensor* context = nullptr);

}  // namespace vidbrain::prior
