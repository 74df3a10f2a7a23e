// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include "vidbrain/encoding/alignment.hpp"
#include "vidbrain/prior/prior.hpp"
#include "vidbrain/synth/video.hpp"
#include "vidbrain/vqvae/window_cache.hpp"

namespace vidbrain::encoding {

enum class Reducer { kPool, kFlatten };

std::string_view reducer_name(Reducer r);
/// "pool" or "flatten"; throws std::invalid_argument otherwise.
Reducer parse_reducer(std::string_view s);

/// Collapses a tap activation [1, T, H, W, C] (or [1, heads, T, H, W, d])
/// to one vector: the mean over grid positions per channel, or everything
/// in memory order.
std::vector<double> reduce(const nn::Tensor& activation, Reducer r);

/// One vector per cached window. Window i is conditioned on window i - 1
/// of the cache; the first window uses the null context.
FeatureSequence extract_features(const prior::Prior& model, const vqvae::WindowCache& cache,
                                 const synth::FrameStream& stream, std::string_view tap, Reducer reducer);

/// Encodes every complete window of `stream` first.
FeatureSequence extract_features(const prior::Prior& model, const vqvae::Vqvae& vq, const synth::FrameStream& stream,
                                 std::string_view tap, Reducer reducer);

}  // namespace vidbrain::encoding
