// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "vidbrain/synth/video.hpp"
#include "vidbrain/vqvae/vqvae.hpp"

namespace vidbrain::vqvae {

/// Frozen VQ-VAE outputs for a list of stream windows: codes and the
/// encoder hidden state (stored as float to halve the footprint).
struct WindowCache {
  nn::Triple grid{};
  std::size_t context_dim = 0;
  std::vector<std::size_t> windows;  // stream window index of each entry
  std::vector<std::vector<std::int32_t>> codes;
  std::vector<std::vector<float>> hidden;

  std::size_t size() const { return codes.size(); }
  /// Encoder hidden of cached entry i as [T', H', W', context_dim].
  nn::Tensor context(std::size_t i) const;
};

/// Encodes windows [first, first + count) of `stream`.
WindowCache encode_windows(const Vqvae& model, const synth::FrameStream& stream, std::size_t first,
                           std::size_t count);
/// Encodes the listed windows of `stream`, in the given order.
WindowCache encode_windows(const Vqvae& model, const synth::FrameStream& stream,
                           const std::vector<std::size_t>& windows);

}  // namespace vidbrain::vqvae
