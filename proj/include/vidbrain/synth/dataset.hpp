// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "vidbrain/synth/video.hpp"

namespace vidbrain::synth {

/// Training pool cut from one continuous stream: sample i pairs context
/// window i with target window i + 1.
struct ClipPool {
  FrameStream stream;
  std::size_t size() const { return stream.n_windows() ? stream.n_windows() - 1 : 0; }
  std::size_t context_window(std::size_t i) const { return i; }
  std::size_t target_window(std::size_t i) const { return i + 1; }
};

ClipPool make_pool(const SynthSceneSpec& spec, std::size_t n_samples);

/// Seeded uniform sample of n indices from [0, dataset_size) without
/// replacement: the first n entries of one seeded permutation, returned in
/// ascending order. Samples for the same seed are nested in n. Throws
/// std::invalid_argument when n > dataset_size.
std::vector<std::size_t> subsample(std::size_t dataset_size, std::size_t n, std::uint64_t seed);

}  // namespace vidbrain::synth
