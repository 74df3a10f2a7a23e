// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/synth/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace vidbrain::synth {

ClipPool make_pool(const SynthSceneSpec& spec, std::size_t n_samples) {
  if (n_samples == 0) throw std::invalid_argument("make_pool: n_samples must be > 0");
  return {gen_video(spec, (n_samples + 1) * kWindowFrames)};
}

std::vector<std::size_t> subsample(std::size_t dataset_size, std::size_t n, std::uint64_t seed) {
  if (n > dataset_size)
    throw std::invalid_argument("subsample: requested " + std::to_string(n) + " of " + std::to_string(dataset_size) +
                                " samples");
  std::vector<std::size_t> perm(dataset_size);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  perm.resize(n);
  std::sort(perm.begin(), perm.end());
  return perm;
}

}  // namespace vidbrain::synth
