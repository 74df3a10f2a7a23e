// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "vidbrain/prior/prior.hpp"
#include "vidbrain/synth/video.hpp"
#include "vidbrain/trainer/trainer.hpp"
#include "vidbrain/vqvae/vqvae.hpp"
#include "vidbrain/vqvae/window_cache.hpp"

namespace vidbrain::trainer {

using vqvae::WindowCache;

/// Stage 1 over the listed stream windows.
TrainResult train_vqvae(vqvae::Vqvae& model, const synth::FrameStream& stream, const std::vector<std::size_t>& windows,
                        const TrainOptions& options, const EpochHook& on_epoch = {});

/// One stage-2 training pair: predict the codes of cache entry `target`
/// with the encoder hidden of entry `context`.
struct PriorSample {
  std::size_t context = 0;
  std::size_t target = 0;
};

/// Pairs of adjacent cache entries that hold adjacent stream windows.
std::vector<PriorSample> consecutive_samples(const WindowCache& cache);

/// Stage 2 over the listed samples. The null context gets no gradient here
/// since every sample has a context window.
TrainResult train_prior(prior::Prior& model, const WindowCache& cache, const std::vector<PriorSample>& samples,
                        const TrainOptions& options, const EpochHook& on_epoch = {});

/// Trainable prior parameters (everything but the null context).
nn::ParamList prior_trainable(const prior::Prior& model);

}  // namespace vidbrain::trainer
