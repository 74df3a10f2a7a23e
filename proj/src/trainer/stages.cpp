// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/trainer/stages.hpp"

#include <stdexcept>

namespace vidbrain::trainer {

TrainResult train_vqvae(vqvae::Vqvae& model, const synth::FrameStream& stream, const std::vector<std::size_t>& windows,
                        const TrainOptions& options, const EpochHook& on_epoch) {
  Optimizer opt(model.parameters(), options.policy);
  const BatchLoss loss = [&](const std::vector<std::size_t>& batch, nn::Rng& rng) {
    std::vector<nn::Tensor> clips;
    for (std::size_t i : batch) clips.push_back(stream.window(windows[i]));
    return model.train_batch(clips, rng).loss;
  };
  return train(opt, windows.size(), options, loss, on_epoch);
}

nn::ParamList prior_trainable(const prior::Prior& model) {
  nn::ParamList out;
  for (const auto& p : model.parameters())
    if (p.first != "null_context") out.push_back(p);
  return out;
}

std::vector<PriorSample> consecutive_samples(const WindowCache& cache) {
  std::vector<PriorSample> out;
  for (std::size_t i = 0; i + 1 < cache.size(); ++i)
    if (cache.windows[i + 1] == cache.windows[i] + 1) out.push_back({i, i + 1});
  return out;
}

TrainResult train_prior(prior::Prior& model, const WindowCache& cache, const std::vector<PriorSample>& samples,
                        const TrainOptions& options, const EpochHook& on_epoch) {
  for (const auto& s : samples)
    if (s.context >= cache.size() || s.target >= cache.size())
      throw std::out_of_range("train_prior: sample refers past the window cache");
  Optimizer opt(prior_trainable(model), options.policy);
  const BatchLoss loss = [&](const std::vector<std::size_t>& batch, nn::Rng& rng) {
    nn::Tensor total;
    for (std::size_t i : batch) {
      const nn::Tensor ctx = cache.context(samples[i].context);
      const nn::Tensor l = model.loss(cache.codes[samples[i].target], &ctx, rng);
      total = total.defined() ? nn::add(total, l) : l;
    }
    return batch.size() == 1 ? total : nn::scale(total, 1.0 / static_cast<double>(batch.size()));
  };
  return train(opt, samples.size(), options, loss, on_epoch);
}

}  // namespace vidbrain::trainer
