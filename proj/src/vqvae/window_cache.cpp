// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/vqvae/window_cache.hpp"

#include <stdexcept>

namespace vidbrain::vqvae {

nn::Tensor WindowCache::context(std::size_t i) const {
  const auto& h = hidden.at(i);
  return nn::Tensor::from({grid[0], grid[1], grid[2], context_dim}, std::vector<double>(h.begin(), h.end()));
}

WindowCache encode_windows(const Vqvae& model, const synth::FrameStream& stream,
                           const std::vector<std::size_t>& windows) {
  WindowCache c;
  c.grid = model.config().latent_grid();
  c.context_dim = model.config().n_hiddens;
  nn::NoGradGuard guard;
  for (std::size_t w : windows) {
    if (w >= stream.n_windows())
      throw std::invalid_argument("encode_windows: stream has " + std::to_string(stream.n_windows()) + " windows");
    const Encoded e = model.encode(stream.window(w));
    c.windows.push_back(w);
    c.codes.push_back(quantize(e.z_e.data(), model.codebook()).codes);
    c.hidden.emplace_back(e.hidden.data().begin(), e.hidden.data().end());
  }
  return c;
}

WindowCache encode_windows(const Vqvae& model, const synth::FrameStream& stream, std::size_t first,
                           std::size_t count) {
  if (first + count > stream.n_windows())
    throw std::invalid_argument("encode_windows: stream has " + std::to_string(stream.n_windows()) + " windows");
  std::vector<std::size_t> windows(count);
  for (std::size_t i = 0; i < count; ++i) windows[i] = first + i;
  return encode_windows(model, stream, windows);
}

}  // namespace vidbrain::vqvae
