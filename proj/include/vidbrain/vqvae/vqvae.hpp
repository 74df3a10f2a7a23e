// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vidbrain/io/checkpoint.hpp"
#include "vidbrain/nn/layers.hpp"
#include "vidbrain/vqvae/codebook.hpp"

namespace vidbrain::vqvae {

struct VqvaeConfig {
  std::size_t frame_size = 32;
  std::size_t channels = 3;
  std::size_t clip_frames = 16;
  std::size_t embedding_dim = 64;
  std::size_t n_codes = 256;
  std::size_t n_hiddens = 60;
  std::size_t n_res_layers = 2;
  std::size_t heads = 2;
  nn::Triple downsample{4, 4, 4};
  double beta = 0.25;
  double ema_decay = 0.99;

  static VqvaeConfig desk();
  static VqvaeConfig paper();
  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
  nn::Triple latent_grid() const;
  nn::Shape clip_shape() const { return {clip_frames, frame_size, frame_size, channels}; }

  nlohmann::json to_json() const;
  static VqvaeConfig from_json(const nlohmann::json& j);
};

struct VqvaeLoss {
  nn::Tensor total;
  nn::Tensor recon;
  nn::Tensor commit;
  double codebook = 0.0;  // ||sg(z_e) - z_q||^2 mean; metric only
};

/// recon = mean (x - x_hat)^2, commit = beta * mean (sg(z_q) - z_e)^2,
/// total = recon + commit. Throws std::invalid_argument when beta <= 0.
VqvaeLoss vqvae_loss(const nn::Tensor& x, const nn::Tensor& x_hat, const nn::Tensor& z_e,
                     const nn::Tensor& z_q, double beta);

struct ResidualBlock {
  nn::LayerNorm norm0, norm1, norm2;
  nn::Conv3d conv0, conv1;
  nn::AxialAttention attn;
};

struct Encoded {
  nn::Tensor hidden;  // [T', H', W', n_hiddens], before the pre-quantization projection
  nn::Tensor z_e;     // [T', H', W', embedding_dim]
};

struct BatchOutput {
  nn::Tensor loss;  // mean of per-clip totals
  double recon = 0.0;
  double commit = 0.0;
  double codebook = 0.0;
  std::vector<std::int32_t> codes;
};

class Vqvae {
 public:
  static Vqvae init(const VqvaeConfig& cfg, std::uint64_t seed);

  const VqvaeConfig& config() const { return cfg_; }
  const CodebookState& codebook() const { return book_; }
  CodebookState& codebook() { return book_; }

  /// clip [T, H, W, C] with values in [0, 1].
  Encoded encode(const nn::Tensor& clip) const;
  nn::Tensor decode_latents(const nn::Tensor& z) const;
  /// Codebook lookup to [T', H', W', embedding_dim]; no gradient.
  nn::Tensor lookup(std::span<const std::int32_t> codes) const;
  nn::Tensor decode(std::span<const std::int32_t> codes) const { return decode_latents(lookup(codes)); }
  /// Inference helper: codes of a clip.
  std::vector<std::int32_t> codes_for(const nn::Tensor& clip) const;

  /// Training forward over a batch of clips. Initializes the codebook from
  /// the first batch, then applies one EMA update with this batch.
  BatchOutput train_batch(const std::vector<nn::Tensor>& clips, nn::Rng& rng);

  nn::ParamList parameters() const;
  std::size_t parameter_count() const { return nn::count_parameters(parameters()); }

  io::Checkpoint to_checkpoint() const;
  static Vqvae from_checkpoint(const io::Checkpoint& ckpt);

 private:
  nn::Tensor res_stack(const nn::Tensor& x, const std::vector<ResidualBlock>& blocks,
                       const nn::LayerNorm& norm) const;

  VqvaeConfig cfg_;
  std::vector<nn::Conv3d> enc_convs_;
  nn::Conv3d enc_conv_last_;
  std::vector<ResidualBlock> enc_blocks_;
  nn::LayerNorm enc_norm_;
  nn::Conv3d pre_vq_conv_;
  nn::Conv3d post_vq_conv_;
  std::vector<ResidualBlock> dec_blocks_;
  nn::LayerNorm dec_norm_;
  std::vector<nn::ConvTranspose3d> dec_convts_;
  nn::AxialPositionEmbedding pos_;
  CodebookState book_;
};

/// Copies named arrays into matching parameters; throws std::runtime_error
/// on a missing name or a shape mismatch.
void load_parameters(const nn::ParamList& params, const io::Checkpoint& ckpt);
void store_parameters(const nn::ParamList& params, io::Checkpoint& ckpt);

}  // namespace vidbrain::vqvae
