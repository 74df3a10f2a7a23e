// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vidbrain/io/checkpoint.hpp"
#include "vidbrain/nn/layers.hpp"

namespace vidbrain::prior {

struct PriorConfig {
  std::size_t hidden_dim = 48;
  std::size_t heads = 2;
  std::size_t layers = 4;
  double dropout = 0.2;
  double attn_dropout = 0.3;
  std::size_t n_codes = 256;        // from the VQ-VAE
  std::size_t embedding_dim = 64;   // VQ-VAE code width
  std::size_t context_dim = 60;     // VQ-VAE encoder hidden width
  nn::Triple grid{4, 8, 8};

  static PriorConfig desk();
  static PriorConfig paper();
  /// Throws std::invalid_argument naming the violated constraint.
  void validate() const;
  std::size_t positions() const { return grid[0] * grid[1] * grid[2]; }

  nlohmann::json to_json() const;
  static PriorConfig from_json(const nlohmann::json& j);
};

/// "attn_stack.attn_nets.{k}.post_fc_dp" for block k.
std::string post_fc_tap(std::size_t block);
/// Block min(4, layers - 1): block 4 for deep models, otherwise the last block.
std::string default_tap(std::size_t layers);

struct TapInfo {
  std::string name;
  nn::Shape shape;
};

struct AttentionBlock {
  nn::LayerNorm pre_attn_norm, pre_enc_norm, pre_fc_norm;
  nn::AxialAttention attn;
  nn::MultiHeadAttention enc_attn;
  nn::Linear fc0, fc2;
};

enum class Mode { kTrain, kInfer };

class Prior {
 public:
  /// `code_table` is the frozen VQ-VAE codebook [n_codes, embedding_dim].
  static Prior init(const PriorConfig& cfg, std::span<const double> code_table, std::uint64_t seed);

  const PriorConfig& config() const { return cfg_; }

  /// Logits [T', H', W', n_codes] for a code grid in raster order. `context`
  /// is the previous window's encoder hidden [T', H', W', context_dim]; null
  /// selects the learned null context. In kTrain mode dropout uses `rng`.
  /// Throws std::out_of_range for a code outside [0, n_codes).
  nn::Tensor forward_logits(std::span<const std::int32_t> codes, const nn::Tensor* context, Mode mode,
                            nn::Rng* rng = nullptr, const nn::TapFn* tap = nullptr) const;

  /// Eq 7 training loss for one sample (dropout active).
  nn::Tensor loss(std::span<const std::int32_t> codes, const nn::Tensor* context, nn::Rng& rng) const;

  /// Inference-mode activation at a registered site, with a leading batch
  /// axis of 1. Runs only the blocks the site needs. Throws
  /// std::invalid_argument for an unknown name.
  nn::Tensor tap_activation(std::string_view name, std::span<const std::int32_t> codes,
                            const nn::Tensor* context) const;

  /// Every tappable site and its declared shape.
  std::vector<TapInfo> registry() const;
  std::string registry_dump() const;

  nn::ParamList parameters() const;
  std::size_t parameter_count() const { return nn::count_parameters(parameters()); }

  io::Checkpoint to_checkpoint(const std::string& vqvae_hash) const;
  static Prior from_checkpoint(const io::Checkpoint& ckpt);

 private:
  nn::Tensor run(std::span<const std::int32_t> codes, const nn::Tensor* context, Mode mode, nn::Rng* rng,
                 const nn::TapFn* tap, std::optional<std::size_t> last_block) const;

  PriorConfig cfg_;
  nn::Tensor code_table_;  // frozen
  nn::Linear fc_in_;
  nn::Tensor start_;
  nn::AxialPositionEmbedding pos_;
  nn::Tensor null_context_;
  std::vector<AttentionBlock> blocks_;
  nn::LayerNorm norm_;
  nn::Linear fc_out_;
};

}  // namespace vidbrain::prior
