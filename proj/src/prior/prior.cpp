// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/prior/prior.hpp"

#include <array>
#include <sstream>
#include <stdexcept>

#include "vidbrain/vqvae/vqvae.hpp"

namespace vidbrain::prior {

using nn::Shape;
using nn::Tensor;

PriorConfig PriorConfig::desk() { return PriorConfig{}; }

PriorConfig PriorConfig::paper() {
  PriorConfig c;
  c.hidden_dim = 576;
  c.heads = 4;
  c.layers = 8;
  c.n_codes = 2048;
  c.embedding_dim = 256;
  c.context_dim = 240;
  return c;
}

void PriorConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("prior config: " + m); };
  if (hidden_dim % 3 != 0 || hidden_dim <= 3)
    fail("hidden_dim must be a multiple of 3 and greater than 3 (got " + std::to_string(hidden_dim) + ")");
  if (heads == 0 || hidden_dim % heads != 0)
    fail("heads (" + std::to_string(heads) + ") must divide hidden_dim (" + std::to_string(hidden_dim) + ")");
  if (context_dim == 0 || context_dim % heads != 0)
    fail("heads (" + std::to_string(heads) + ") must divide the context width (" + std::to_string(context_dim) + ")");
  if (layers == 0) fail("layers must be >= 1");
  if (!(dropout >= 0 && dropout < 1) || !(attn_dropout >= 0 && attn_dropout < 1))
    fail("dropout rates must be in [0, 1)");
  if (n_codes == 0 || embedding_dim == 0) fail("n_codes and embedding_dim must be positive");
  if (grid[0] == 0 || grid[1] == 0 || grid[2] == 0) fail("grid extents must be positive");
}

nlohmann::json PriorConfig::to_json() const {
  return {{"hidden_dim", hidden_dim},     {"heads", heads},       {"layers", layers},
          {"dropout", dropout},           {"attn_dropout", attn_dropout}, {"n_codes", n_codes},
          {"embedding_dim", embedding_dim}, {"context_dim", context_dim}, {"grid", grid}};
}

PriorConfig PriorConfig::from_json(const nlohmann::json& j) {
  PriorConfig c;
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.heads = j.value("heads", c.heads);
  c.layers = j.value("layers", c.layers);
  c.dropout = j.value("dropout", c.dropout);
  c.attn_dropout = j.value("attn_dropout", c.attn_dropout);
  c.n_codes = j.value("n_codes", c.n_codes);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.context_dim = j.value("context_dim", c.context_dim);
  c.grid = j.value("grid", c.grid);
  return c;
}

std::string post_fc_tap(std::size_t block) {
  return "attn_stack.attn_nets." + std::to_string(block) + ".post_fc_dp";
}

std::string default_tap(std::size_t layers) {
  if (layers == 0) throw std::invalid_argument("default_tap: layers must be >= 1");
  return post_fc_tap(std::min<std::size_t>(4, layers - 1));
}

namespace {

std::string block_prefix(std::size_t k) { return "attn_stack.attn_nets." + std::to_string(k) + "."; }

// [T, H, W, C] -> [1, heads, T, H, W, C / heads]
Tensor split_heads(const Tensor& t, std::size_t heads) {
  const Shape& s = t.shape();
  const std::size_t dh = s[3] / heads, L = s[0] * s[1] * s[2];
  const std::array<std::size_t, 3> order{1, 0, 2};
  return nn::reshape(nn::permute(nn::reshape(t, {L, heads, dh}), order), {1, heads, s[0], s[1], s[2], dh});
}

Tensor with_batch(const Tensor& t) {
  Shape s{1};
  s.insert(s.end(), t.shape().begin(), t.shape().end());
  return nn::reshape(t, std::move(s));
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

Prior Prior::init(const PriorConfig& cfg, std::span<const double> code_table, std::uint64_t seed) {
  cfg.validate();
  if (code_table.size() != cfg.n_codes * cfg.embedding_dim)
    throw std::invalid_argument("prior: code table size does not match n_codes x embedding_dim");
  nn::Rng rng(seed);
  Prior p;
  p.cfg_ = cfg;
  const std::size_t h = cfg.hidden_dim;
  p.code_table_ = Tensor::from({cfg.n_codes, cfg.embedding_dim}, {code_table.begin(), code_table.end()});
  p.fc_in_ = nn::Linear::init(cfg.embedding_dim, h, rng);
  p.start_ = nn::normal_param({h}, 0.02, rng);
  p.pos_ = nn::AxialPositionEmbedding::init(cfg.grid, h, rng);
  p.null_context_ = nn::normal_param({cfg.grid[0], cfg.grid[1], cfg.grid[2], cfg.context_dim}, 0.02, rng);
  for (std::size_t k = 0; k < cfg.layers; ++k) {
    AttentionBlock b;
    b.pre_attn_norm = nn::LayerNorm::init(h);
    b.attn = nn::AxialAttention::init(h, cfg.heads, rng);
    b.pre_enc_norm = nn::LayerNorm::init(h);
    b.enc_attn = nn::MultiHeadAttention::init(h, cfg.context_dim, cfg.heads, rng);
    b.pre_fc_norm = nn::LayerNorm::init(h);
    b.fc0 = nn::Linear::init(h, 4 * h, rng);
    b.fc2 = nn::Linear::init(4 * h, h, rng);
    p.blocks_.push_back(std::move(b));
  }
  p.norm_ = nn::LayerNorm::init(h);
  p.fc_out_ = {Tensor::zeros({h, cfg.n_codes}, true), Tensor::zeros({cfg.n_codes}, true)};
  return p;
}

Tensor Prior::run(std::span<const std::int32_t> codes, const Tensor* context, Mode mode, nn::Rng* rng,
                  const nn::TapFn* tap, std::optional<std::size_t> last_block) const {
  const auto& g = cfg_.grid;
  if (codes.size() != cfg_.positions())
    throw std::invalid_argument("prior: expected " + std::to_string(cfg_.positions()) + " codes, got " +
                                std::to_string(codes.size()));
  for (std::int32_t c : codes)
    if (c < 0 || static_cast<std::size_t>(c) >= cfg_.n_codes)
      throw std::out_of_range("prior: code " + std::to_string(c) + " outside [0, " + std::to_string(cfg_.n_codes) + ")");
  const bool train = mode == Mode::kTrain;
  if (train && !rng) throw std::invalid_argument("prior: training mode needs an rng");
  const Tensor& ctx = context ? *context : null_context_;
  const Shape ctx_shape{g[0], g[1], g[2], cfg_.context_dim};
  if (ctx.shape() != ctx_shape)
    throw std::invalid_argument("prior: context shape " + nn::shape_str(ctx.shape()) + ", expected " +
                                nn::shape_str(ctx_shape));

  Tensor x = nn::reshape(nn::embedding(code_table_, codes), {g[0], g[1], g[2], cfg_.embedding_dim});
  Tensor h = pos_(nn::raster_shift(fc_in_(x), start_));

  auto drop = [&](const Tensor& t, double p) { return train ? nn::dropout(t, p, *rng) : t; };
  const nn::AttentionOptions self_opt{
      .heads = cfg_.heads, .causal = true, .dropout = train ? cfg_.attn_dropout : 0.0, .rng = rng};
  const nn::AttentionOptions cross_opt{
      .heads = cfg_.heads, .causal = false, .dropout = train ? cfg_.attn_dropout : 0.0, .rng = rng};

  const std::size_t n_blocks = last_block ? *last_block + 1 : blocks_.size();
  for (std::size_t k = 0; k < n_blocks; ++k) {
    const AttentionBlock& b = blocks_[k];
    const std::string prefix = block_prefix(k);
    auto site = [&](std::string_view name, const Tensor& t) {
      if (!tap) return;
      const std::string full = prefix + std::string(name);
      (*tap)(full, ends_with(name, "attn.attn") ? split_heads(t, cfg_.heads) : with_batch(t));
    };
    const nn::TapFn inner = site;
    const nn::TapFn* inner_ptr = tap ? &inner : nullptr;

    Tensor a = b.pre_attn_norm(h);
    site("pre_attn_norm", a);
    Tensor d = drop(b.attn(a, self_opt, inner_ptr, "attn."), cfg_.dropout);
    site("post_attn_dp", d);
    h = nn::add(h, d);

    Tensor e = b.pre_enc_norm(h);
    site("pre_enc_norm", e);
    d = drop(b.enc_attn(e, ctx, cross_opt, inner_ptr, "enc_attn."), cfg_.dropout);
    site("post_enc_dp", d);
    h = nn::add(h, d);

    Tensor f = b.pre_fc_norm(h);
    site("pre_fc_norm", f);
    Tensor f0 = b.fc0(f);
    site("fc_block.0", f0);
    Tensor f1 = nn::gelu(f0);
    site("fc_block.1", f1);
    Tensor f2 = b.fc2(f1);
    site("fc_block.2", f2);
    site("fc_block", f2);
    d = drop(f2, cfg_.dropout);
    site("post_fc_dp", d);
    h = nn::add(h, d);
  }
  if (last_block) return h;
  return fc_out_(norm_(h));
}

Tensor Prior::forward_logits(std::span<const std::int32_t> codes, const Tensor* context, Mode mode, nn::Rng* rng,
                             const nn::TapFn* tap) const {
  return run(codes, context, mode, rng, tap, std::nullopt);
}

Tensor Prior::loss(std::span<const std::int32_t> codes, const Tensor* context, nn::Rng& rng) const {
  Tensor logits = forward_logits(codes, context, Mode::kTrain, &rng);
  return nn::cross_entropy(nn::reshape(logits, {cfg_.positions(), cfg_.n_codes}), codes);
}

std::vector<TapInfo> Prior::registry() const {
  const auto& g = cfg_.grid;
  const std::size_t h = cfg_.hidden_dim, c = cfg_.context_dim, H = cfg_.heads;
  auto grid_shape = [&](std::size_t w) { return Shape{1, g[0], g[1], g[2], w}; };
  std::vector<TapInfo> out;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const std::string p = block_prefix(k);
    out.push_back({p + "pre_attn_norm", grid_shape(h)});
    out.push_back({p + "post_attn_dp", grid_shape(h)});
    out.push_back({p + "attn.w_qs", grid_shape(h)});
    out.push_back({p + "attn.w_ks", grid_shape(h)});
    out.push_back({p + "attn.w_vs", grid_shape(h)});
    out.push_back({p + "attn.fc", grid_shape(h)});
    out.push_back({p + "attn.attn", {1, H, g[0], g[1], g[2], h / H}});
    out.push_back({p + "pre_enc_norm", grid_shape(h)});
    out.push_back({p + "post_enc_dp", grid_shape(h)});
    out.push_back({p + "enc_attn.w_qs", grid_shape(h)});
    out.push_back({p + "enc_attn.w_ks", grid_shape(h)});
    out.push_back({p + "enc_attn.w_vs", grid_shape(c)});
    out.push_back({p + "enc_attn.fc", grid_shape(h)});
    out.push_back({p + "enc_attn.attn", {1, H, g[0], g[1], g[2], c / H}});
    out.push_back({p + "pre_fc_norm", grid_shape(h)});
    out.push_back({p + "post_fc_dp", grid_shape(h)});
    out.push_back({p + "fc_block", grid_shape(h)});
    out.push_back({p + "fc_block.0", grid_shape(4 * h)});
    out.push_back({p + "fc_block.1", grid_shape(4 * h)});
    out.push_back({p + "fc_block.2", grid_shape(h)});
  }
  return out;
}

std::string Prior::registry_dump() const {
  std::ostringstream out;
  for (const auto& t : registry()) out << t.name << "\t" << nn::shape_str(t.shape) << "\n";
  return out.str();
}

Tensor Prior::tap_activation(std::string_view name, std::span<const std::int32_t> codes, const Tensor* context) const {
  std::optional<std::size_t> block;
  for (const auto& t : registry())
    if (t.name == name) block = std::stoul(t.name.substr(std::string("attn_stack.attn_nets.").size()));
  if (!block)
    throw std::invalid_argument("unknown tap '" + std::string(name) + "' (model has " + std::to_string(cfg_.layers) +
                                " blocks)");
  nn::NoGradGuard guard;
  Tensor captured;
  const nn::TapFn grab = [&](std::string_view n, const Tensor& t) {
    if (n == name) captured = t;
  };
  run(codes, context, Mode::kInfer, nullptr, &grab, block);
  return captured;
}

nn::ParamList Prior::parameters() const {
  nn::ParamList p;
  fc_in_.collect(p, "fc_in");
  p.emplace_back("attn_stack.right_shift.sos", start_);
  pos_.collect(p, "attn_stack.pos_embd");
  p.emplace_back("null_context", null_context_);
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const std::string pre = "attn_stack.attn_nets." + std::to_string(k);
    const AttentionBlock& b = blocks_[k];
    b.pre_attn_norm.collect(p, pre + ".pre_attn_norm");
    b.attn.collect(p, pre + ".attn");
    b.pre_enc_norm.collect(p, pre + ".pre_enc_norm");
    b.enc_attn.collect(p, pre + ".enc_attn");
    b.pre_fc_norm.collect(p, pre + ".pre_fc_norm");
    b.fc0.collect(p, pre + ".fc_block.0");
    b.fc2.collect(p, pre + ".fc_block.2");
  }
  norm_.collect(p, "norm");
  fc_out_.collect(p, "fc_out");
  return p;
}

io::Checkpoint Prior::to_checkpoint(const std::string& vqvae_hash) const {
  io::Checkpoint c;
  c.stage = "prior";
  c.config_json = cfg_.to_json().dump();
  c.parent_hash = vqvae_hash;
  vqvae::store_parameters(parameters(), c);
  c.arrays.push_back({"vqvae.codebook.embeddings", code_table_.shape(), code_table_.to_vector()});
  return c;
}

Prior Prior::from_checkpoint(const io::Checkpoint& ckpt) {
  if (ckpt.stage != "prior") throw std::runtime_error("checkpoint stage is '" + ckpt.stage + "', expected prior");
  const PriorConfig cfg = PriorConfig::from_json(nlohmann::json::parse(ckpt.config_json));
  Prior p = init(cfg, ckpt.get("vqvae.codebook.embeddings").values, 0);
  vqvae::load_parameters(p.parameters(), ckpt);
  return p;
}

}  // namespace vidbrain::prior
