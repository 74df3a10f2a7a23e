// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/vqvae/vqvae.hpp"

#include <bit>
#include <stdexcept>

namespace vidbrain::vqvae {

using nn::Tensor;
using nn::Triple;

VqvaeConfig VqvaeConfig::desk() { return VqvaeConfig{}; }

VqvaeConfig VqvaeConfig::paper() {
  VqvaeConfig c;
  c.embedding_dim = 256;
  c.n_codes = 2048;
  c.n_hiddens = 240;
  c.n_res_layers = 4;
  c.heads = 2;
  return c;
}

void VqvaeConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("vqvae config: " + m); };
  for (std::size_t d : downsample)
    if (d == 0 || !std::has_single_bit(d)) fail("downsample components must be powers of two");
  if (!(beta > 0)) fail("beta must be > 0");
  if (!(ema_decay > 0 && ema_decay < 1)) fail("ema_decay must be in (0, 1)");
  if (embedding_dim == 0 || n_codes == 0 || channels == 0) fail("sizes must be positive");
  if (n_hiddens < 6 || n_hiddens % 6 != 0) fail("n_hiddens must be a positive multiple of 6");
  if (heads == 0 || n_hiddens % heads != 0) fail("heads must divide n_hiddens");
  if (clip_frames % downsample[0] != 0 || frame_size % downsample[1] != 0 || frame_size % downsample[2] != 0)
    fail("clip shape must be divisible by downsample");
}

Triple VqvaeConfig::latent_grid() const {
  return {clip_frames / downsample[0], frame_size / downsample[1], frame_size / downsample[2]};
}

nlohmann::json VqvaeConfig::to_json() const {
  return {{"frame_size", frame_size},       {"channels", channels},   {"clip_frames", clip_frames},
          {"embedding_dim", embedding_dim}, {"n_codes", n_codes},     {"n_hiddens", n_hiddens},
          {"n_res_layers", n_res_layers},   {"heads", heads},         {"downsample", downsample},
          {"beta", beta},                   {"ema_decay", ema_decay}};
}

VqvaeConfig VqvaeConfig::from_json(const nlohmann::json& j) {
  VqvaeConfig c;
  c.frame_size = j.value("frame_size", c.frame_size);
  c.channels = j.value("channels", c.channels);
  c.clip_frames = j.value("clip_frames", c.clip_frames);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.n_codes = j.value("n_codes", c.n_codes);
  c.n_hiddens = j.value("n_hiddens", c.n_hiddens);
  c.n_res_layers = j.value("n_res_layers", c.n_res_layers);
  c.heads = j.value("heads", c.heads);
  c.downsample = j.value("downsample", c.downsample);
  c.beta = j.value("beta", c.beta);
  c.ema_decay = j.value("ema_decay", c.ema_decay);
  return c;
}

VqvaeLoss vqvae_loss(const Tensor& x, const Tensor& x_hat, const Tensor& z_e, const Tensor& z_q, double beta) {
  if (!(beta > 0)) throw std::invalid_argument("vqvae_loss: beta must be > 0");
  VqvaeLoss l;
  l.recon = nn::mse(x_hat, x);
  l.commit = nn::scale(nn::mse(z_e, nn::stop_gradient(z_q)), beta);
  l.total = nn::add(l.recon, l.commit);
  double cb = 0.0;
  for (std::size_t i = 0; i < z_e.numel(); ++i) {
    const double d = z_e.at(i) - z_q.at(i);
    cb += d * d;
  }
  l.codebook = z_e.numel() ? cb / static_cast<double>(z_e.numel()) : 0.0;
  return l;
}

namespace {

std::size_t log2_of(std::size_t v) { return static_cast<std::size_t>(std::countr_zero(v)); }

ResidualBlock make_block(std::size_t n, std::size_t heads, nn::Rng& rng) {
  ResidualBlock b;
  b.norm0 = nn::LayerNorm::init(n);
  b.conv0 = nn::Conv3d::init(n, n / 2, {3, 3, 3}, {1, 1, 1}, rng);
  b.norm1 = nn::LayerNorm::init(n / 2);
  b.conv1 = nn::Conv3d::init(n / 2, n, {1, 1, 1}, {1, 1, 1}, rng);
  b.norm2 = nn::LayerNorm::init(n);
  b.attn = nn::AxialAttention::init(n, heads, rng);
  return b;
}

void collect_block(const ResidualBlock& b, nn::ParamList& out, const std::string& p) {
  b.norm0.collect(out, p + ".block.0");
  b.conv0.collect(out, p + ".block.2.conv");
  b.norm1.collect(out, p + ".block.3");
  b.conv1.collect(out, p + ".block.5.conv");
  b.norm2.collect(out, p + ".block.6");
  b.attn.collect(out, p + ".block.8.attn");
}

}  // namespace

Vqvae Vqvae::init(const VqvaeConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  nn::Rng rng(seed);
  Vqvae m;
  m.cfg_ = cfg;
  const std::size_t n = cfg.n_hiddens;
  Triple steps{log2_of(cfg.downsample[0]), log2_of(cfg.downsample[1]), log2_of(cfg.downsample[2])};
  const std::size_t rounds = std::max({steps[0], steps[1], steps[2]});
  Triple left = steps;
  for (std::size_t i = 0; i < rounds; ++i) {
    Triple stride{};
    for (int a = 0; a < 3; ++a) stride[a] = left[a] > 0 ? 2 : 1;
    m.enc_convs_.push_back(nn::Conv3d::init(i == 0 ? cfg.channels : n, n, {4, 4, 4}, stride, rng));
    for (int a = 0; a < 3; ++a)
      if (left[a] > 0) --left[a];
  }
  m.enc_conv_last_ = nn::Conv3d::init(n, n, {3, 3, 3}, {1, 1, 1}, rng);
  for (std::size_t i = 0; i < cfg.n_res_layers; ++i) m.enc_blocks_.push_back(make_block(n, cfg.heads, rng));
  m.enc_norm_ = nn::LayerNorm::init(n);
  m.pre_vq_conv_ = nn::Conv3d::init(n, cfg.embedding_dim, {1, 1, 1}, {1, 1, 1}, rng);
  m.post_vq_conv_ = nn::Conv3d::init(cfg.embedding_dim, n, {1, 1, 1}, {1, 1, 1}, rng);
  for (std::size_t i = 0; i < cfg.n_res_layers; ++i) m.dec_blocks_.push_back(make_block(n, cfg.heads, rng));
  m.dec_norm_ = nn::LayerNorm::init(n);
  left = steps;
  for (std::size_t i = 0; i < rounds; ++i) {
    Triple stride{};
    for (int a = 0; a < 3; ++a) stride[a] = left[a] > 0 ? 2 : 1;
    const std::size_t out = i + 1 == rounds ? cfg.channels : n;
    m.dec_convts_.push_back(nn::ConvTranspose3d::init(n, out, {4, 4, 4}, stride, rng));
    for (int a = 0; a < 3; ++a)
      if (left[a] > 0) --left[a];
  }
  m.pos_ = nn::AxialPositionEmbedding::init(cfg.latent_grid(), n, rng);
  m.book_ = CodebookState::empty(cfg.n_codes, cfg.embedding_dim);
  return m;
}

Tensor Vqvae::res_stack(const Tensor& x, const std::vector<ResidualBlock>& blocks, const nn::LayerNorm& norm) const {
  Tensor h = x;
  for (const auto& b : blocks) {
    Tensor r = b.conv0(nn::relu(b.norm0(h)));
    r = b.conv1(nn::relu(b.norm1(r)));
    r = pos_(nn::relu(b.norm2(r)));
    h = nn::add(h, b.attn(r, {}));
  }
  return nn::relu(norm(h));
}

Encoded Vqvae::encode(const Tensor& clip) const {
  if (clip.shape() != cfg_.clip_shape())
    throw std::invalid_argument("vqvae encode: clip shape " + nn::shape_str(clip.shape()) + " does not match " +
                                nn::shape_str(cfg_.clip_shape()));
  Tensor h = nn::add(clip, Tensor::full(clip.shape(), -0.5));
  for (const auto& c : enc_convs_) h = nn::relu(c(h));
  h = enc_conv_last_(h);
  Encoded e;
  e.hidden = res_stack(h, enc_blocks_, enc_norm_);
  e.z_e = pre_vq_conv_(e.hidden);
  return e;
}

Tensor Vqvae::decode_latents(const Tensor& z) const {
  const Triple g = cfg_.latent_grid();
  if (z.shape() != nn::Shape{g[0], g[1], g[2], cfg_.embedding_dim})
    throw std::invalid_argument("vqvae decode: latent shape " + nn::shape_str(z.shape()) + " does not match grid");
  Tensor h = res_stack(post_vq_conv_(z), dec_blocks_, dec_norm_);
  for (std::size_t i = 0; i < dec_convts_.size(); ++i) {
    h = dec_convts_[i](h);
    if (i + 1 < dec_convts_.size()) h = nn::relu(h);
  }
  return nn::add(h, Tensor::full(h.shape(), 0.5));
}

Tensor Vqvae::lookup(std::span<const std::int32_t> codes) const {
  const Triple g = cfg_.latent_grid();
  const std::size_t D = cfg_.embedding_dim;
  if (codes.size() != g[0] * g[1] * g[2]) throw std::invalid_argument("vqvae lookup: code grid size mismatch");
  std::vector<double> z(codes.size() * D);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] < 0 || static_cast<std::size_t>(codes[i]) >= cfg_.n_codes)
      throw std::out_of_range("vqvae lookup: code index out of range");
    std::copy_n(book_.embeddings.data() + static_cast<std::size_t>(codes[i]) * D, D, z.data() + i * D);
  }
  return Tensor::from({g[0], g[1], g[2], D}, std::move(z));
}

std::vector<std::int32_t> Vqvae::codes_for(const Tensor& clip) const {
  nn::NoGradGuard guard;
  return quantize(encode(clip).z_e.data(), book_).codes;
}

BatchOutput Vqvae::train_batch(const std::vector<Tensor>& clips, nn::Rng& rng) {
  if (clips.empty()) throw std::invalid_argument("vqvae train_batch: empty batch");
  std::vector<Tensor> z_es;
  std::vector<double> all_z;
  for (const auto& c : clips) {
    z_es.push_back(encode(c).z_e);
    all_z.insert(all_z.end(), z_es.back().data().begin(), z_es.back().data().end());
  }
  if (!book_.initialized) init_from_data(book_, all_z, rng);

  BatchOutput out;
  Tensor total;
  const double inv = 1.0 / static_cast<double>(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    Quantized q = quantize(z_es[i].data(), book_);
    Tensor z_q = Tensor::from(z_es[i].shape(), std::move(q.z_q));
    Tensor z_st = nn::add(z_es[i], nn::stop_gradient(nn::sub(z_q, z_es[i])));
    VqvaeLoss l = vqvae_loss(clips[i], decode_latents(z_st), z_es[i], z_q, cfg_.beta);
    total = total.defined() ? nn::add(total, l.total) : l.total;
    out.recon += l.recon.item() * inv;
    out.commit += l.commit.item() * inv;
    out.codebook += l.codebook * inv;
    out.codes.insert(out.codes.end(), q.codes.begin(), q.codes.end());
  }
  out.loss = nn::scale(total, inv);
  ema_update(book_, all_z, out.codes, rng, {.decay = cfg_.ema_decay});
  return out;
}

nn::ParamList Vqvae::parameters() const {
  nn::ParamList p;
  for (std::size_t i = 0; i < enc_convs_.size(); ++i)
    enc_convs_[i].collect(p, "encoder.convs." + std::to_string(i) + ".conv");
  enc_conv_last_.collect(p, "encoder.conv_last.conv");
  for (std::size_t i = 0; i < enc_blocks_.size(); ++i)
    collect_block(enc_blocks_[i], p, "encoder.res_stack." + std::to_string(i));
  enc_norm_.collect(p, "encoder.res_stack." + std::to_string(enc_blocks_.size()));
  pre_vq_conv_.collect(p, "pre_vq_conv.conv");
  post_vq_conv_.collect(p, "post_vq_conv.conv");
  for (std::size_t i = 0; i < dec_blocks_.size(); ++i)
    collect_block(dec_blocks_[i], p, "decoder.res_stack." + std::to_string(i));
  dec_norm_.collect(p, "decoder.res_stack." + std::to_string(dec_blocks_.size()));
  for (std::size_t i = 0; i < dec_convts_.size(); ++i)
    dec_convts_[i].collect(p, "decoder.convts." + std::to_string(i) + ".convt");
  pos_.collect(p, "pos_embd");
  return p;
}

void store_parameters(const nn::ParamList& params, io::Checkpoint& ckpt) {
  for (const auto& [name, t] : params) ckpt.arrays.push_back({name, t.shape(), t.to_vector()});
}

void load_parameters(const nn::ParamList& params, const io::Checkpoint& ckpt) {
  for (const auto& [name, t] : params) {
    const io::NamedArray& a = ckpt.get(name);
    if (a.shape != t.shape())
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': " + nn::shape_str(a.shape) +
                               " vs " + nn::shape_str(t.shape()));
    Tensor handle = t;
    std::copy(a.values.begin(), a.values.end(), handle.mutable_data().begin());
  }
}

io::Checkpoint Vqvae::to_checkpoint() const {
  io::Checkpoint c;
  c.stage = "vqvae";
  c.config_json = cfg_.to_json().dump();
  store_parameters(parameters(), c);
  const std::size_t K = book_.n_codes, D = book_.dim;
  c.arrays.push_back({"codebook.embeddings", {K, D}, book_.embeddings});
  c.arrays.push_back({"codebook.N", {K}, book_.N});
  c.arrays.push_back({"codebook.z_avg", {K, D}, book_.z_avg});
  c.arrays.push_back({"codebook.initialized", {1}, {book_.initialized ? 1.0 : 0.0}});
  return c;
}

Vqvae Vqvae::from_checkpoint(const io::Checkpoint& ckpt) {
  if (ckpt.stage != "vqvae") throw std::runtime_error("checkpoint stage is '" + ckpt.stage + "', expected vqvae");
  Vqvae m = init(VqvaeConfig::from_json(nlohmann::json::parse(ckpt.config_json)), 0);
  load_parameters(m.parameters(), ckpt);
  m.book_.embeddings = ckpt.get("codebook.embeddings").values;
  m.book_.N = ckpt.get("codebook.N").values;
  m.book_.z_avg = ckpt.get("codebook.z_avg").values;
  m.book_.initialized = ckpt.get("codebook.initialized").values.at(0) != 0.0;
  return m;
}

}  // namespace vidbrain::vqvae
