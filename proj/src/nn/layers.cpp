// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace vidbrain::nn {

std::size_t count_parameters(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

Tensor normal_param(Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng, double gain) {
  return {normal_param({in, out}, gain / std::sqrt(static_cast<double>(in)), rng),
          Tensor::zeros({out}, true)};
}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

LayerNorm LayerNorm::init(std::size_t width) {
  return {Tensor::full({width}, 1.0, true), Tensor::zeros({width}, true)};
}

void LayerNorm::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", gain);
  out.emplace_back(prefix + ".bias", bias);
}

Conv3d Conv3d::init(std::size_t cin, std::size_t cout, const Triple& k, const Triple& stride,
                    Rng& rng) {
  const double fan_in = static_cast<double>(k[0] * k[1] * k[2] * cin);
  return {normal_param({k[0], k[1], k[2], cin, cout}, 1.0 / std::sqrt(fan_in), rng),
          Tensor::zeros({cout}, true), stride};
}

void Conv3d::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", kernel);
  out.emplace_back(prefix + ".bias", bias);
}

ConvTranspose3d ConvTranspose3d::init(std::size_t cin, std::size_t cout, const Triple& k,
                                      const Triple& stride, Rng& rng) {
  // Each output sees about k/stride taps per axis.
  const double taps = static_cast<double>((k[0] * k[1] * k[2]) / (stride[0] * stride[1] * stride[2]));
  const double fan_in = std::max(1.0, taps) * static_cast<double>(cin);
  return {normal_param({k[0], k[1], k[2], cout, cin}, 1.0 / std::sqrt(fan_in), rng),
          Tensor::zeros({cout}, true), stride};
}

void ConvTranspose3d::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", kernel);
  out.emplace_back(prefix + ".bias", bias);
}

MultiHeadAttention MultiHeadAttention::init(std::size_t q_width, std::size_t kv_width,
                                            std::size_t heads, Rng& rng) {
  if (heads == 0 || q_width % heads != 0 || kv_width % heads != 0)
    throw std::invalid_argument("MultiHeadAttention: widths " + std::to_string(q_width) + "/" +
                                std::to_string(kv_width) + " not divisible by " +
                                std::to_string(heads) + " heads");
  MultiHeadAttention m;
  m.w_qs = Linear::init(q_width, q_width, rng);
  m.w_ks = Linear::init(kv_width, q_width, rng);
  m.w_vs = Linear::init(kv_width, kv_width, rng);
  m.fc = Linear::init(kv_width, q_width, rng);
  m.heads = heads;
  return m;
}

Tensor MultiHeadAttention::operator()(const Tensor& x_q, const Tensor& x_kv,
                                      const AttentionOptions& opt, const TapFn* tap,
                                      std::string_view prefix) const {
  auto site = [&](const char* name, const Tensor& t) {
    if (tap) (*tap)(std::string(prefix) + name, t);
  };
  Tensor q = w_qs(x_q);
  Tensor k = w_ks(x_kv);
  Tensor v = w_vs(x_kv);
  site("w_qs", q);
  site("w_ks", k);
  site("w_vs", v);
  const Shape q_shape = q.shape();
  const std::size_t dq = q_shape.back(), dv = v.shape().back();
  const std::size_t lq = q.numel() / dq, lk = k.numel() / dq;
  AttentionOptions o = opt;
  o.heads = heads;
  Tensor a = attention(reshape(q, {1, lq, dq}), reshape(k, {1, lk, dq}), reshape(v, {1, lk, dv}), o);
  Shape a_shape = q_shape;
  a_shape.back() = dv;
  a = reshape(a, a_shape);
  site("attn", a);
  Tensor y = fc(a);
  site("fc", y);
  return y;
}

void MultiHeadAttention::collect(ParamList& out, const std::string& prefix) const {
  w_qs.collect(out, prefix + ".w_qs");
  w_ks.collect(out, prefix + ".w_ks");
  w_vs.collect(out, prefix + ".w_vs");
  fc.collect(out, prefix + ".fc");
}

AxialAttention AxialAttention::init(std::size_t width, std::size_t heads, Rng& rng) {
  if (heads == 0 || width % heads != 0)
    throw std::invalid_argument("AxialAttention: width " + std::to_string(width) +
                                " not divisible by " + std::to_string(heads) + " heads");
  AxialAttention m;
  m.w_qs = Linear::init(width, width, rng);
  m.w_ks = Linear::init(width, width, rng);
  m.w_vs = Linear::init(width, width, rng);
  m.fc = Linear::init(width, width, rng);
  m.heads = heads;
  return m;
}

Tensor AxialAttention::operator()(const Tensor& x, const AttentionOptions& opt, const TapFn* tap,
                                  std::string_view prefix) const {
  auto site = [&](const char* name, const Tensor& t) {
    if (tap) (*tap)(std::string(prefix) + name, t);
  };
  Tensor q = w_qs(x);
  Tensor k = w_ks(x);
  Tensor v = w_vs(x);
  site("w_qs", q);
  site("w_ks", k);
  site("w_vs", v);
  AttentionOptions o = opt;
  o.heads = heads;
  Tensor a = add(add(axial_attention(q, k, v, Axis::kWidth, o), axial_attention(q, k, v, Axis::kHeight, o)),
                 axial_attention(q, k, v, Axis::kTemporal, o));
  site("attn", a);
  Tensor y = fc(a);
  site("fc", y);
  return y;
}

void AxialAttention::collect(ParamList& out, const std::string& prefix) const {
  w_qs.collect(out, prefix + ".w_qs");
  w_ks.collect(out, prefix + ".w_ks");
  w_vs.collect(out, prefix + ".w_vs");
  fc.collect(out, prefix + ".fc");
}

AxialPositionEmbedding AxialPositionEmbedding::init(const Triple& grid, std::size_t width, Rng& rng) {
  if (width % 3 != 0 || width <= 3)
    throw std::invalid_argument("position embedding width must be a multiple of 3 and greater than 3, got " +
                                std::to_string(width));
  const std::size_t d = width / 3;
  AxialPositionEmbedding e;
  e.pos_t = normal_param({grid[0], d}, 0.01, rng);
  e.pos_h = normal_param({grid[1], d}, 0.01, rng);
  e.pos_w = normal_param({grid[2], d}, 0.01, rng);
  return e;
}

void AxialPositionEmbedding::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".emb.d_0", pos_t);
  out.emplace_back(prefix + ".emb.d_1", pos_h);
  out.emplace_back(prefix + ".emb.d_2", pos_w);
}

}  // namespace vidbrain::nn
