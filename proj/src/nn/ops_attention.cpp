// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "blas.hpp"
#include "op_builder.hpp"
#include "vidbrain/nn/ops.hpp"

namespace vidbrain::nn {

using detail::grad_of;
using detail::make_result;
using detail::Node;
using detail::require;

namespace {

struct AttnDims {
  std::size_t batch = 0, len_q = 0, len_k = 0, dq = 0, dv = 0, heads = 1;
  bool causal = false;
  std::size_t dk() const { return dq / heads; }
  std::size_t dvh() const { return dv / heads; }
};

// Saved state for the reverse pass: softmax weights and the (scaled) dropout
// mask, per (batch, head), each [len_q, len_k].
struct AttnSaved {
  std::vector<double> probs;
  std::vector<double> mask;  // empty when no dropout was applied
};

void pack_head(const double* src, std::size_t rows, std::size_t stride, std::size_t offset,
               std::size_t width, std::vector<double>& dst) {
  dst.resize(rows * width);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(src + r * stride + offset, width, dst.data() + r * width);
}

void unpack_head_add(const std::vector<double>& src, std::size_t rows, std::size_t stride,
                     std::size_t offset, std::size_t width, double* dst) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < width; ++j) dst[r * stride + offset + j] += src[r * width + j];
}

void attention_forward(const double* q, const double* k, const double* v, const AttnDims& d,
                       double dropout, Rng* rng, double* out, AttnSaved& saved) {
  const std::size_t L = d.len_q, S = d.len_k, dk = d.dk(), dvh = d.dvh();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  const std::size_t block = L * S;
  saved.probs.assign(d.batch * d.heads * block, 0.0);
  if (dropout > 0.0) saved.mask.assign(d.batch * d.heads * block, 0.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = dropout > 0.0 ? 1.0 / (1.0 - dropout) : 1.0;

  std::vector<double> qh, kh, vh, oh, w;
  for (std::size_t b = 0; b < d.batch; ++b) {
    const double* qb = q + b * L * d.dq;
    const double* kb = k + b * S * d.dq;
    const double* vb = v + b * S * d.dv;
    double* ob = out + b * L * d.dv;
    for (std::size_t h = 0; h < d.heads; ++h) {
      pack_head(qb, L, d.dq, h * dk, dk, qh);
      pack_head(kb, S, d.dq, h * dk, dk, kh);
      pack_head(vb, S, d.dv, h * dvh, dvh, vh);
      double* p = saved.probs.data() + (b * d.heads + h) * block;
      detail::gemm(false, true, L, S, dk, qh.data(), kh.data(), p);
      for (std::size_t i = 0; i < L; ++i) {
        double* row = p + i * S;
        const std::size_t valid = d.causal ? i + 1 : S;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < valid; ++j) {
          row[j] *= inv_sqrt;
          mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < valid; ++j) {
          row[j] = std::exp(row[j] - mx);
          z += row[j];
        }
        const double inv = 1.0 / std::max(z, 1e-12);
        for (std::size_t j = 0; j < valid; ++j) row[j] *= inv;
        for (std::size_t j = valid; j < S; ++j) row[j] = 0.0;
      }
      const double* weights = p;
      if (dropout > 0.0) {
        double* m = saved.mask.data() + (b * d.heads + h) * block;
        w.assign(p, p + block);
        for (std::size_t i = 0; i < block; ++i) {
          m[i] = u(*rng) >= dropout ? keep : 0.0;
          w[i] *= m[i];
        }
        weights = w.data();
      }
      oh.assign(L * dvh, 0.0);
      detail::gemm(false, false, L, dvh, S, weights, vh.data(), oh.data());
      for (std::size_t i = 0; i < L; ++i) std::copy_n(oh.data() + i * dvh, dvh, ob + i * d.dv + h * dvh);
    }
  }
}

void attention_backward(const double* q, const double* k, const double* v, const double* gout,
                        const AttnDims& d, const AttnSaved& saved, double* gq, double* gk,
                        double* gv) {
  const std::size_t L = d.len_q, S = d.len_k, dk = d.dk(), dvh = d.dvh();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  const std::size_t block = L * S;
  std::vector<double> qh, kh, vh, goh, dp, ds, w, tmp;
  for (std::size_t b = 0; b < d.batch; ++b) {
    const double* qb = q + b * L * d.dq;
    const double* kb = k + b * S * d.dq;
    const double* vb = v + b * S * d.dv;
    const double* gb = gout + b * L * d.dv;
    for (std::size_t h = 0; h < d.heads; ++h) {
      const double* p = saved.probs.data() + (b * d.heads + h) * block;
      const double* m = saved.mask.empty() ? nullptr : saved.mask.data() + (b * d.heads + h) * block;
      pack_head(gb, L, d.dv, h * dvh, dvh, goh);
      pack_head(vb, S, d.dv, h * dvh, dvh, vh);
      const double* weights = p;
      if (m) {
        w.resize(block);
        for (std::size_t i = 0; i < block; ++i) w[i] = p[i] * m[i];
        weights = w.data();
      }
      if (gv) {
        tmp.assign(S * dvh, 0.0);
        detail::gemm(true, false, S, dvh, L, weights, goh.data(), tmp.data());
        unpack_head_add(tmp, S, d.dv, h * dvh, dvh, gv + b * S * d.dv);
      }
      if (!gq && !gk) continue;
      dp.assign(block, 0.0);
      detail::gemm(false, true, L, S, dvh, goh.data(), vh.data(), dp.data());
      if (m)
        for (std::size_t i = 0; i < block; ++i) dp[i] *= m[i];
      ds.assign(block, 0.0);
      for (std::size_t i = 0; i < L; ++i) {
        const std::size_t valid = d.causal ? i + 1 : S;
        double dot = 0.0;
        for (std::size_t j = 0; j < valid; ++j) dot += dp[i * S + j] * p[i * S + j];
        for (std::size_t j = 0; j < valid; ++j)
          ds[i * S + j] = p[i * S + j] * (dp[i * S + j] - dot) * inv_sqrt;
      }
      if (gq) {
        pack_head(kb, S, d.dq, h * dk, dk, kh);
        tmp.assign(L * dk, 0.0);
        detail::gemm(false, false, L, dk, S, ds.data(), kh.data(), tmp.data());
        unpack_head_add(tmp, L, d.dq, h * dk, dk, gq + b * L * d.dq);
      }
      if (gk) {
        pack_head(qb, L, d.dq, h * dk, dk, qh);
        tmp.assign(S * dk, 0.0);
        detail::gemm(true, false, S, dk, L, ds.data(), qh.data(), tmp.data());
        unpack_head_add(tmp, S, d.dq, h * dk, dk, gk + b * S * d.dq);
      }
    }
  }
}

void check_options(const AttentionOptions& opt, std::size_t dq, std::size_t dv) {
  require(opt.heads >= 1, "attention: heads must be >= 1");
  if (dq % opt.heads != 0 || dv % opt.heads != 0)
    throw std::invalid_argument("attention: width " + std::to_string(dq) + "/" + std::to_string(dv) +
                                " not divisible by " + std::to_string(opt.heads) + " heads");
  require(opt.dropout >= 0.0 && opt.dropout < 1.0, "attention: dropout must lie in [0, 1)");
  require(opt.dropout == 0.0 || opt.rng != nullptr, "attention: dropout needs an rng");
}

// Flat [T,H,W] position of element `l` of line `b` along `axis`.
std::vector<std::size_t> axial_positions(std::size_t T, std::size_t H, std::size_t W, Axis axis,
                                         std::size_t& lines, std::size_t& len) {
  std::vector<std::size_t> pos;
  pos.reserve(T * H * W);
  switch (axis) {
    case Axis::kTemporal:
      lines = H * W;
      len = T;
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w)
          for (std::size_t t = 0; t < T; ++t) pos.push_back((t * H + h) * W + w);
      break;
    case Axis::kHeight:
      lines = T * W;
      len = H;
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t w = 0; w < W; ++w)
          for (std::size_t h = 0; h < H; ++h) pos.push_back((t * H + h) * W + w);
      break;
    case Axis::kWidth:
      lines = T * H;
      len = W;
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t w = 0; w < W; ++w) pos.push_back((t * H + h) * W + w);
      break;
  }
  return pos;
}

std::vector<double> gather_rows(std::span<const double> x, const std::vector<std::size_t>& pos,
                                std::size_t c) {
  std::vector<double> out(pos.size() * c);
  for (std::size_t i = 0; i < pos.size(); ++i) std::copy_n(x.data() + pos[i] * c, c, out.data() + i * c);
  return out;
}

void scatter_rows_add(const std::vector<double>& src, const std::vector<std::size_t>& pos,
                      std::size_t c, double* dst) {
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (std::size_t j = 0; j < c; ++j) dst[pos[i] * c + j] += src[i * c + j];
}

}  // namespace

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionOptions& opt) {
  require(q.rank() == 3 && k.rank() == 3 && v.rank() == 3, "attention: q, k, v must be [B, L, D]");
  require(q.dim(0) == k.dim(0) && k.dim(0) == v.dim(0), "attention: batch mismatch");
  require(q.dim(2) == k.dim(2), "attention: query/key width mismatch");
  require(k.dim(1) == v.dim(1), "attention: key/value length mismatch");
  check_options(opt, q.dim(2), v.dim(2));
  AttnDims d{q.dim(0), q.dim(1), k.dim(1), q.dim(2), v.dim(2), opt.heads, opt.causal};
  if (opt.causal) require(d.len_q == d.len_k, "attention: causal mask needs equal lengths");
  const double p_drop = grad_enabled() ? opt.dropout : 0.0;

  std::vector<double> out(d.batch * d.len_q * d.dv, 0.0);
  auto saved = std::make_shared<AttnSaved>();
  attention_forward(q.data().data(), k.data().data(), v.data().data(), d, p_drop, opt.rng,
                    out.data(), *saved);
  return make_result({d.batch, d.len_q, d.dv}, std::move(out), "attention", {q, k, v},
                     [q, k, v, d, saved](Node& self) {
                       auto* gq = grad_of(q.node_ptr());
                       auto* gk = grad_of(k.node_ptr());
                       auto* gv = grad_of(v.node_ptr());
                       attention_backward(q.data().data(), k.data().data(), v.data().data(),
                                          self.grad.data(), d, *saved, gq ? gq->data() : nullptr,
                                          gk ? gk->data() : nullptr, gv ? gv->data() : nullptr);
                     });
}

Tensor axial_attention(const Tensor& q, const Tensor& k, const Tensor& v, Axis axis,
                       const AttentionOptions& opt) {
  require(q.rank() == 4 && k.shape() == q.shape() && v.rank() == 4,
          "axial_attention: q, k must share a [T,H,W,C] shape");
  require(v.dim(0) == q.dim(0) && v.dim(1) == q.dim(1) && v.dim(2) == q.dim(2),
          "axial_attention: value grid mismatch");
  check_options(opt, q.dim(3), v.dim(3));
  const std::size_t T = q.dim(0), H = q.dim(1), W = q.dim(2), C = q.dim(3), Cv = v.dim(3);
  std::size_t lines = 0, len = 0;
  auto pos = axial_positions(T, H, W, axis, lines, len);
  AttnDims d{lines, len, len, C, Cv, opt.heads, opt.causal};
  const double p_drop = grad_enabled() ? opt.dropout : 0.0;

  const auto qg = gather_rows(q.data(), pos, C);
  const auto kg = gather_rows(k.data(), pos, C);
  const auto vg = gather_rows(v.data(), pos, Cv);
  std::vector<double> og(lines * len * Cv, 0.0);
  auto saved = std::make_shared<AttnSaved>();
  attention_forward(qg.data(), kg.data(), vg.data(), d, p_drop, opt.rng, og.data(), *saved);
  std::vector<double> out(T * H * W * Cv, 0.0);
  scatter_rows_add(og, pos, Cv, out.data());

  return make_result({T, H, W, Cv}, std::move(out), "axial_attention", {q, k, v},
                     [q, k, v, d, saved, pos = std::move(pos), C, Cv](Node& self) {
                       auto* gq = grad_of(q.node_ptr());
                       auto* gk = grad_of(k.node_ptr());
                       auto* gv = grad_of(v.node_ptr());
                       const auto qg = gather_rows(q.data(), pos, C);
                       const auto kg = gather_rows(k.data(), pos, C);
                       const auto vg = gather_rows(v.data(), pos, Cv);
                       const auto go = gather_rows(self.grad, pos, Cv);
                       std::vector<double> gqg(gq ? qg.size() : 0, 0.0);
                       std::vector<double> gkg(gk ? kg.size() : 0, 0.0);
                       std::vector<double> gvg(gv ? vg.size() : 0, 0.0);
                       attention_backward(qg.data(), kg.data(), vg.data(), go.data(), d, *saved,
                                          gq ? gqg.data() : nullptr, gk ? gkg.data() : nullptr,
                                          gv ? gvg.data() : nullptr);
                       if (gq) scatter_rows_add(gqg, pos, C, gq->data());
                       if (gk) scatter_rows_add(gkg, pos, C, gk->data());
                       if (gv) scatter_rows_add(gvg, pos, Cv, gv->data());
                     });
}

}  // namespace vidbrain::nn
