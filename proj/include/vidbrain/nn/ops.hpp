// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>

#include "vidbrain/nn/tensor.hpp"

namespace vidbrain::nn {

using Rng = std::mt19937_64;

// Elementwise. Operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor tanh(const Tensor& a);

/// x[..., C] + b[C]
Tensor add_bias(const Tensor& x, const Tensor& b);

Tensor reshape(const Tensor& x, Shape shape);

/// Value passes through; no gradient flows to x.
Tensor stop_gradient(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// mean((a - b)^2)
Tensor mse(const Tensor& a, const Tensor& b);

/// a[M,K] @ b[K,N]
Tensor matmul(const Tensor& a, const Tensor& b);

/// x[..., K] @ w[K,N] (+ b[N]); leading axes are flattened as rows.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor* b = nullptr);

/// Softmax along `axis` with max subtraction.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Normalizes over the last axis. Throws std::invalid_argument if eps <= 0.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng);

/// table[V, D] gathered at indices -> [indices.size(), D].
Tensor embedding(const Tensor& table, std::span<const std::int32_t> indices);

/// Mean over rows of -log softmax(logits[N, C])[target]. Throws
/// std::out_of_range for a target outside [0, C).
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets);

using Triple = std::array<std::size_t, 3>;

/// Output extent per axis for the "same" convolution: ceil(in / stride).
Triple conv_same_output(const Triple& in, const Triple& stride);

/// 3D convolution over x[T,H,W,Cin] with kernel[kt,kh,kw,Cin,Cout] and
/// "same" zero padding (the odd element of the padding goes in front).
/// Output is [ceil(T/st), ceil(H/sh), ceil(W/sw), Cout].
Tensor conv3d_same(const Tensor& x, const Tensor& kernel, const Tensor* bias,
                   const Triple& stride);

/// Adjoint of conv3d_same: x[T,H,W,Cin] with kernel[kt,kh,kw,Cout,Cin] maps to
/// [T*st, H*sh, W*sw, Cout]. It is exactly the transpose of the strided
/// convolution whose input has the upsampled shape.
Tensor conv_transpose3d_same(const Tensor& x, const Tensor& kernel, const Tensor* bias,
                             const Triple& stride);

/// Scaled dot-product attention over batched sequences.
/// q[B,L,Dq], k[B,S,Dq], v[B,S,Dv] -> [B,L,Dv]. Channels are split evenly
/// into `heads` groups; each head uses softmax(Q K^T / sqrt(dk)) V.
/// With `causal`, query i attends to keys j <= i only (requires L == S).
struct AttentionOptions {
  std::size_t heads = 1;
  bool causal = false;
  double dropout = 0.0;  // on attention weights, training only
  Rng* rng = nullptr;
};
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionOptions& opt);

enum class Axis : std::size_t { kTemporal = 0, kHeight = 1, kWidth = 2 };

/// Attention restricted to one axis of q,k,v [T,H,W,C]: every line along
/// `axis` is an independent sequence, the other two coordinates act as batch.
Tensor axial_attention(const Tensor& q, const Tensor& k, const Tensor& v, Axis axis,
                       const AttentionOptions& opt);

/// x[T,H,W,C] plus a per-axis table broadcast along the other axes. Each
/// table is [len, C/3] and owns one third of the channels (temporal first).
Tensor add_axial_position(const Tensor& x, const Tensor& pos_t, const Tensor& pos_h,
                          const Tensor& pos_w);

/// Shifts x[T,H,W,C] one step along raster order (t, h, w): output position 0
/// holds `start[C]`, position i holds input position i-1.
Tensor raster_shift(const Tensor& x, const Tensor& start);

/// Non-differentiable helpers.
Tensor permute(const Tensor& x, std::span<const std::size_t> order);

}  // namespace vidbrain::nn
