// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vidbrain/nn/layers.hpp"
#include "vidbrain/nn/ops.hpp"

namespace vidbrain::testing {

struct GraphCase {
  std::string kind;
  std::function<nn::Tensor()> loss;
  std::vector<nn::Tensor> leaves;
};

inline nn::Tensor randn(nn::Shape s, nn::Rng& rng, bool rg = true, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(nn::shape_numel(s));
  for (double& x : v) x = d(rng);
  return nn::Tensor::from(std::move(s), std::move(v), rg);
}

// Values bounded away from zero so kinks stay outside the FD stencil.
inline nn::Tensor randn_off_zero(nn::Shape s, nn::Rng& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(nn::shape_numel(s));
  for (double& x : v) {
    x = d(rng);
    x += x < 0 ? -0.05 : 0.05;
  }
  return nn::Tensor::from(std::move(s), std::move(v), true);
}

// Weighted sum so symmetric reductions (softmax rows, norms) still carry signal.
inline nn::Tensor probe(const nn::Tensor& y, nn::Rng& rng) {
  nn::Tensor w = randn(y.shape(), rng, false);
  return nn::sum(nn::mul(y, w));
}

inline constexpr int kGraphKinds = 14;

// Three-stage graph ending in one layer type per `index % kGraphKinds`.
inline GraphCase make_graph(int index, nn::Rng& rng) {
  using namespace nn;
  std::uniform_int_distribution<std::size_t> small(1, 4);
  GraphCase g;
  const int kind = index % kGraphKinds;
  const std::size_t n = small(rng) + 1, c = small(rng) + 1;
  switch (kind) {
    case 0: {
      g.kind = "elementwise";
      Tensor a = randn({n, c}, rng), b = randn({n, c}, rng);
      Tensor w = randn({n, c}, rng, false);
      g.leaves = {a, b};
      g.loss = [=] { return sum(mul(w, add(tanh(mul(a, b)), square(sub(a, scale(b, 0.5)))))); };
      break;
    }
    case 1: {
      g.kind = "relu_gelu";
      Tensor a = randn_off_zero({n, c}, rng);
      Tensor w = randn({n, c}, rng, false);
      g.leaves = {a};
      g.loss = [=] { return sum(mul(w, add(relu(a), gelu(scale(a, 1.3))))); };
      break;
    }
    case 2: {
      g.kind = "linear";
      const std::size_t m = small(rng) + 1;
      Tensor x = randn({n, c}, rng), w1 = randn({c, m}, rng), b1 = randn({m}, rng);
      Tensor w2 = randn({m, c}, rng);
      Tensor p = randn({n, c}, rng, false);
      g.leaves = {x, w1, b1, w2};
      g.loss = [=] { return sum(mul(p, matmul(tanh(linear(x, w1, &b1)), w2))); };
      break;
    }
    case 3: {
      g.kind = "softmax";
      const std::size_t axis = static_cast<std::size_t>(index / kGraphKinds) % 3;
      Tensor x = randn({2, n, c}, rng, true, 2.0), b = randn({c}, rng);
      Tensor p = randn({2, n, c}, rng, false);
      g.leaves = {x, b};
      g.loss = [=] { return sum(mul(p, softmax(add_bias(x, b), axis))); };
      break;
    }
    case 4: {
      g.kind = "layer_norm";
      Tensor x = randn({n, c + 1}, rng), gain = randn({c + 1}, rng), bias = randn({c + 1}, rng);
      Tensor p = randn({n, c + 1}, rng, false);
      g.leaves = {x, gain, bias};
      g.loss = [=] { return sum(mul(p, tanh(layer_norm(scale(x, 2.0), gain, bias)))); };
      break;
    }
    case 5: {
      g.kind = "conv3d";
      const Triple s{static_cast<std::size_t>(1 + index % 2), 2, 1};
      Tensor x = randn({2, 4, 3, 2}, rng), k = randn({2, 3, 2, 2, 3}, rng), b = randn({3}, rng);
      Tensor out = conv3d_same(x, k, &b, s);
      Tensor p = randn(out.shape(), rng, false);
      g.leaves = {x, k, b};
      g.loss = [=] { return sum(mul(p, tanh(conv3d_same(x, k, &b, s)))); };
      break;
    }
    case 6: {
      g.kind = "conv_transpose3d";
      const Triple s{2, static_cast<std::size_t>(1 + index % 2), 2};
      Tensor x = randn({2, 2, 2, 3}, rng), k = randn({2, 2, 4, 2, 3}, rng), b = randn({2}, rng);
      Tensor out = conv_transpose3d_same(x, k, &b, s);
      Tensor p = randn(out.shape(), rng, false);
      g.leaves = {x, k, b};
      g.loss = [=] { return sum(mul(p, tanh(conv_transpose3d_same(x, k, &b, s)))); };
      break;
    }
    case 7: {
      g.kind = "attention";
      const std::size_t heads = 1 + (index / kGraphKinds) % 2, L = n + 1;
      const bool causal = (index / kGraphKinds) % 3 == 0;
      Tensor q = randn({2, L, 2 * heads}, rng), k = randn({2, L, 2 * heads}, rng);
      Tensor v = randn({2, L, 3 * heads}, rng);
      Tensor p = randn({2, L, 3 * heads}, rng, false);
      g.leaves = {q, k, v};
      g.loss = [=] { return sum(mul(p, attention(tanh(q), k, v, {.heads = heads, .causal = causal}))); };
      break;
    }
    case 8: {
      g.kind = "axial_attention";
      const Axis axis = static_cast<Axis>((index / kGraphKinds) % 3);
      const bool causal = (index / kGraphKinds) % 2 == 0;
      Tensor q = randn({2, 3, 2, 4}, rng), k = randn({2, 3, 2, 4}, rng), v = randn({2, 3, 2, 4}, rng);
      Tensor p = randn({2, 3, 2, 4}, rng, false);
      g.leaves = {q, k, v};
      g.loss = [=] { return sum(mul(p, axial_attention(q, tanh(k), v, axis, {.heads = 2, .causal = causal}))); };
      break;
    }
    case 9: {
      g.kind = "position_shift";
      Tensor x = randn({2, 2, 3, 6}, rng), pt = randn({2, 2}, rng), ph = randn({2, 2}, rng);
      Tensor pw = randn({3, 2}, rng), start = randn({6}, rng);
      Tensor p = randn({2, 2, 3, 6}, rng, false);
      g.leaves = {x, pt, ph, pw, start};
      g.loss = [=] { return sum(mul(p, tanh(raster_shift(add_axial_position(x, pt, ph, pw), start)))); };
      break;
    }
    case 10: {
      g.kind = "embedding_cross_entropy";
      const std::size_t vocab = c + 2;
      Tensor table = randn({vocab, 3}, rng), w = randn({3, vocab}, rng);
      std::uniform_int_distribution<std::int32_t> pick(0, static_cast<std::int32_t>(vocab) - 1);
      std::vector<std::int32_t> idx(n), tgt(n);
      for (auto& i : idx) i = pick(rng);
      for (auto& t : tgt) t = pick(rng);
      g.leaves = {table, w};
      g.loss = [=] { return cross_entropy(matmul(embedding(table, idx), w), tgt); };
      break;
    }
    case 11: {
      g.kind = "reductions";
      Tensor a = randn({n, c}, rng), b = randn({n * c}, rng);
      g.leaves = {a, b};
      g.loss = [=] {
        return add(mse(tanh(a), reshape(b, {n, c})), scale(mean(mul(reshape(a, {n * c}), b)), 0.7));
      };
      break;
    }
    case 12: {
      g.kind = "dropout";
      const std::uint64_t seed = rng();
      Tensor a = randn({n, c + 2}, rng);
      Tensor p = randn({n, c + 2}, rng, false);
      g.leaves = {a};
      g.loss = [=] {
        Rng local(seed);
        return sum(mul(p, dropout(tanh(a), 0.3, local)));
      };
      break;
    }
    default: {
      g.kind = "attention_layers";
      auto rng_copy = std::make_shared<Rng>(rng());
      auto axial = std::make_shared<AxialAttention>(AxialAttention::init(4, 2, *rng_copy));
      auto cross = std::make_shared<MultiHeadAttention>(MultiHeadAttention::init(4, 6, 2, *rng_copy));
      auto norm = std::make_shared<LayerNorm>(LayerNorm::init(4));
      Tensor x = randn({2, 2, 2, 4}, rng), ctx = randn({3, 6}, rng);
      Tensor p = randn({2, 2, 2, 4}, rng, false);
      ParamList params;
      axial->collect(params, "a");
      cross->collect(params, "c");
      g.leaves = {x, ctx};
      for (auto& [name, t] : params) g.leaves.push_back(t);
      g.loss = [=] {
        Tensor h = add(x, (*axial)((*norm)(x), {.causal = true}));
        return sum(mul(p, add(h, (*cross)(h, ctx, {}))));
      };
      break;
    }
  }
  return g;
}

}  // namespace vidbrain::testing
