// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vidbrain/nn/ops.hpp"

namespace vidbrain::nn {

/// Ordered (name, tensor) list. Tensors are shared handles, so writing into
/// an entry's data updates the owning module.
using ParamList = std::vector<std::pair<std::string, Tensor>>;

std::size_t count_parameters(const ParamList& params);

/// Called with (site name, activation) at every named site of a forward pass.
using TapFn = std::function<void(std::string_view, const Tensor&)>;

Tensor normal_param(Shape shape, double stddev, Rng& rng);

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Linear init(std::size_t in, std::size_t out, Rng& rng, double gain = 1.0);
  Tensor operator()(const Tensor& x) const { return linear(x, weight, &bias); }
  void collect(ParamList& out, const std::string& prefix) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;
  double eps = 1e-5;

  static LayerNorm init(std::size_t width);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias, eps); }
  void collect(ParamList& out, const std::string& prefix) const;
};

struct Conv3d {
  Tensor kernel;  // [kt, kh, kw, cin, cout]
  Tensor bias;    // [cout]
  Triple stride{1, 1, 1};

  static Conv3d init(std::size_t cin, std::size_t cout, const Triple& k, const Triple& stride,
                     Rng& rng);
  Tensor operator()(const Tensor& x) const { return conv3d_same(x, kernel, &bias, stride); }
  void collect(ParamList& out, const std::string& prefix) const;
};

struct ConvTranspose3d {
  Tensor kernel;  // [kt, kh, kw, cout, cin]
  Tensor bias;    // [cout]
  Triple stride{1, 1, 1};

  static ConvTranspose3d init(std::size_t cin, std::size_t cout, const Triple& k,
                              const Triple& stride, Rng& rng);
  Tensor operator()(const Tensor& x) const {
    return conv_transpose3d_same(x, kernel, &bias, stride);
  }
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Multi-head attention with separate query/key/value projections and an
/// output projection W^O. Query width may differ from the key/value width
/// (cross-attention); each head's value width is kv_width / heads.
struct MultiHeadAttention {
  Linear w_qs, w_ks, w_vs, fc;
  std::size_t heads = 1;

  static MultiHeadAttention init(std::size_t q_width, std::size_t kv_width, std::size_t heads,
                                 Rng& rng);
  /// x_q[B?, L, Dq] / x_kv[S, Dkv] are flattened to one batch when rank 2.
  Tensor operator()(const Tensor& x_q, const Tensor& x_kv, const AttentionOptions& opt,
                    const TapFn* tap = nullptr, std::string_view prefix = {}) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// One shared set of projections; attention runs separately along the
/// temporal, height and width axes and the three outputs are summed before
/// the output projection.
struct AxialAttention {
  Linear w_qs, w_ks, w_vs, fc;
  std::size_t heads = 1;

  static AxialAttention init(std::size_t width, std::size_t heads, Rng& rng);
  Tensor operator()(const Tensor& x, const AttentionOptions& opt, const TapFn* tap = nullptr,
                    std::string_view prefix = {}) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Learned per-axis position tables; each axis owns width/3 channels.
struct AxialPositionEmbedding {
  Tensor pos_t, pos_h, pos_w;

  static AxialPositionEmbedding init(const Triple& grid, std::size_t width, Rng& rng);
  Tensor operator()(const Tensor& x) const { return add_axial_position(x, pos_t, pos_h, pos_w); }
  void collect(ParamList& out, const std::string& prefix) const;
};

}  // namespace vidbrain::nn
