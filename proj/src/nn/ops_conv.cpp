// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <stdexcept>

#include "blas.hpp"
#include "op_builder.hpp"
#include "vidbrain/nn/ops.hpp"

namespace vidbrain::nn {

using detail::grad_of;
using detail::make_result;
using detail::Node;
using detail::require;

Triple conv_same_output(const Triple& in, const Triple& stride) {
  Triple out{};
  for (std::size_t a = 0; a < 3; ++a) {
    require(stride[a] >= 1, "conv: stride must be >= 1");
    out[a] = (in[a] + stride[a] - 1) / stride[a];
  }
  return out;
}

namespace {

// Geometry of a "same" strided convolution from `in` (channels c) to `out`.
struct ConvGeometry {
  Triple in{}, out{}, k{}, stride{}, front{};
  std::size_t c = 0;

  std::size_t in_positions() const { return in[0] * in[1] * in[2]; }
  std::size_t out_positions() const { return out[0] * out[1] * out[2]; }
  std::size_t patch() const { return k[0] * k[1] * k[2] * c; }
};

ConvGeometry make_geometry(const Triple& in, std::size_t c, const Triple& k, const Triple& stride) {
  ConvGeometry g;
  g.in = in;
  g.c = c;
  g.k = k;
  g.stride = stride;
  g.out = conv_same_output(in, stride);
  for (std::size_t a = 0; a < 3; ++a) {
    require(k[a] >= 1, "conv: kernel extent must be >= 1");
    const std::ptrdiff_t need = static_cast<std::ptrdiff_t>((g.out[a] - 1) * stride[a] + k[a]) -
                                static_cast<std::ptrdiff_t>(in[a]);
    const std::size_t total = need > 0 ? static_cast<std::size_t>(need) : 0;
    if (k[a] > in[a] + total)
      throw std::invalid_argument("conv: kernel larger than padded input");
    if ((in[a] + total - k[a]) % stride[a] != 0)
      throw std::invalid_argument("conv: stride does not divide the padded extent");
    g.front[a] = total / 2 + total % 2;
  }
  return g;
}

// cols[P_out, kt*kh*kw*c] gathered from x[in..., c] with zero padding.
void im2col(const double* x, const ConvGeometry& g, std::vector<double>& cols) {
  const std::size_t patch = g.patch();
  cols.assign(g.out_positions() * patch, 0.0);
  std::size_t o = 0;
  for (std::size_t ot = 0; ot < g.out[0]; ++ot)
    for (std::size_t oh = 0; oh < g.out[1]; ++oh)
      for (std::size_t ow = 0; ow < g.out[2]; ++ow, ++o) {
        double* dst = cols.data() + o * patch;
        for (std::size_t a = 0; a < g.k[0]; ++a) {
          const auto it = static_cast<std::ptrdiff_t>(ot * g.stride[0] + a) -
                          static_cast<std::ptrdiff_t>(g.front[0]);
          if (it < 0 || it >= static_cast<std::ptrdiff_t>(g.in[0])) continue;
          for (std::size_t b = 0; b < g.k[1]; ++b) {
            const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride[1] + b) -
                            static_cast<std::ptrdiff_t>(g.front[1]);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in[1])) continue;
            for (std::size_t cc = 0; cc < g.k[2]; ++cc) {
              const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride[2] + cc) -
                              static_cast<std::ptrdiff_t>(g.front[2]);
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in[2])) continue;
              const std::size_t src =
                  ((static_cast<std::size_t>(it) * g.in[1] + static_cast<std::size_t>(ih)) * g.in[2] +
                   static_cast<std::size_t>(iw)) * g.c;
              std::copy_n(x + src, g.c, dst + ((a * g.k[1] + b) * g.k[2] + cc) * g.c);
            }
          }
        }
      }
}

// Adjoint of im2col: scatter-add cols back onto x.
void col2im(const double* cols, const ConvGeometry& g, double* x) {
  const std::size_t patch = g.patch();
  std::size_t o = 0;
  for (std::size_t ot = 0; ot < g.out[0]; ++ot)
    for (std::size_t oh = 0; oh < g.out[1]; ++oh)
      for (std::size_t ow = 0; ow < g.out[2]; ++ow, ++o) {
        const double* src = cols + o * patch;
        for (std::size_t a = 0; a < g.k[0]; ++a) {
          const auto it = static_cast<std::ptrdiff_t>(ot * g.stride[0] + a) -
                          static_cast<std::ptrdiff_t>(g.front[0]);
          if (it < 0 || it >= static_cast<std::ptrdiff_t>(g.in[0])) continue;
          for (std::size_t b = 0; b < g.k[1]; ++b) {
            const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride[1] + b) -
                            static_cast<std::ptrdiff_t>(g.front[1]);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in[1])) continue;
            for (std::size_t cc = 0; cc < g.k[2]; ++cc) {
              const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride[2] + cc) -
                              static_cast<std::ptrdiff_t>(g.front[2]);
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in[2])) continue;
              double* dst = x + ((static_cast<std::size_t>(it) * g.in[1] + static_cast<std::size_t>(ih)) *
                                     g.in[2] +
                                 static_cast<std::size_t>(iw)) *
                                    g.c;
              const double* s = src + ((a * g.k[1] + b) * g.k[2] + cc) * g.c;
              for (std::size_t ci = 0; ci < g.c; ++ci) dst[ci] += s[ci];
            }
          }
        }
      }
}

Triple kernel_extent(const Tensor& kernel) {
  return {kernel.dim(0), kernel.dim(1), kernel.dim(2)};
}

}  // namespace

Tensor conv3d_same(const Tensor& x, const Tensor& kernel, const Tensor* bias, const Triple& stride) {
  require(x.rank() == 4, "conv3d_same: input must be [T,H,W,Cin], got " + shape_str(x.shape()));
  require(kernel.rank() == 5 && kernel.dim(3) == x.dim(3),
          "conv3d_same: kernel " + shape_str(kernel.shape()) + " does not match input " +
              shape_str(x.shape()));
  const std::size_t cout = kernel.dim(4);
  if (bias) require(bias->rank() == 1 && bias->dim(0) == cout, "conv3d_same: bias width mismatch");
  const ConvGeometry g =
      make_geometry({x.dim(0), x.dim(1), x.dim(2)}, x.dim(3), kernel_extent(kernel), stride);
  std::vector<double> cols;
  im2col(x.data().data(), g, cols);
  const std::size_t P = g.out_positions(), K = g.patch();
  std::vector<double> out(P * cout, 0.0);
  if (bias)
    for (std::size_t p = 0; p < P; ++p) std::copy_n(bias->data().begin(), cout, out.begin() + p * cout);
  detail::gemm(false, false, P, cout, K, cols.data(), kernel.data().data(), out.data());

  Tensor b = bias ? *bias : Tensor();
  auto backward = [x, kernel, b, g, P, K, cout, cols = std::move(cols)](Node& self) {
    if (auto* gk = grad_of(kernel.node_ptr()))
      detail::gemm(true, false, K, cout, P, cols.data(), self.grad.data(), gk->data());
    if (b.defined())
      if (auto* gb = grad_of(b.node_ptr()))
        for (std::size_t p = 0; p < P; ++p)
          for (std::size_t j = 0; j < cout; ++j) (*gb)[j] += self.grad[p * cout + j];
    if (auto* gx = grad_of(x.node_ptr())) {
      std::vector<double> dcols(P * K, 0.0);
      detail::gemm(false, true, P, K, cout, self.grad.data(), kernel.data().data(), dcols.data());
      col2im(dcols.data(), g, gx->data());
    }
  };
  Shape shape{g.out[0], g.out[1], g.out[2], cout};
  if (bias) return make_result(std::move(shape), std::move(out), "conv3d_same", {x, kernel, *bias}, backward);
  return make_result(std::move(shape), std::move(out), "conv3d_same", {x, kernel}, backward);
}

Tensor conv_transpose3d_same(const Tensor& x, const Tensor& kernel, const Tensor* bias,
                             const Triple& stride) {
  require(x.rank() == 4, "conv_transpose3d_same: input must be [T,H,W,Cin]");
  require(kernel.rank() == 5 && kernel.dim(4) == x.dim(3),
          "conv_transpose3d_same: kernel " + shape_str(kernel.shape()) + " does not match input " +
              shape_str(x.shape()));
  const std::size_t cout = kernel.dim(3), cin = x.dim(3);
  if (bias) require(bias->rank() == 1 && bias->dim(0) == cout, "conv_transpose3d_same: bias width mismatch");
  const Triple up{x.dim(0) * stride[0], x.dim(1) * stride[1], x.dim(2) * stride[2]};
  const ConvGeometry g = make_geometry(up, cout, kernel_extent(kernel), stride);
  const std::size_t P = g.out_positions(), K = g.patch(), N = g.in_positions();
  // P equals the number of input positions of x.
  std::vector<double> cols(P * K, 0.0);
  detail::gemm(false, true, P, K, cin, x.data().data(), kernel.data().data(), cols.data());
  std::vector<double> out(N * cout, 0.0);
  col2im(cols.data(), g, out.data());
  if (bias)
    for (std::size_t p = 0; p < N; ++p)
      for (std::size_t j = 0; j < cout; ++j) out[p * cout + j] += bias->data()[j];

  Tensor b = bias ? *bias : Tensor();
  auto backward = [x, kernel, b, g, P, K, N, cin, cout](Node& self) {
    if (b.defined())
      if (auto* gb = grad_of(b.node_ptr()))
        for (std::size_t p = 0; p < N; ++p)
          for (std::size_t j = 0; j < cout; ++j) (*gb)[j] += self.grad[p * cout + j];
    auto* gx = grad_of(x.node_ptr());
    auto* gk = grad_of(kernel.node_ptr());
    if (!gx && !gk) return;
    std::vector<double> gcols;
    im2col(self.grad.data(), g, gcols);
    if (gx) detail::gemm(false, false, P, cin, K, gcols.data(), kernel.data().data(), gx->data());
    if (gk) detail::gemm(true, false, K, cin, P, gcols.data(), x.data().data(), gk->data());
  };
  Shape shape{up[0], up[1], up[2], cout};
  if (bias)
    return make_result(std::move(shape), std::move(out), "conv_transpose3d_same", {x, kernel, *bias}, backward);
  return make_result(std::move(shape), std::move(out), "conv_transpose3d_same", {x, kernel}, backward);
}

}  // namespace vidbrain::nn
