// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numbers>
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

template <class F, class DF>
Tensor unary(const Tensor& a, const char* name, F f, DF df) {
  std::vector<double> out(a.numel());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(a.shape(), std::move(out), name, {a}, [a, df](Node& self) {
    auto* ga = grad_of(a.node_ptr());
    if (!ga) return;
    const auto x = a.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      (*ga)[i] += self.grad[i] * df(x[i], self.value[i]);
  });
}

std::size_t rows_of(const Shape& s) {
  if (s.empty()) return 1;
  return shape_numel(s) / s.back();
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), "add", {a, b}, [a, b](Node& self) {
    if (auto* ga = grad_of(a.node_ptr()))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
    if (auto* gb = grad_of(b.node_ptr()))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result(a.shape(), std::move(out), "sub", {a, b}, [a, b](Node& self) {
    if (auto* ga = grad_of(a.node_ptr()))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
    if (auto* gb = grad_of(b.node_ptr()))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(a.shape(), std::move(out), "mul", {a, b}, [a, b](Node& self) {
    if (auto* ga = grad_of(a.node_ptr()))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * b.data()[i];
    if (auto* gb = grad_of(b.node_ptr()))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i] += self.grad[i] * a.data()[i];
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor square(const Tensor& a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      a, "gelu", [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) {
        return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double x, double) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  require(x.rank() >= 1 && b.rank() == 1 && b.dim(0) == x.shape().back(),
          "add_bias: bias " + shape_str(b.shape()) + " does not match " + shape_str(x.shape()));
  const std::size_t c = b.dim(0);
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i % c];
  return make_result(x.shape(), std::move(out), "add_bias", {x, b}, [x, b, c](Node& self) {
    if (auto* gx = grad_of(x.node_ptr()))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
    if (auto* gb = grad_of(b.node_ptr()))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i % c] += self.grad[i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) + " changes size");
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), "reshape", {x}, [x](Node& self) {
    if (auto* gx = grad_of(x.node_ptr()))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
  });
}

Tensor stop_gradient(const Tensor& x) {
  return Tensor::from(x.shape(), x.to_vector(), false);
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({}, {s}, "sum", {x}, [x](Node& self) {
    if (auto* gx = grad_of(x.node_ptr()))
      for (double& g : *gx) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  require(x.numel() > 0, "mean: empty tensor");
  double s = 0.0;
  for (double v : x.data()) s += v;
  const double n = static_cast<double>(x.numel());
  return make_result({}, {s / n}, "mean", {x}, [x, n](Node& self) {
    if (auto* gx = grad_of(x.node_ptr()))
      for (double& g : *gx) g += self.grad[0] / n;
  });
}

Tensor mse(const Tensor& a, const Tensor& b) { return mean(square(sub(a, b))); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + shape_str(a.shape()) + " @ " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  detail::gemm(false, false, m, n, k, a.data().data(), b.data().data(), out.data());
  return make_result({m, n}, std::move(out), "matmul", {a, b}, [a, b, m, n, k](Node& self) {
    if (auto* ga = grad_of(a.node_ptr()))
      detail::gemm(false, true, m, k, n, self.grad.data(), b.data().data(), ga->data());
    if (auto* gb = grad_of(b.node_ptr()))
      detail::gemm(true, false, k, n, m, a.data().data(), self.grad.data(), gb->data());
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor* b) {
  require(x.rank() >= 1 && w.rank() == 2 && x.shape().back() == w.dim(0),
          "linear: input " + shape_str(x.shape()) + " does not match weight " + shape_str(w.shape()));
  const std::size_t rows = rows_of(x.shape()), k = w.dim(0), n = w.dim(1);
  if (b) require(b->rank() == 1 && b->dim(0) == n, "linear: bias width mismatch");
  std::vector<double> out(rows * n, 0.0);
  if (b)
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(b->data().begin(), n, out.begin() + r * n);
  detail::gemm(false, false, rows, n, k, x.data().data(), w.data().data(), out.data());
  Shape shape = x.shape();
  shape.back() = n;
  Tensor bias = b ? *b : Tensor();
  auto backward = [x, w, bias, rows, k, n](Node& self) {
    if (auto* gx = grad_of(x.node_ptr()))
      detail::gemm(false, true, rows, k, n, self.grad.data(), w.data().data(), gx->data());
    if (auto* gw = grad_of(w.node_ptr()))
      detail::gemm(true, false, k, n, rows, x.data().data(), self.grad.data(), gw->data());
    if (bias.defined())
      if (auto* gb = grad_of(bias.node_ptr()))
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < n; ++j) (*gb)[j] += self.grad[r * n + j];
  };
  if (b) return make_result(std::move(shape), std::move(out), "linear", {x, w, *b}, backward);
  return make_result(std::move(shape), std::move(out), "linear", {x, w}, backward);
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  require(axis < x.rank(), "softmax: axis out of range");
  const Shape& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t base = o * len * inner + j;
      double mx = -INFINITY;
      for (std::size_t t = 0; t < len; ++t) mx = std::max(mx, in[base + t * inner]);
      double z = 0.0;
      for (std::size_t t = 0; t < len; ++t) {
        const double e = std::exp(in[base + t * inner] - mx);
        out[base + t * inner] = e;
        z += e;
      }
      const double inv = 1.0 / std::max(z, 1e-12);
      for (std::size_t t = 0; t < len; ++t) out[base + t * inner] *= inv;
    }
  }
  return make_result(s, std::move(out), "softmax", {x}, [x, outer, inner, len](Node& self) {
    auto* gx = grad_of(x.node_ptr());
    if (!gx) return;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < inner; ++j) {
        const std::size_t base = o * len * inner + j;
        double dot = 0.0;
        for (std::size_t t = 0; t < len; ++t)
          dot += self.grad[base + t * inner] * self.value[base + t * inner];
        for (std::size_t t = 0; t < len; ++t) {
          const std::size_t i = base + t * inner;
          (*gx)[i] += self.value[i] * (self.grad[i] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be positive");
  require(x.rank() >= 1, "layer_norm: scalar input");
  const std::size_t c = x.shape().back();
  require(gain.rank() == 1 && gain.dim(0) == c && bias.rank() == 1 && bias.dim(0) == c,
          "layer_norm: gain/bias must have width " + std::to_string(c));
  const std::size_t rows = rows_of(x.shape());
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (row[j] - mu) * is;
      xhat[r * c + j] = h;
      out[r * c + j] = h * gain.data()[j] + bias.data()[j];
    }
  }
  return make_result(x.shape(), std::move(out), "layer_norm", {x, gain, bias},
                     [x, gain, bias, rows, c, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)](Node& self) {
                       auto* gx = grad_of(x.node_ptr());
                       auto* gg = grad_of(gain.node_ptr());
                       auto* gb = grad_of(bias.node_ptr());
                       const double n = static_cast<double>(c);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* g = self.grad.data() + r * c;
                         const double* h = xhat.data() + r * c;
                         if (gg)
                           for (std::size_t j = 0; j < c; ++j) (*gg)[j] += g[j] * h[j];
                         if (gb)
                           for (std::size_t j = 0; j < c; ++j) (*gb)[j] += g[j];
                         if (!gx) continue;
                         double s1 = 0.0, s2 = 0.0;
                         for (std::size_t j = 0; j < c; ++j) {
                           const double dh = g[j] * gain.data()[j];
                           s1 += dh;
                           s2 += dh * h[j];
                         }
                         for (std::size_t j = 0; j < c; ++j) {
                           const double dh = g[j] * gain.data()[j];
                           (*gx)[r * c + j] += inv_std[r] / n * (n * dh - s1 - h[j] * s2);
                         }
                       }
                     });
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
  require(p >= 0.0 && p < 1.0, "dropout: p must lie in [0, 1)");
  if (p == 0.0) return x;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 / (1.0 - p);
  std::vector<double> mask(x.numel());
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = u(rng) >= p ? keep : 0.0;
    out[i] = x.data()[i] * mask[i];
  }
  return make_result(x.shape(), std::move(out), "dropout", {x},
                     [x, mask = std::move(mask)](Node& self) {
                       if (auto* gx = grad_of(x.node_ptr()))
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           (*gx)[i] += self.grad[i] * mask[i];
                     });
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> indices) {
  require(table.rank() == 2, "embedding: table must be 2-D");
  const std::size_t v = table.dim(0), d = table.dim(1);
  std::vector<double> out(indices.size() * d);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto idx = indices[i];
    if (idx < 0 || static_cast<std::size_t>(idx) >= v)
      throw std::out_of_range("embedding: index " + std::to_string(idx) + " outside [0, " +
                              std::to_string(v) + ")");
    std::copy_n(table.data().begin() + static_cast<std::size_t>(idx) * d, d, out.begin() + i * d);
  }
  std::vector<std::int32_t> idx(indices.begin(), indices.end());
  return make_result({indices.size(), d}, std::move(out), "embedding", {table},
                     [table, d, idx = std::move(idx)](Node& self) {
                       auto* gt = grad_of(table.node_ptr());
                       if (!gt) return;
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t j = 0; j < d; ++j)
                           (*gt)[static_cast<std::size_t>(idx[i]) * d + j] += self.grad[i * d + j];
                     });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets) {
  require(logits.rank() == 2, "cross_entropy: logits must be [N, C]");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  require(targets.size() == n, "cross_entropy: " + std::to_string(targets.size()) +
                                   " targets for " + std::to_string(n) + " rows");
  require(n > 0, "cross_entropy: no rows");
  std::vector<double> probs(n * c);
  double total = 0.0;
  const auto in = logits.data();
  for (std::size_t r = 0; r < n; ++r) {
    const auto t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= c)
      throw std::out_of_range("cross_entropy: target " + std::to_string(t) + " outside [0, " +
                              std::to_string(c) + ")");
    const double* row = in.data() + r * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[r * c + j] = std::exp(row[j] - mx);
      z += probs[r * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[r * c + j] /= z;
    total += (mx + std::log(z)) - row[static_cast<std::size_t>(t)];
  }
  std::vector<std::int32_t> tg(targets.begin(), targets.end());
  return make_result({}, {total / static_cast<double>(n)}, "cross_entropy", {logits},
                     [logits, n, c, probs = std::move(probs), tg = std::move(tg)](Node& self) {
                       auto* gl = grad_of(logits.node_ptr());
                       if (!gl) return;
                       const double s = self.grad[0] / static_cast<double>(n);
                       for (std::size_t r = 0; r < n; ++r) {
                         for (std::size_t j = 0; j < c; ++j) (*gl)[r * c + j] += s * probs[r * c + j];
                         (*gl)[r * c + static_cast<std::size_t>(tg[r])] -= s;
                       }
                     });
}

Tensor add_axial_position(const Tensor& x, const Tensor& pos_t, const Tensor& pos_h,
                          const Tensor& pos_w) {
  require(x.rank() == 4, "add_axial_position: x must be [T,H,W,C]");
  const std::size_t T = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  require(C % 3 == 0, "add_axial_position: channel count must be a multiple of 3");
  const std::size_t d = C / 3;
  require(pos_t.shape() == Shape{T, d} && pos_h.shape() == Shape{H, d} && pos_w.shape() == Shape{W, d},
          "add_axial_position: tables must be [len, C/3] per axis");
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w) {
        double* o = out.data() + ((t * H + h) * W + w) * C;
        for (std::size_t j = 0; j < d; ++j) {
          o[j] += pos_t.data()[t * d + j];
          o[d + j] += pos_h.data()[h * d + j];
          o[2 * d + j] += pos_w.data()[w * d + j];
        }
      }
  return make_result(x.shape(), std::move(out), "add_axial_position", {x, pos_t, pos_h, pos_w},
                     [x, pos_t, pos_h, pos_w, T, H, W, C, d](Node& self) {
                       if (auto* gx = grad_of(x.node_ptr()))
                         for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
                       auto* gt = grad_of(pos_t.node_ptr());
                       auto* gh = grad_of(pos_h.node_ptr());
                       auto* gw = grad_of(pos_w.node_ptr());
                       for (std::size_t t = 0; t < T; ++t)
                         for (std::size_t h = 0; h < H; ++h)
                           for (std::size_t w = 0; w < W; ++w) {
                             const double* g = self.grad.data() + ((t * H + h) * W + w) * C;
                             for (std::size_t j = 0; j < d; ++j) {
                               if (gt) (*gt)[t * d + j] += g[j];
                               if (gh) (*gh)[h * d + j] += g[d + j];
                               if (gw) (*gw)[w * d + j] += g[2 * d + j];
                             }
                           }
                     });
}

Tensor raster_shift(const Tensor& x, const Tensor& start) {
  require(x.rank() == 4, "raster_shift: x must be [T,H,W,C]");
  const std::size_t C = x.dim(3);
  require(start.rank() == 1 && start.dim(0) == C, "raster_shift: start must be [C]");
  const std::size_t n = x.numel();
  std::vector<double> out(n);
  std::copy_n(start.data().begin(), C, out.begin());
  if (n > C) std::copy_n(x.data().begin(), n - C, out.begin() + C);
  return make_result(x.shape(), std::move(out), "raster_shift", {x, start},
                     [x, start, C, n](Node& self) {
                       if (auto* gx = grad_of(x.node_ptr()))
                         for (std::size_t i = C; i < n; ++i) (*gx)[i - C] += self.grad[i];
                       if (auto* gs = grad_of(start.node_ptr()))
                         for (std::size_t j = 0; j < C; ++j) (*gs)[j] += self.grad[j];
                     });
}

Tensor permute(const Tensor& x, std::span<const std::size_t> order) {
  const Shape& s = x.shape();
  require(order.size() == s.size(), "permute: order rank mismatch");
  const std::size_t r = s.size();
  Shape out_shape(r);
  std::vector<bool> used(r, false);
  for (std::size_t i = 0; i < r; ++i) {
    require(order[i] < r && !used[order[i]], "permute: order is not a permutation");
    used[order[i]] = true;
    out_shape[i] = s[order[i]];
  }
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * s[i];
  std::vector<double> out(x.numel());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < r; ++i) src += idx[i] * in_stride[order[i]];
    out[flat] = x.data()[src];
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return Tensor::from(std::move(out_shape), std::move(out));
}

}  // namespace vidbrain::nn
