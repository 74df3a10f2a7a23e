// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/vqvae/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vidbrain/simd/kernels.hpp"

namespace vidbrain::vqvae {

CodebookState CodebookState::empty(std::size_t n_codes, std::size_t dim) {
  CodebookState b;
  b.n_codes = n_codes;
  b.dim = dim;
  b.embeddings.assign(n_codes * dim, 0.0);
  b.N.assign(n_codes, 0.0);
  b.z_avg.assign(n_codes * dim, 0.0);
  return b;
}

Quantized quantize(std::span<const double> z_e, const CodebookState& book) {
  if (book.n_codes == 0 || book.dim == 0) throw std::invalid_argument("quantize: empty codebook");
  if (z_e.size() % book.dim != 0)
    throw std::invalid_argument("quantize: latent width does not match embedding_dim " +
                                std::to_string(book.dim));
  const std::size_t rows = z_e.size() / book.dim, D = book.dim;
  Quantized q;
  q.codes.resize(rows);
  q.z_q.resize(z_e.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = z_e.data() + r * D;
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < book.n_codes; ++k) {
      const double* e = book.embeddings.data() + k * D;
      double d = 0.0;
      for (std::size_t c = 0; c < D; ++c) {
        const double diff = z[c] - e[c];
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        arg = k;
      }
    }
    q.codes[r] = static_cast<std::int32_t>(arg);
    std::copy_n(book.embeddings.data() + arg * D, D, q.z_q.data() + r * D);
  }
  return q;
}

std::vector<double> sample_rows(std::span<const double> z_e, std::size_t dim, std::size_t n_codes,
                                nn::Rng& rng) {
  const std::size_t rows = z_e.size() / dim;
  if (rows == 0) throw std::invalid_argument("sample_rows: empty batch");
  std::vector<double> pool(z_e.begin(), z_e.end());
  std::size_t pool_rows = rows;
  if (rows < n_codes) {
    const std::size_t repeats = (n_codes + rows - 1) / rows;
    const double sd = 0.01 / std::sqrt(static_cast<double>(dim));
    std::normal_distribution<double> noise(0.0, sd);
    pool.resize(repeats * rows * dim);
    for (std::size_t r = 0; r < repeats; ++r)
      for (std::size_t i = 0; i < rows * dim; ++i) pool[r * rows * dim + i] = z_e[i] + noise(rng);
    pool_rows = repeats * rows;
  }
  std::vector<std::size_t> perm(pool_rows);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> out(n_codes * dim);
  for (std::size_t k = 0; k < n_codes; ++k)
    std::copy_n(pool.data() + perm[k] * dim, dim, out.data() + k * dim);
  return out;
}

void init_from_data(CodebookState& book, std::span<const double> z_e, nn::Rng& rng) {
  book.embeddings = sample_rows(z_e, book.dim, book.n_codes, rng);
  book.z_avg = book.embeddings;
  book.N.assign(book.n_codes, 1.0);
  book.initialized = true;
}

void ema_update(CodebookState& book, std::span<const double> z_e, std::span<const std::int32_t> codes,
                nn::Rng& rng, const EmaOptions& opt) {
  const std::size_t D = book.dim, K = book.n_codes;
  if (codes.empty()) throw std::invalid_argument("ema_update: empty batch");
  if (z_e.size() != codes.size() * D) throw std::invalid_argument("ema_update: z_e/codes size mismatch");

  std::vector<double> n_total(K, 0.0), encode_sum(K * D, 0.0);
  for (std::size_t r = 0; r < codes.size(); ++r) {
    const auto k = static_cast<std::size_t>(codes[r]);
    if (k >= K) throw std::out_of_range("ema_update: code index out of range");
    n_total[k] += 1.0;
    simd::kernels().axpy(1.0, z_e.data() + r * D, encode_sum.data() + k * D, D);
  }
  const double a = opt.decay, b = 1.0 - opt.decay;
  for (std::size_t k = 0; k < K; ++k) book.N[k] = a * book.N[k] + b * n_total[k];
  for (std::size_t i = 0; i < K * D; ++i) book.z_avg[i] = a * book.z_avg[i] + b * encode_sum[i];

  const double n = std::accumulate(book.N.begin(), book.N.end(), 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const double w = (book.N[k] + opt.eps) / (n + static_cast<double>(K) * opt.eps) * n;
    for (std::size_t c = 0; c < D; ++c) book.embeddings[k * D + c] = book.z_avg[k * D + c] / w;
  }

  const std::vector<double> fresh = sample_rows(z_e, D, K, rng);
  for (std::size_t k = 0; k < K; ++k)
    if (book.N[k] < 1.0) std::copy_n(fresh.data() + k * D, D, book.embeddings.data() + k * D);
}

}  // namespace vidbrain::vqvae
