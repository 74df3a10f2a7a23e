// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vidbrain/nn/ops.hpp"

namespace vidbrain::vqvae {

/// Code vectors plus the EMA statistics that maintain them.
struct CodebookState {
  std::size_t n_codes = 0;
  std::size_t dim = 0;
  std::vector<double> embeddings;  // [n_codes, dim]
  std::vector<double> N;           // [n_codes]
  std::vector<double> z_avg;       // [n_codes, dim]
  bool initialized = false;

  static CodebookState empty(std::size_t n_codes, std::size_t dim);
};

struct Quantized {
  std::vector<std::int32_t> codes;  // one per row of z_e
  std::vector<double> z_q;          // looked-up embeddings, same layout as z_e
};

/// Nearest code by squared Euclidean distance for every row of z_e[rows, dim].
/// Ties go to the lower index. Throws std::invalid_argument on an empty book.
Quantized quantize(std::span<const double> z_e, const CodebookState& book);

/// Rows of z_e, tiled with small noise when there are fewer rows than codes,
/// then shuffled; the first n_codes rows are returned.
std::vector<double> sample_rows(std::span<const double> z_e, std::size_t dim, std::size_t n_codes,
                                nn::Rng& rng);

/// Data-dependent init: embeddings drawn from z_e rows, z_avg = embeddings, N = 1.
void init_from_data(CodebookState& book, std::span<const double> z_e, nn::Rng& rng);

struct EmaOptions {
  double decay = 0.99;
  double eps = 1e-7;
};

/// One EMA step:
///   N     <- decay N + (1 - decay) n_total
///   z_avg <- decay z_avg + (1 - decay) encode_sum
///   w_k    = (N_k + eps) / (n + K eps) * n,  n = sum_k N_k
///   e_k    = z_avg_k / w_k
/// then every code with N_k < 1 gets a row sampled from the batch.
/// Throws std::invalid_argument on an empty batch.
void ema_update(CodebookState& book, std::span<const double> z_e, std::span<const std::int32_t> codes,
                nn::Rng& rng, const EmaOptions& opt = {});

}  // namespace vidbrain::vqvae
