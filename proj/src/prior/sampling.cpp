// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/prior/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vidbrain::prior {

std::int32_t sample_categorical(std::span<const double> logits, double temperature, nn::Rng& rng) {
  if (!(temperature > 0)) throw std::invalid_argument("sample: temperature must be > 0");
  if (logits.empty()) throw std::invalid_argument("sample: empty logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp((logits[i] - mx) / temperature);
  std::discrete_distribution<std::int32_t> pick(w.begin(), w.end());
  return pick(rng);
}

std::vector<std::int32_t> sample(const Prior& model, std::span<const std::int32_t> prefix, double temperature,
                                 nn::Rng& rng, const nn::Tensor* context) {
  if (!(temperature > 0)) throw std::invalid_argument("sample: temperature must be > 0");
  const PriorConfig& cfg = model.config();
  const std::size_t L = cfg.positions(), C = cfg.n_codes;
  if (prefix.size() > L) throw std::invalid_argument("sample: prefix longer than the grid");
  std::vector<std::int32_t> codes(L, 0);
  std::copy(prefix.begin(), prefix.end(), codes.begin());
  nn::NoGradGuard guard;
  for (std::size_t i = prefix.size(); i < L; ++i) {
    const nn::Tensor logits = model.forward_logits(codes, context, Mode::kInfer);
    codes[i] = sample_categorical(logits.data().subspan(i * C, C), temperature, rng);
  }
  return codes;
}

}  // namespace vidbrain::prior
