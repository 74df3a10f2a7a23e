// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/encoding/alignment.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace vidbrain::encoding {

synth::TrMatrix align_to_tr(const FeatureSequence& features, double tr_seconds, std::size_t delay_trs) {
  if (!(tr_seconds > 0.0)) throw std::invalid_argument("align_to_tr: tr_seconds must be > 0");
  std::map<std::size_t, std::pair<std::vector<double>, std::size_t>> bins;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double t = features.centers[i];
    if (!(t >= 0.0)) continue;
    const auto k = static_cast<std::size_t>(std::floor(t / tr_seconds));
    auto& [sum, count] = bins[k];
    if (sum.empty()) sum.assign(features.dim, 0.0);
    for (std::size_t c = 0; c < features.dim; ++c) sum[c] += features.row(i)[c];
    ++count;
  }
  synth::TrMatrix out;
  out.cols = features.dim;
  for (auto& [k, entry] : bins) {
    auto& [sum, count] = entry;
    for (double& v : sum) v /= static_cast<double>(count);
    out.push_row(k + delay_trs, sum);
  }
  if (out.rows() == 0) throw std::invalid_argument("align_to_tr: no window falls inside any TR");
  return out;
}

}  // namespace vidbrain::encoding
