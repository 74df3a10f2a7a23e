// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "vidbrain/synth/bold.hpp"

namespace vidbrain::encoding {

/// One feature vector per window with the window's center time.
struct FeatureSequence {
  std::size_t dim = 0;
  std::vector<double> centers;  // seconds
  std::vector<double> values;   // [n_windows, dim]

  std::size_t size() const { return centers.size(); }
  const double* row(std::size_t i) const { return values.data() + i * dim; }
};

/// Averages the windows whose centers fall in [k TR, (k+1) TR) into TR row
/// k, then shifts by `delay_trs`: output row k carries TR k - delay_trs.
/// TRs without windows are absent. Throws std::invalid_argument for
/// tr_seconds <= 0 and when no row survives.
synth::TrMatrix align_to_tr(const FeatureSequence& features, double tr_seconds, std::size_t delay_trs);

}  // namespace vidbrain::encoding
