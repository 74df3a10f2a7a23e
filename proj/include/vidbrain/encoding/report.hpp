// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "vidbrain/encoding/ridge.hpp"
#include "vidbrain/synth/bold.hpp"

namespace vidbrain::encoding {

struct ParcelResult {
  std::size_t parcel = 0;
  double lambda = 0.0;
  double r = 0.0;
  bool degenerate = false;
};

struct EncodingReport {
  std::string subject;
  std::vector<ParcelResult> parcels;
  double max_r = 0.0;
  double mean_r = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::string tap;
  std::size_t delay_trs = 0;
  std::vector<std::size_t> train_trs, test_trs;
};

struct EncodeOptions {
  std::uint64_t split_seed = 0;
  std::vector<double> grid = default_lambda_grid();
  double train_fraction = 0.9;
  std::string subject = "sub-00";
  std::string tap;
  std::size_t delay_trs = 3;
};

/// Joins X and Y on TR index, splits rows 90/10 by a seeded shuffle,
/// standardizes X columns with training statistics, then per parcel picks
/// lambda by LOO on the training rows, fits, and scores Pearson r on the
/// test rows. Throws std::invalid_argument for fewer than 10 shared rows.
EncodingReport encode_subject(const synth::TrMatrix& x, const synth::ParcelSeries& y, const EncodeOptions& options);

/// "subject,parcel,lambda,r" rows.
std::string report_csv(const std::vector<EncodingReport>& reports);
nlohmann::json report_summary(const EncodingReport& r);
/// Writes `stem`.csv and `stem`.json.
void write_report(const std::filesystem::path& stem, const EncodingReport& r);

}  // namespace vidbrain::encoding
