// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace vidbrain::bench {

/// One (axis value, subject, seed) cell. A failed cell carries NaN in the
/// numeric result fields.
struct ResultRow {
  std::string axis;
  std::string value;
  std::string subject;
  std::uint64_t seed = 0;
  double mean_r = 0.0;
  double max_r = 0.0;
  double final_loss = 0.0;
  double wall_clock_s = 0.0;
  std::string fingerprint;

  bool failed() const;
};

/// Field-wise equality; NaN equals NaN.
bool same_row(const ResultRow& a, const ResultRow& b);
bool same_rows(const std::vector<ResultRow>& a, const std::vector<ResultRow>& b);

inline constexpr const char* kResultsHeader =
    "axis,value,subject,seed,mean_r,max_r,final_loss,wall_clock_s,fingerprint";

/// Extra sweep facts for the JSON report.
struct SweepMeta {
  std::string axis;
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> subjects;
  nlohmann::json extra = nlohmann::json::object();  // per-value notes, failures, base config
};

std::string rows_csv(const std::vector<ResultRow>& rows);
/// Throws std::invalid_argument on a wrong header or malformed line.
std::vector<ResultRow> parse_rows_csv(const std::string& text);

nlohmann::json rows_json(const std::vector<ResultRow>& rows, const SweepMeta& meta);
std::vector<ResultRow> parse_rows_json(const nlohmann::json& j);

/// Per value: mean over seeds of mean_r for each subject, and the
/// across-seed spread (min, max, population std) of the subject-averaged r.
nlohmann::json summarize(const std::vector<ResultRow>& rows, const SweepMeta& meta);

/// "value,mean_r,std_r,min_r,max_r,n_seeds", one line per axis value.
std::string plot_csv(const std::vector<ResultRow>& rows, const SweepMeta& meta);

struct EmitOptions {
  bool csv = true;
  bool json = true;
  bool plot_data = true;
};

/// Writes results.csv, results.json and plot_<axis>.csv into `dir`.
/// Throws std::invalid_argument for no rows and std::runtime_error when a
/// file cannot be written.
void emit_report(const std::vector<ResultRow>& rows, const SweepMeta& meta, const std::filesystem::path& dir,
                 const EmitOptions& options = {});

}  // namespace vidbrain::bench
