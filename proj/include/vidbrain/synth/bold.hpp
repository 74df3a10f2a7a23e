// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

namespace vidbrain::synth {

/// Rows indexed by TR number, dense columns.
struct TrMatrix {
  std::vector<std::size_t> tr;
  std::size_t cols = 0;
  std::vector<double> values;  // [rows, cols]

  std::size_t rows() const { return tr.size(); }
  const double* row(std::size_t i) const { return values.data() + i * cols; }
  double* row(std::size_t i) { return values.data() + i * cols; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  void push_row(std::size_t tr_index, std::span<const double> v);
};

/// Half-open TR range [begin, end).
struct Run {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// `n_trs` TRs cut into `n_runs` contiguous runs of near-equal length.
std::vector<Run> split_runs(std::size_t n_trs, std::size_t n_runs);

struct ParcelSeries {
  TrMatrix y;
  std::vector<Run> runs;
};

struct VoxelBlock {
  TrMatrix voxels;
  std::vector<std::size_t> labels;  // voxel -> parcel id
  std::size_t n_parcels = 0;
};

/// Per column, per run: subtract the mean and divide by the population std.
/// Constant columns become zeros and are flagged in `degenerate` (per column,
/// set if any run is constant). Throws std::invalid_argument for a run with
/// fewer than 2 rows.
TrMatrix zscore(const TrMatrix& m, const std::vector<Run>& runs, std::vector<bool>* degenerate = nullptr);

/// Mean of member voxel columns per parcel. Throws std::invalid_argument
/// for an empty parcel or a label outside [0, n_parcels).
TrMatrix parcel_average(const VoxelBlock& block);

struct TeacherSpec {
  std::uint64_t seed = 0;  // draws W_true and the noise
  std::size_t n_parcels = 32;
  double density = 0.25;
  double sigma = 0.0;
  std::size_t lag = 3;
  std::size_t voxels_per_parcel = 4;

  void validate() const;
  nlohmann::json to_json() const;
  static TeacherSpec from_json(const nlohmann::json& j);
};

/// Sparse Gaussian weights [p, n_parcels]; every parcel column has at least
/// one nonzero entry.
std::vector<double> make_w_true(std::size_t p, const TeacherSpec& t);

/// Y[k] = F[k - lag] W_true + sigma * noise for every TR k inside a run whose
/// lagged feature row exists, realized as voxels_per_parcel noisy voxels averaged
/// per parcel, then z-scored per run. Throws std::invalid_argument when
/// features have no more rows than the lag.
ParcelSeries gen_bold(const TrMatrix& features, const TeacherSpec& teacher, const std::vector<Run>& runs);

/// CSV "tr,parcel_0,..." plus a sidecar JSON {"n_parcels", "runs"} at path + ".json".
void write_parcel_csv(const std::filesystem::path& path, const ParcelSeries& s);
ParcelSeries read_parcel_csv(const std::filesystem::path& path);

}  // namespace vidbrain::synth
