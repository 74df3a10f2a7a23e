// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/synth/bold.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "vidbrain/io/checkpoint.hpp"

namespace vidbrain::synth {

void TrMatrix::push_row(std::size_t tr_index, std::span<const double> v) {
  if (v.size() != cols) throw std::invalid_argument("TrMatrix: row width mismatch");
  tr.push_back(tr_index);
  values.insert(values.end(), v.begin(), v.end());
}

std::vector<Run> split_runs(std::size_t n_trs, std::size_t n_runs) {
  if (n_runs == 0 || n_runs > n_trs) throw std::invalid_argument("split_runs: invalid run count");
  std::vector<Run> runs;
  for (std::size_t r = 0; r < n_runs; ++r) runs.push_back({r * n_trs / n_runs, (r + 1) * n_trs / n_runs});
  return runs;
}

TrMatrix zscore(const TrMatrix& m, const std::vector<Run>& runs, std::vector<bool>* degenerate) {
  TrMatrix out = m;
  std::vector<bool> flags(m.cols, false);
  for (const Run& run : runs) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < m.rows(); ++i)
      if (m.tr[i] >= run.begin && m.tr[i] < run.end) rows.push_back(i);
    if (rows.empty()) continue;
    if (rows.size() < 2) throw std::invalid_argument("zscore: run shorter than 2 rows");
    const double n = static_cast<double>(rows.size());
    for (std::size_t c = 0; c < m.cols; ++c) {
      double mean = 0.0;
      for (std::size_t i : rows) mean += m.at(i, c);
      mean /= n;
      double var = 0.0;
      for (std::size_t i : rows) var += (m.at(i, c) - mean) * (m.at(i, c) - mean);
      const double sd = std::sqrt(var / n);
      const bool flat = sd <= 1e-12 * std::max(1.0, std::abs(mean));
      if (flat) flags[c] = true;
      for (std::size_t i : rows) out.row(i)[c] = flat ? 0.0 : (m.at(i, c) - mean) / sd;
    }
  }
  if (degenerate) *degenerate = flags;
  return out;
}

TrMatrix parcel_average(const VoxelBlock& block) {
  if (block.labels.size() != block.voxels.cols) throw std::invalid_argument("parcel_average: labels do not cover voxels");
  std::vector<double> count(block.n_parcels, 0.0);
  for (std::size_t l : block.labels) {
    if (l >= block.n_parcels) throw std::invalid_argument("parcel_average: label out of range");
    count[l] += 1.0;
  }
  for (std::size_t p = 0; p < block.n_parcels; ++p)
    if (count[p] == 0.0) throw std::invalid_argument("parcel_average: parcel " + std::to_string(p) + " is empty");
  TrMatrix out;
  out.cols = block.n_parcels;
  out.tr = block.voxels.tr;
  out.values.assign(out.rows() * out.cols, 0.0);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t v = 0; v < block.voxels.cols; ++v) out.row(r)[block.labels[v]] += block.voxels.at(r, v);
    for (std::size_t p = 0; p < block.n_parcels; ++p) out.row(r)[p] /= count[p];
  }
  return out;
}

void TeacherSpec::validate() const {
  if (n_parcels == 0) throw std::invalid_argument("teacher: n_parcels must be > 0");
  if (!(density > 0 && density <= 1)) throw std::invalid_argument("teacher: density must be in (0, 1]");
  if (!(sigma >= 0)) throw std::invalid_argument("teacher: sigma must be >= 0");
  if (voxels_per_parcel == 0) throw std::invalid_argument("teacher: voxels_per_parcel must be > 0");
}

nlohmann::json TeacherSpec::to_json() const {
  return {{"seed", seed}, {"n_parcels", n_parcels}, {"density", density},
          {"sigma", sigma}, {"lag", lag}, {"voxels_per_parcel", voxels_per_parcel}};
}

TeacherSpec TeacherSpec::from_json(const nlohmann::json& j) {
  TeacherSpec t;
  t.seed = j.value("seed", t.seed);
  t.n_parcels = j.value("n_parcels", t.n_parcels);
  t.density = j.value("density", t.density);
  t.sigma = j.value("sigma", t.sigma);
  t.lag = j.value("lag", t.lag);
  t.voxels_per_parcel = j.value("voxels_per_parcel", t.voxels_per_parcel);
  return t;
}

std::vector<double> make_w_true(std::size_t p, const TeacherSpec& t) {
  t.validate();
  if (p == 0) throw std::invalid_argument("make_w_true: p must be > 0");
  std::mt19937_64 rng(t.seed);
  std::bernoulli_distribution keep(t.density);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any(0, p - 1);
  std::vector<double> w(p * t.n_parcels, 0.0);
  for (std::size_t c = 0; c < t.n_parcels; ++c) {
    bool nonzero = false;
    for (std::size_t r = 0; r < p; ++r)
      if (keep(rng)) {
        w[r * t.n_parcels + c] = g(rng);
        nonzero = nonzero || w[r * t.n_parcels + c] != 0.0;
      }
    if (!nonzero) w[any(rng) * t.n_parcels + c] = 1.0;
  }
  return w;
}

ParcelSeries gen_bold(const TrMatrix& features, const TeacherSpec& teacher, const std::vector<Run>& runs) {
  teacher.validate();
  if (features.rows() <= teacher.lag) throw std::invalid_argument("gen_bold: need more feature rows than the lag");
  const std::size_t p = features.cols, P = teacher.n_parcels, V = teacher.voxels_per_parcel;
  const std::vector<double> w = make_w_true(p, teacher);
  std::mt19937_64 rng(teacher.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> g(0.0, 1.0);
  const double voxel_sd = teacher.sigma * std::sqrt(static_cast<double>(V));

  std::unordered_map<std::size_t, std::size_t> row_of;
  for (std::size_t i = 0; i < features.rows(); ++i) row_of[features.tr[i]] = i;

  VoxelBlock block;
  block.n_parcels = P;
  block.voxels.cols = P * V;
  for (std::size_t v = 0; v < P * V; ++v) block.labels.push_back(v / V);
  std::vector<double> signal(P), voxels(P * V);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const std::size_t k = features.tr[i];
    if (k < teacher.lag) continue;
    if (std::none_of(runs.begin(), runs.end(), [k](const Run& r) { return k >= r.begin && k < r.end; })) continue;
    auto it = row_of.find(k - teacher.lag);
    if (it == row_of.end()) continue;
    const double* f = features.row(it->second);
    std::fill(signal.begin(), signal.end(), 0.0);
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < P; ++c) signal[c] += f[r] * w[r * P + c];
    for (std::size_t v = 0; v < P * V; ++v) voxels[v] = signal[v / V] + (voxel_sd > 0 ? voxel_sd * g(rng) : 0.0);
    block.voxels.push_row(k, voxels);
  }
  ParcelSeries s;
  s.runs = runs;
  s.y = zscore(parcel_average(block), runs);
  return s;
}

void write_parcel_csv(const std::filesystem::path& path, const ParcelSeries& s) {
  std::ostringstream out;
  out.precision(17);
  out << "tr";
  for (std::size_t c = 0; c < s.y.cols; ++c) out << ",parcel_" << c;
  out << "\n";
  for (std::size_t r = 0; r < s.y.rows(); ++r) {
    out << s.y.tr[r];
    for (std::size_t c = 0; c < s.y.cols; ++c) out << "," << s.y.at(r, c);
    out << "\n";
  }
  io::write_file(path, out.str());
  nlohmann::json side;
  side["n_parcels"] = s.y.cols;
  side["runs"] = nlohmann::json::array();
  for (const Run& r : s.runs) side["runs"].push_back({r.begin, r.end});
  io::write_file(path.string() + ".json", side.dump(2) + "\n");
}

ParcelSeries read_parcel_csv(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("parcel csv: empty file");
  ParcelSeries s;
  s.y.cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    s.y.tr.push_back(std::stoull(cell));
    std::size_t n = 0;
    while (std::getline(ls, cell, ',')) {
      s.y.values.push_back(std::stod(cell));
      ++n;
    }
    if (n != s.y.cols) throw std::runtime_error("parcel csv: ragged row");
  }
  const auto side = nlohmann::json::parse(io::read_file(path.string() + ".json"));
  for (const auto& r : side.at("runs")) s.runs.push_back({r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>()});
  return s;
}

}  // namespace vidbrain::synth
