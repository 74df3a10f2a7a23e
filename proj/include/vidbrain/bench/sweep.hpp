// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vidbrain/bench/config.hpp"
#include "vidbrain/bench/results.hpp"
#include "vidbrain/encoding/report.hpp"
#include "vidbrain/synth/dataset.hpp"
#include "vidbrain/trainer/stages.hpp"
#include "vidbrain/vqvae/window_cache.hpp"

namespace vidbrain::bench {

enum class Axis { kDataSize, kHiddenDim, kLayers, kHeads, kPrecision };

std::string_view axis_name(Axis a);
/// Throws std::invalid_argument for an unknown axis name.
Axis parse_axis(std::string_view s);

/// Desk-scale defaults: data_size {200, 800, 3200}; hidden_dim {6, 15, 30,
/// 48}; layers {1, 2, 4}; heads {1, 2, 4}; precision {single, mixed-half}.
std::vector<std::string> default_values(Axis a);

struct SweepSpec {
  Axis axis = Axis::kDataSize;
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  RunConfig base;

  /// Domain checks per axis; throws std::invalid_argument.
  void validate() const;
  /// `base` with the axis value and seed applied and resolved.
  RunConfig cell_config(const std::string& value, std::uint64_t seed) const;
};

/// Stage-2 outcome of one configuration.
struct CellOutcome {
  std::vector<encoding::EncodingReport> reports;  // one per subject
  trainer::TrainResult training;
  std::size_t prior_parameters = 0;
  double wall_clock_s = 0.0;
};

/// Caches everything shared across sweep cells: the training pool, the
/// stimulus, stage-1 models per data condition, their window encodings and
/// the teacher-derived BOLD per subject.
class Pipeline {
 public:
  /// `log` receives one line per major step (may be empty).
  explicit Pipeline(std::function<void(const std::string&)> log = {});

  const synth::ClipPool& pool(const RunConfig& cfg);
  const synth::FrameStream& stimulus(const RunConfig& cfg);
  /// Pool sample indices used by cfg (a nested subsample of the pool).
  std::vector<std::size_t> samples(const RunConfig& cfg);
  /// Stream windows touched by those samples, ascending.
  std::vector<std::size_t> sample_windows(const RunConfig& cfg);
  /// The samples as (context, target) entries of pool_cache(cfg).
  std::vector<trainer::PriorSample> prior_samples(const RunConfig& cfg);

  const vqvae::Vqvae& stage1(const RunConfig& cfg);
  const trainer::TrainResult& stage1_log(const RunConfig& cfg);
  const vqvae::WindowCache& pool_cache(const RunConfig& cfg);
  const vqvae::WindowCache& stimulus_cache(const RunConfig& cfg);

  /// Teacher features (pooled, aligned to TRs with no delay).
  const synth::TrMatrix& teacher_features(const RunConfig& cfg);
  /// BOLD per subject, in cfg.subjects order.
  const std::vector<synth::ParcelSeries>& bold(const RunConfig& cfg);

  /// Trains stage 2 for `cfg` (stage 1 from cache), then taps, aligns and
  /// encodes every subject. Divergence is reported in `training`.
  CellOutcome run_cell(const RunConfig& cfg, prior::Prior* trained = nullptr);

  /// Encoding of an already trained prior for every subject.
  std::vector<encoding::EncodingReport> encode_all(const RunConfig& cfg, const prior::Prior& model);

 private:
  struct Stage1 {
    vqvae::Vqvae model;
    trainer::TrainResult log;
    std::optional<vqvae::WindowCache> pool_cache, stimulus_cache;
  };
  Stage1& stage1_entry(const RunConfig& cfg);
  std::string pool_key(const RunConfig& cfg) const;
  std::string stage1_key(const RunConfig& cfg) const;
  std::string teacher_key(const RunConfig& cfg) const;
  void say(const std::string& s) const;

  std::function<void(const std::string&)> log_;
  std::map<std::string, synth::ClipPool> pools_;
  std::map<std::string, synth::FrameStream> stimuli_;
  std::map<std::string, std::unique_ptr<Stage1>> stage1_;
  std::map<std::string, synth::TrMatrix> teacher_;
  std::map<std::string, std::vector<synth::ParcelSeries>> bold_;
};

/// Teacher-side config: full pool, teacher seeds and training options.
RunConfig teacher_config(const RunConfig& cfg);

/// Number of stimulus frames for n_trs TRs.
std::size_t stimulus_frames(const RunConfig& cfg);

struct SweepOutput {
  std::vector<ResultRow> rows;
  SweepMeta meta;
};

/// Runs every (value, seed) cell and returns rows ordered by (value index,
/// subject, seed). Failed cells become NaN rows with the error in the
/// metadata.
SweepOutput run_sweep(const SweepSpec& spec, Pipeline& pipeline);

std::string subject_name(std::uint64_t subject_seed);

}  // namespace vidbrain::bench
