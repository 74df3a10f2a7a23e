// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/bench/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <tuple>

#include "vidbrain/encoding/alignment.hpp"
#include "vidbrain/encoding/features.hpp"

namespace vidbrain::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t parse_size(const std::string& s, const char* what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || s[0] == '-')
    throw std::invalid_argument(std::string(what) + " value '" + s + "' is not a non-negative integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::string_view axis_name(Axis a) {
  switch (a) {
    case Axis::kDataSize: return "data_size";
    case Axis::kHiddenDim: return "hidden_dim";
    case Axis::kLayers: return "layers";
    case Axis::kHeads: return "heads";
    case Axis::kPrecision: return "precision";
  }
  return "?";
}

Axis parse_axis(std::string_view s) {
  for (Axis a : {Axis::kDataSize, Axis::kHiddenDim, Axis::kLayers, Axis::kHeads, Axis::kPrecision})
    if (axis_name(a) == s) return a;
  throw std::invalid_argument("unknown axis '" + std::string(s) +
                              "' (expected data_size, hidden_dim, layers, heads or precision)");
}

std::vector<std::string> default_values(Axis a) {
  switch (a) {
    case Axis::kDataSize: return {"200", "800", "3200"};
    case Axis::kHiddenDim: return {"6", "15", "30", "48"};
    case Axis::kLayers: return {"1", "2", "4"};
    case Axis::kHeads: return {"1", "2", "4"};
    case Axis::kPrecision: return {"single", "mixed-half"};
  }
  return {};
}

void SweepSpec::validate() const {
  if (values.empty()) throw std::invalid_argument("sweep: no axis values");
  if (seeds.empty()) throw std::invalid_argument("sweep: no seeds");
  std::set<std::string> seen;
  for (const std::string& v : values) {
    if (!seen.insert(v).second) throw std::invalid_argument("sweep: duplicate value '" + v + "'");
    switch (axis) {
      case Axis::kDataSize: {
        const std::size_t n = parse_size(v, "data_size");
        if (n == 0 || n > base.pool_size)
          throw std::invalid_argument("data_size " + v + " must lie in [1, " + std::to_string(base.pool_size) + "]");
        break;
      }
      case Axis::kHiddenDim: {
        const std::size_t h = parse_size(v, "hidden_dim");
        if (h % 3 != 0 || h <= 3)
          throw std::invalid_argument("hidden_dim " + v + " must be a multiple of 3 and greater than 3");
        break;
      }
      case Axis::kLayers: {
        const std::size_t l = parse_size(v, "layers");
        if (l != 1 && l != 2 && l != 4 && l != 8 && l != 16)
          throw std::invalid_argument("layers " + v + " must be one of 1, 2, 4, 8, 16");
        break;
      }
      case Axis::kHeads: {
        const std::size_t h = parse_size(v, "heads");
        if (h != 1 && h != 2 && h != 4 && h != 8) throw std::invalid_argument("heads " + v + " must be one of 1, 2, 4, 8");
        break;
      }
      case Axis::kPrecision:
        nn::parse_precision(v);
        break;
    }
  }
  for (const std::string& v : values) cell_config(v, seeds.front());
}

RunConfig SweepSpec::cell_config(const std::string& value, std::uint64_t seed) const {
  RunConfig c = base;
  c.seed = seed;
  switch (axis) {
    case Axis::kDataSize:
      c.data_size = parse_size(value, "data_size");
      break;
    case Axis::kHiddenDim:
      // 15 is odd, so the whole axis runs single-head to stay comparable.
      c.prior.hidden_dim = parse_size(value, "hidden_dim");
      c.prior.heads = 1;
      break;
    case Axis::kLayers:
      c.prior.layers = parse_size(value, "layers");
      if (base.tap.empty()) c.tap = prior::post_fc_tap(c.prior.layers - 1);
      break;
    case Axis::kHeads:
      c.prior.heads = parse_size(value, "heads");
      break;
    case Axis::kPrecision:
      c.precision = value;
      break;
  }
  c.resolve();
  return c;
}

std::size_t stimulus_frames(const RunConfig& cfg) {
  const double frames = static_cast<double>(cfg.stimulus.n_trs) * cfg.stimulus.tr_seconds * cfg.scene.fps;
  const auto windows = static_cast<std::size_t>(std::ceil(frames / static_cast<double>(synth::kWindowFrames)));
  return std::max<std::size_t>(1, windows) * synth::kWindowFrames;
}

RunConfig teacher_config(const RunConfig& cfg) {
  RunConfig t = cfg;
  t.seed = cfg.teacher_seed + 1;
  t.precision = "single";
  t.stage1_precision = "single";
  t.prior = cfg.teacher_prior;
  t.prior_train = cfg.teacher_train;
  t.data_size = cfg.pool_size;
  t.tap.clear();
  t.reducer = "pool";
  t.delay_trs = 0;
  t.resolve();
  return t;
}

std::string subject_name(std::uint64_t subject_seed) {
  std::string n = std::to_string(subject_seed);
  if (n.size() < 2) n.insert(0, 2 - n.size(), '0');
  return "sub-" + n;
}

Pipeline::Pipeline(std::function<void(const std::string&)> log) : log_(std::move(log)) {}

void Pipeline::say(const std::string& s) const {
  if (log_) log_(s);
}

std::string Pipeline::pool_key(const RunConfig& cfg) const {
  return nlohmann::json{{"scene", cfg.scene.to_json()}, {"pool_size", cfg.pool_size}}.dump();
}

std::string Pipeline::stage1_key(const RunConfig& cfg) const {
  return nlohmann::json{{"pool", pool_key(cfg)},
                        {"vqvae", cfg.vqvae.to_json()},
                        {"train", cfg.vqvae_train.to_json()},
                        {"seed", cfg.vqvae_seed},
                        {"data_size", cfg.data_size},
                        {"data_seed", cfg.data_seed},
                        {"precision", cfg.stage1_precision}}
      .dump();
}

std::string Pipeline::teacher_key(const RunConfig& cfg) const {
  const RunConfig t = teacher_config(cfg);
  return nlohmann::json{{"stage1", stage1_key(t)},
                        {"prior", t.prior.to_json()},
                        {"train", t.prior_train.to_json()},
                        {"seed", t.seed},
                        {"stimulus", cfg.stimulus.to_json()}}
      .dump();
}

const synth::ClipPool& Pipeline::pool(const RunConfig& cfg) {
  const std::string key = pool_key(cfg);
  auto it = pools_.find(key);
  if (it == pools_.end()) {
    say("generating pool of " + std::to_string(cfg.pool_size) + " clips");
    it = pools_.emplace(key, synth::make_pool(cfg.scene, cfg.pool_size)).first;
  }
  return it->second;
}

const synth::FrameStream& Pipeline::stimulus(const RunConfig& cfg) {
  const std::string key = nlohmann::json{{"scene", cfg.scene.to_json()}, {"stimulus", cfg.stimulus.to_json()}}.dump();
  auto it = stimuli_.find(key);
  if (it == stimuli_.end()) {
    synth::SynthSceneSpec s = cfg.scene;
    s.seed = cfg.stimulus.seed;
    const std::size_t n = stimulus_frames(cfg);
    say("generating stimulus of " + std::to_string(n) + " frames");
    it = stimuli_.emplace(key, synth::gen_video(s, n)).first;
  }
  return it->second;
}

std::vector<std::size_t> Pipeline::samples(const RunConfig& cfg) {
  return synth::subsample(pool(cfg).size(), cfg.data_size, cfg.data_seed);
}

std::vector<std::size_t> Pipeline::sample_windows(const RunConfig& cfg) {
  const synth::ClipPool& p = pool(cfg);
  std::set<std::size_t> w;
  for (std::size_t s : samples(cfg)) {
    w.insert(p.context_window(s));
    w.insert(p.target_window(s));
  }
  return {w.begin(), w.end()};
}

std::vector<trainer::PriorSample> Pipeline::prior_samples(const RunConfig& cfg) {
  const synth::ClipPool& p = pool(cfg);
  const std::vector<std::size_t> windows = sample_windows(cfg);
  auto entry = [&](std::size_t w) {
    return static_cast<std::size_t>(std::lower_bound(windows.begin(), windows.end(), w) - windows.begin());
  };
  std::vector<trainer::PriorSample> out;
  for (std::size_t s : samples(cfg)) out.push_back({entry(p.context_window(s)), entry(p.target_window(s))});
  return out;
}

Pipeline::Stage1& Pipeline::stage1_entry(const RunConfig& cfg) {
  const std::string key = stage1_key(cfg);
  auto it = stage1_.find(key);
  if (it != stage1_.end()) return *it->second;
  const synth::ClipPool& p = pool(cfg);
  const std::vector<std::size_t> windows = sample_windows(cfg);
  say("training VQ-VAE (seed " + std::to_string(cfg.vqvae_seed) + ") on " + std::to_string(windows.size()) +
      " windows");
  auto s = std::make_unique<Stage1>(Stage1{vqvae::Vqvae::init(cfg.vqvae, cfg.vqvae_seed), {}, {}, {}});
  s->log = trainer::train_vqvae(s->model, p.stream, windows,
                                train_options(cfg.vqvae_train, cfg.stage1_policy(), cfg.vqvae_seed));
  if (s->log.diverged) throw std::runtime_error("VQ-VAE training diverged: " + s->log.error);
  return *stage1_.emplace(key, std::move(s)).first->second;
}

const vqvae::Vqvae& Pipeline::stage1(const RunConfig& cfg) { return stage1_entry(cfg).model; }

const trainer::TrainResult& Pipeline::stage1_log(const RunConfig& cfg) { return stage1_entry(cfg).log; }

const vqvae::WindowCache& Pipeline::pool_cache(const RunConfig& cfg) {
  Stage1& s = stage1_entry(cfg);
  if (!s.pool_cache) {
    const std::vector<std::size_t> windows = sample_windows(cfg);
    say("encoding " + std::to_string(windows.size()) + " pool windows");
    s.pool_cache = vqvae::encode_windows(s.model, pool(cfg).stream, windows);
  }
  return *s.pool_cache;
}

const vqvae::WindowCache& Pipeline::stimulus_cache(const RunConfig& cfg) {
  Stage1& s = stage1_entry(cfg);
  if (!s.stimulus_cache) {
    const synth::FrameStream& st = stimulus(cfg);
    say("encoding " + std::to_string(st.n_windows()) + " stimulus windows");
    s.stimulus_cache = vqvae::encode_windows(s.model, st, 0, st.n_windows());
  }
  return *s.stimulus_cache;
}

const synth::TrMatrix& Pipeline::teacher_features(const RunConfig& cfg) {
  const std::string key = teacher_key(cfg);
  auto it = teacher_.find(key);
  if (it != teacher_.end()) return it->second;
  const RunConfig t = teacher_config(cfg);
  const vqvae::Vqvae& vq = stage1(t);
  prior::Prior model = prior::Prior::init(t.prior, vq.codebook().embeddings, t.seed);
  say("training teacher prior on " + std::to_string(t.data_size) + " samples");
  const trainer::TrainResult r =
      trainer::train_prior(model, pool_cache(t), prior_samples(t), train_options(t.prior_train, t.policy(), t.seed));
  if (r.diverged) throw std::runtime_error("teacher prior training diverged: " + r.error);
  const encoding::FeatureSequence f = encoding::extract_features(
      model, stimulus_cache(t), stimulus(t), t.resolved_tap(), encoding::parse_reducer(t.reducer));
  return teacher_.emplace(key, encoding::align_to_tr(f, t.stimulus.tr_seconds, 0)).first->second;
}

const std::vector<synth::ParcelSeries>& Pipeline::bold(const RunConfig& cfg) {
  const std::string key =
      nlohmann::json{{"teacher", teacher_key(cfg)}, {"bold", cfg.bold.to_json()}, {"subjects", cfg.subjects}}.dump();
  auto it = bold_.find(key);
  if (it != bold_.end()) return it->second;
  const synth::TrMatrix& f = teacher_features(cfg);
  const std::vector<synth::Run> runs = synth::split_runs(cfg.stimulus.n_trs, cfg.stimulus.runs);
  std::vector<synth::ParcelSeries> out;
  for (std::uint64_t subject : cfg.subjects) {
    synth::TeacherSpec spec = cfg.bold;
    spec.seed = subject;
    out.push_back(synth::gen_bold(f, spec, runs));
  }
  return bold_.emplace(key, std::move(out)).first->second;
}

std::vector<encoding::EncodingReport> Pipeline::encode_all(const RunConfig& cfg, const prior::Prior& model) {
  const std::vector<synth::ParcelSeries>& ys = bold(cfg);
  const encoding::FeatureSequence f = encoding::extract_features(
      model, stimulus_cache(cfg), stimulus(cfg), cfg.resolved_tap(), encoding::parse_reducer(cfg.reducer));
  const synth::TrMatrix x = encoding::align_to_tr(f, cfg.stimulus.tr_seconds, cfg.delay_trs);
  std::vector<encoding::EncodingReport> reports;
  for (std::size_t k = 0; k < cfg.subjects.size(); ++k) {
    encoding::EncodeOptions o;
    o.split_seed = cfg.split_seed;
    o.grid = cfg.lambda_grid;
    o.subject = subject_name(cfg.subjects[k]);
    o.tap = cfg.resolved_tap();
    o.delay_trs = cfg.delay_trs;
    reports.push_back(encoding::encode_subject(x, ys[k], o));
  }
  return reports;
}

CellOutcome Pipeline::run_cell(const RunConfig& cfg, prior::Prior* trained) {
  // Shared inputs first so their cost stays out of the cell timing.
  const vqvae::Vqvae& vq = stage1(cfg);
  const vqvae::WindowCache& cache = pool_cache(cfg);
  stimulus_cache(cfg);
  bold(cfg);

  const auto t1 = Clock::now();
  CellOutcome out;
  prior::Prior model = prior::Prior::init(cfg.prior, vq.codebook().embeddings, cfg.seed);
  out.prior_parameters = model.parameter_count();
  say("training prior (" + std::string(cfg.precision) + ", seed " + std::to_string(cfg.seed) + ", " +
      std::to_string(cfg.data_size) + " samples)");
  out.training = trainer::train_prior(model, cache, prior_samples(cfg),
                                      train_options(cfg.prior_train, cfg.policy(), cfg.seed));
  if (!out.training.diverged) out.reports = encode_all(cfg, model);
  out.wall_clock_s = seconds_since(t1);
  if (trained) *trained = std::move(model);
  return out;
}

SweepOutput run_sweep(const SweepSpec& spec, Pipeline& pipeline) {
  spec.validate();
  struct Keyed {
    std::size_t value, subject, seed;
    ResultRow row;
  };
  std::vector<Keyed> cells;
  SweepOutput out;
  out.meta.axis = std::string(axis_name(spec.axis));
  out.meta.values = spec.values;
  out.meta.seeds = spec.seeds;
  for (std::uint64_t s : spec.base.subjects) out.meta.subjects.push_back(subject_name(s));
  out.meta.extra["base_config"] = spec.base.to_json();
  out.meta.extra["tool_version"] = kToolVersion;
  out.meta.extra["failures"] = nlohmann::json::array();
  out.meta.extra["prior_parameters"] = nlohmann::json::object();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t vi = 0; vi < spec.values.size(); ++vi) {
    for (std::size_t si = 0; si < spec.seeds.size(); ++si) {
      const RunConfig cfg = spec.cell_config(spec.values[vi], spec.seeds[si]);
      ResultRow proto;
      proto.axis = out.meta.axis;
      proto.value = spec.values[vi];
      proto.seed = spec.seeds[si];
      proto.fingerprint = cfg.fingerprint();
      std::string error;
      CellOutcome cell;
      try {
        cell = pipeline.run_cell(cfg);
        if (cell.training.diverged) error = "diverged: " + cell.training.error;
      } catch (const std::exception& e) {
        error = e.what();
      }
      if (cell.prior_parameters) out.meta.extra["prior_parameters"][spec.values[vi]] = cell.prior_parameters;
      proto.final_loss = cell.training.epochs.empty() ? nan : cell.training.epochs.back().loss;
      proto.wall_clock_s = cfg.record_wall_clock ? cell.wall_clock_s : 0.0;
      if (!error.empty()) {
        out.meta.extra["failures"].push_back({{"value", spec.values[vi]}, {"seed", spec.seeds[si]}, {"error", error}});
        proto.final_loss = nan;
      }
      for (std::size_t k = 0; k < cfg.subjects.size(); ++k) {
        ResultRow r = proto;
        r.subject = subject_name(cfg.subjects[k]);
        if (error.empty()) {
          r.mean_r = cell.reports[k].mean_r;
          r.max_r = cell.reports[k].max_r;
        } else {
          r.mean_r = r.max_r = nan;
        }
        cells.push_back({vi, k, si, std::move(r)});
      }
    }
  }
  std::stable_sort(cells.begin(), cells.end(), [](const Keyed& a, const Keyed& b) {
    return std::tie(a.value, a.subject, a.seed) < std::tie(b.value, b.subject, b.seed);
  });
  for (Keyed& c : cells) out.rows.push_back(std::move(c.row));
  return out;
}

}  // namespace vidbrain::bench
