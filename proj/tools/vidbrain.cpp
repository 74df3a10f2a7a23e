// SPDX-License-Identifier: Apache-2.0
// vidbrain command line: stage training, feature extraction, encoding and
// sweeps. Exit codes: 0 success, 1 invalid input, 2 runtime failure.
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "vidbrain/bench/sweep.hpp"
#include "vidbrain/encoding/report.hpp"
#include "vidbrain/io/checkpoint.hpp"

using namespace vidbrain;
namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> precision;
  std::optional<std::size_t> data_size, hidden_dim, layers, heads;
  std::optional<std::string> tap;
  std::size_t delay_trs = 3;
  std::string out = "out";
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON run config");
  app->add_option("--seed", f.seed, "Seed of the stage being run");
  app->add_option("--precision", f.precision, "single or mixed-half");
  app->add_option("--data-size", f.data_size, "Training clips drawn from the pool");
  app->add_option("--hidden-dim", f.hidden_dim, "Prior width (multiple of 3)");
  app->add_option("--layers", f.layers, "Prior depth");
  app->add_option("--heads", f.heads, "Prior attention heads");
  app->add_option("--tap", f.tap, "Activation site used as features");
  app->add_option("--delay-trs", f.delay_trs, "Hemodynamic delay in TRs")->capture_default_str();
  app->add_option("--out", f.out, "Output directory")->capture_default_str();
}

bench::RunConfig load_config(const Flags& f) {
  bench::RunConfig c;
  if (!f.config.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(io::read_file(f.config));
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("config " + f.config + ": " + e.what());
    }
    c = bench::RunConfig::from_json(j);
  }
  if (f.seed) c.seed = *f.seed;
  if (f.precision) c.precision = *f.precision;
  if (f.data_size) c.data_size = *f.data_size;
  if (f.hidden_dim) c.prior.hidden_dim = *f.hidden_dim;
  if (f.layers) c.prior.layers = *f.layers;
  if (f.heads) c.prior.heads = *f.heads;
  if (f.tap) c.tap = *f.tap;
  c.delay_trs = f.delay_trs;
  return c;
}

void write_manifest(const fs::path& out, const std::string& command, const bench::RunConfig& cfg,
                    const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json m{{"tool_version", bench::kToolVersion},
                   {"command", command},
                   {"fingerprint", cfg.fingerprint()},
                   {"config", cfg.to_json()}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  io::write_file(out / "manifest.json", m.dump(2) + "\n");
}

void log_line(const std::string& s) { std::cerr << "vidbrain: " << s << "\n"; }

std::string features_csv(const encoding::FeatureSequence& f) {
  std::ostringstream out;
  out.precision(17);
  out << "center_s";
  for (std::size_t d = 0; d < f.dim; ++d) out << ",f" << d;
  out << "\n";
  for (std::size_t i = 0; i < f.size(); ++i) {
    out << f.centers[i];
    for (std::size_t d = 0; d < f.dim; ++d) out << "," << f.row(i)[d];
    out << "\n";
  }
  return out.str();
}

encoding::FeatureSequence parse_features_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("center_s", 0) != 0)
    throw std::invalid_argument("features file: missing center_s header");
  encoding::FeatureSequence f;
  f.dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ls, cell, ',')) {
      (n == 0 ? f.centers.emplace_back() : f.values.emplace_back()) = std::stod(cell);
      ++n;
    }
    if (n != f.dim + 1) throw std::invalid_argument("features file: ragged row");
  }
  return f;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int run_train_vqvae(const Flags& f) {
  bench::RunConfig cfg = load_config(f);
  if (f.seed) cfg.vqvae_seed = *f.seed;
  if (f.precision) cfg.stage1_precision = *f.precision;
  cfg.resolve();
  const fs::path out = f.out;
  bench::Pipeline p(log_line);
  const auto& pool = p.pool(cfg);
  const auto windows = p.sample_windows(cfg);
  vqvae::Vqvae model = vqvae::Vqvae::init(cfg.vqvae, cfg.vqvae_seed);
  auto save = [&](std::uint64_t epoch) {
    io::Checkpoint ck = model.to_checkpoint();
    ck.epoch = epoch;
    const fs::path path = out / io::checkpoint_name("vqvae", cfg.vqvae_seed, epoch);
    io::write_checkpoint(path, ck);
    return path;
  };
  log_line("training VQ-VAE on " + std::to_string(windows.size()) + " windows");
  const auto res = trainer::train_vqvae(model, pool.stream, windows,
                                        bench::train_options(cfg.vqvae_train, cfg.stage1_policy(), cfg.vqvae_seed),
                                        [&](const trainer::EpochRecord& r) { save(r.epoch); });
  if (res.epochs.empty() && !res.diverged) save(0);
  io::write_file(out / "vqvae_loss.csv", trainer::loss_csv(res.epochs));
  write_manifest(out, "train-vqvae", cfg,
                 {{"steps", res.steps}, {"skipped_steps", res.skipped.size()}, {"parameters", model.parameter_count()}});
  if (res.diverged) throw std::runtime_error("training diverged: " + res.error);
  return 0;
}

int run_train_prior(const Flags& f, const std::string& vqvae_path) {
  bench::RunConfig cfg = load_config(f);
  cfg.resolve();  // flag errors before file errors
  const io::Checkpoint vq_ck = io::read_checkpoint(vqvae_path);
  const vqvae::Vqvae vq = vqvae::Vqvae::from_checkpoint(vq_ck);
  cfg.vqvae = vq.config();
  cfg.resolve();
  const fs::path out = f.out;
  bench::Pipeline p(log_line);
  const auto& pool = p.pool(cfg);
  log_line("encoding pool windows");
  const auto cache = vqvae::encode_windows(vq, pool.stream, p.sample_windows(cfg));
  prior::Prior model = prior::Prior::init(cfg.prior, vq.codebook().embeddings, cfg.seed);
  const std::string parent = io::content_hash(vq_ck);
  auto save = [&](std::uint64_t epoch) {
    io::Checkpoint ck = model.to_checkpoint(parent);
    ck.epoch = epoch;
    io::write_checkpoint(out / io::checkpoint_name("prior", cfg.seed, epoch), ck);
  };
  log_line("training prior on " + std::to_string(cfg.data_size) + " samples");
  const auto res = trainer::train_prior(model, cache, p.prior_samples(cfg),
                                        bench::train_options(cfg.prior_train, cfg.policy(), cfg.seed),
                                        [&](const trainer::EpochRecord& r) { save(r.epoch); });
  if (res.epochs.empty() && !res.diverged) save(0);
  io::write_file(out / "prior_loss.csv", trainer::loss_csv(res.epochs));
  write_manifest(out, "train-prior", cfg,
                 {{"vqvae", vqvae_path},
                  {"steps", res.steps},
                  {"skipped_steps", res.skipped.size()},
                  {"parameters", model.parameter_count()},
                  {"registry", model.registry_dump()}});
  if (res.diverged) throw std::runtime_error("training diverged: " + res.error);
  return 0;
}

int run_extract(const Flags& f, const std::string& vqvae_path, const std::string& prior_path,
                const std::string& video_path) {
  bench::RunConfig cfg = load_config(f);
  const vqvae::Vqvae vq = vqvae::Vqvae::from_checkpoint(io::read_checkpoint(vqvae_path));
  const prior::Prior model = prior::Prior::from_checkpoint(io::read_checkpoint(prior_path));
  cfg.vqvae = vq.config();
  cfg.prior = model.config();
  cfg.resolve();
  bench::Pipeline p(log_line);
  const synth::FrameStream stream = video_path.empty() ? p.stimulus(cfg) : synth::read_frame_stream(video_path);
  log_line("extracting " + cfg.resolved_tap() + " over " + std::to_string(stream.n_windows()) + " windows");
  const auto feats =
      encoding::extract_features(model, vq, stream, cfg.resolved_tap(), encoding::parse_reducer(cfg.reducer));
  const fs::path out = f.out;
  io::write_file(out / "features.csv", features_csv(feats));
  write_manifest(out, "extract", cfg,
                 {{"vqvae", vqvae_path}, {"prior", prior_path}, {"tap", cfg.resolved_tap()}, {"dim", feats.dim}});
  return 0;
}

int run_encode(const Flags& f, const std::string& features_path, const std::string& bold_path) {
  bench::RunConfig cfg = load_config(f);
  cfg.resolve();
  const auto feats = parse_features_csv(io::read_file(features_path));
  const synth::TrMatrix x = encoding::align_to_tr(feats, cfg.stimulus.tr_seconds, cfg.delay_trs);
  std::vector<std::pair<std::string, synth::ParcelSeries>> subjects;
  if (!bold_path.empty()) {
    subjects.emplace_back("sub-00", synth::read_parcel_csv(bold_path));
  } else {
    bench::Pipeline p(log_line);
    const auto& ys = p.bold(cfg);
    for (std::size_t k = 0; k < ys.size(); ++k) subjects.emplace_back(bench::subject_name(cfg.subjects[k]), ys[k]);
  }
  const fs::path out = f.out;
  std::vector<encoding::EncodingReport> reports;
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& [name, y] : subjects) {
    encoding::EncodeOptions o;
    o.split_seed = cfg.split_seed;
    o.grid = cfg.lambda_grid;
    o.subject = name;
    o.tap = cfg.resolved_tap();
    o.delay_trs = cfg.delay_trs;
    reports.push_back(encoding::encode_subject(x, y, o));
    encoding::write_report(out / name, reports.back());
    summary.push_back(encoding::report_summary(reports.back()));
    std::cout << name << " mean_r=" << reports.back().mean_r << " max_r=" << reports.back().max_r << "\n";
  }
  io::write_file(out / "report.csv", encoding::report_csv(reports));
  write_manifest(out, "encode", cfg, {{"features", features_path}, {"subjects", summary}});
  return 0;
}

int run_sweep_cmd(const Flags& f, const std::string& axis, const std::string& values, const std::string& seeds) {
  bench::SweepSpec spec;
  spec.base = load_config(f);
  spec.base.resolve();
  spec.axis = bench::parse_axis(axis);
  spec.values = values.empty() ? bench::default_values(spec.axis) : split_list(values);
  if (!seeds.empty()) {
    spec.seeds.clear();
    for (const auto& s : split_list(seeds)) {
      std::uint64_t v = 0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw std::invalid_argument("bad seed '" + s + "'");
      spec.seeds.push_back(v);
    }
  }
  spec.validate();
  bench::Pipeline p(log_line);
  const auto result = bench::run_sweep(spec, p);
  const fs::path out = f.out;
  bench::emit_report(result.rows, result.meta, out);
  write_manifest(out, "sweep", spec.base, {{"axis", axis}, {"values", spec.values}, {"seeds", spec.seeds}});
  std::cout << bench::plot_csv(result.rows, result.meta);
  return 0;
}

int run_report(const Flags& f, const std::string& in) {
  const auto j = nlohmann::json::parse(io::read_file(fs::path(in) / "results.json"));
  bench::SweepMeta meta;
  meta.axis = j.at("axis").get<std::string>();
  meta.values = j.at("values").get<std::vector<std::string>>();
  meta.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  meta.subjects = j.at("subjects").get<std::vector<std::string>>();
  meta.extra = j.value("meta", nlohmann::json::object());
  const auto rows = bench::parse_rows_json(j);
  bench::emit_report(rows, meta, f.out);
  std::cout << bench::plot_csv(rows, meta);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vidbrain: video prior training and brain-encoding sweeps"};
  app.require_subcommand(1);
  Flags f;
  std::string vqvae_path, prior_path, video_path, features_path, bold_path, axis, values, seeds, in_dir;

  auto* tv = app.add_subcommand("train-vqvae", "Train stage 1 on the clip pool");
  add_common(tv, f);
  auto* tp = app.add_subcommand("train-prior", "Train stage 2 on a frozen VQ-VAE");
  add_common(tp, f);
  tp->add_option("--vqvae", vqvae_path, "VQ-VAE checkpoint")->required();
  auto* ex = app.add_subcommand("extract", "Tap prior activations over a video");
  add_common(ex, f);
  ex->add_option("--vqvae", vqvae_path, "VQ-VAE checkpoint")->required();
  ex->add_option("--prior", prior_path, "Prior checkpoint")->required();
  ex->add_option("--video", video_path, "Frame stream file (default: the config stimulus)");
  auto* en = app.add_subcommand("encode", "Fit ridge encoding models on extracted features");
  add_common(en, f);
  en->add_option("--features", features_path, "features.csv from extract")->required();
  en->add_option("--bold", bold_path, "Parcel CSV (default: synthetic subjects from the config)");
  auto* sw = app.add_subcommand("sweep", "Run one sweep axis");
  add_common(sw, f);
  sw->add_option("--axis", axis, "data_size, hidden_dim, layers, heads or precision")->required();
  sw->add_option("--values", values, "Comma-separated axis values (default: desk values)");
  sw->add_option("--seeds", seeds, "Comma-separated stage-2 seeds (default: 0,1,2)");
  auto* rp = app.add_subcommand("report", "Re-emit CSV, JSON and plot data from results.json");
  add_common(rp, f);
  rp->add_option("--in", in_dir, "Directory holding results.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "vidbrain: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (tv->parsed()) return run_train_vqvae(f);
    if (tp->parsed()) return run_train_prior(f, vqvae_path);
    if (ex->parsed()) return run_extract(f, vqvae_path, prior_path, video_path);
    if (en->parsed()) return run_encode(f, features_path, bold_path);
    if (sw->parsed()) return run_sweep_cmd(f, axis, values, seeds);
    if (rp->parsed()) return run_report(f, in_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "vidbrain: invalid input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "vidbrain: error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
