// SPDX-License-Identifier: Apache-2.0
// Acceptance suite. Prints one PASS/FAIL line per criterion; exit status is
// nonzero when any selected criterion fails. Usage: acceptance [id ...]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "acceptance_configs.hpp"
#include "fd_check.hpp"
#include "random_graphs.hpp"
#include "vidbrain/bench/sweep.hpp"
#include "vidbrain/encoding/ridge.hpp"
#include "vidbrain/io/checkpoint.hpp"
#include "vidbrain/trainer/optim.hpp"
#include "vidbrain/vqvae/codebook.hpp"

using namespace vidbrain;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::vector<double> gaussian(std::size_t n, nn::Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// 1. Reverse mode against central differences on random graphs.
Outcome autodiff() {
  nn::Rng rng(7);
  double worst = 0.0;
  std::string worst_kind;
  for (int i = 0; i < 200; ++i) {
    testing::GraphCase g = testing::make_graph(i, rng);
    const double e = testing::max_fd_error(g.loss, g.leaves);
    if (e > worst) {
      worst = e;
      worst_kind = g.kind;
    }
  }
  return {worst <= 1e-4, "max rel err " + fmt(worst) + " over 200 graphs (" + std::to_string(testing::kGraphKinds) +
                             " layer types, worst " + worst_kind + ")"};
}

// 2. quantize against exhaustive nearest neighbour.
Outcome quantizer() {
  nn::Rng rng(11);
  std::uniform_int_distribution<std::size_t> codes(1, 64), dims(1, 16), rows(1, 32);
  std::size_t mismatches = 0, checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t K = codes(rng), D = dims(rng), R = rows(rng);
    vqvae::CodebookState book = vqvae::CodebookState::empty(K, D);
    book.embeddings = gaussian(K * D, rng);
    const std::vector<double> z = gaussian(R * D, rng);
    const vqvae::Quantized q = vqvae::quantize(z, book);
    for (std::size_t r = 0; r < R; ++r, ++checked) {
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t k = 0; k < K; ++k) {
        double d = 0.0;
        for (std::size_t c = 0; c < D; ++c) d += (z[r * D + c] - book.embeddings[k * D + c]) * (z[r * D + c] - book.embeddings[k * D + c]);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (static_cast<std::size_t>(q.codes[r]) != best) ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in " + std::to_string(checked) +
                               " rows over 1000 random books (n_codes <= 64)"};
}

// 3. One EMA update against the direct formulas, plus dead-code resampling.
Outcome ema() {
  nn::Rng rng(13);
  double worst = 0.0;
  std::size_t reinit_ok = 0, reinit_total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t K = 8, D = 5, R = 24;
    vqvae::CodebookState b = vqvae::CodebookState::empty(K, D);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (double& n : b.N) n = u(rng);
    b.z_avg = gaussian(K * D, rng);
    b.embeddings = gaussian(K * D, rng);
    b.initialized = true;
    const std::vector<double> z = gaussian(R * D, rng);
    std::uniform_int_distribution<std::int32_t> pick(0, static_cast<std::int32_t>(K) - 3);  // last two unused
    std::vector<std::int32_t> codes(R);
    for (auto& c : codes) c = pick(rng);
    const vqvae::CodebookState before = b;
    nn::Rng r2(trial);
    vqvae::ema_update(b, z, codes, r2);

    const double gamma = 0.99, eps = 1e-7;
    std::vector<double> N(K), zavg(K * D);
    for (std::size_t k = 0; k < K; ++k) {
      double cnt = 0.0;
      std::vector<double> s(D, 0.0);
      for (std::size_t r = 0; r < R; ++r)
        if (codes[r] == static_cast<std::int32_t>(k)) {
          cnt += 1.0;
          for (std::size_t c = 0; c < D; ++c) s[c] += z[r * D + c];
        }
      N[k] = gamma * before.N[k] + (1 - gamma) * cnt;  // Eq 3
      for (std::size_t c = 0; c < D; ++c)
        zavg[k * D + c] = gamma * before.z_avg[k * D + c] + (1 - gamma) * s[c];  // Eq 4
    }
    const double n = std::accumulate(N.begin(), N.end(), 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      worst = std::max(worst, std::abs(b.N[k] - N[k]));
      const double w = (N[k] + eps) / (n + K * eps) * n;  // Eq 5
      for (std::size_t c = 0; c < D; ++c) {
        worst = std::max(worst, std::abs(b.z_avg[k * D + c] - zavg[k * D + c]));
        if (N[k] >= 1.0) worst = std::max(worst, std::abs(b.embeddings[k * D + c] - zavg[k * D + c] / w));  // Eq 6
      }
      if (N[k] < 1.0) {
        ++reinit_total;
        for (std::size_t r = 0; r < R; ++r)
          if (std::memcmp(&b.embeddings[k * D], &z[r * D], D * sizeof(double)) == 0) {
            ++reinit_ok;
            break;
          }
      }
    }
  }
  return {worst <= 1e-12 && reinit_total > 0 && reinit_ok == reinit_total,
          "max abs err " + fmt(worst) + "; " + std::to_string(reinit_ok) + "/" + std::to_string(reinit_total) +
              " codes with N < 1 resampled from the batch"};
}

// 4. Past logits are bitwise unaffected by future codes.
Outcome causality() {
  prior::PriorConfig c = prior::PriorConfig::desk();
  c.grid = {4, 4, 4};
  c.n_codes = 32;
  c.embedding_dim = 8;
  c.context_dim = 12;
  nn::Rng rng(17);
  const prior::Prior p = prior::Prior::init(c, gaussian(c.n_codes * c.embedding_dim, rng), 3);
  for (auto& [name, t] : p.parameters())
    if (name.rfind("fc_out", 0) == 0)
      for (double& v : t.mutable_data()) v = gaussian(1, rng, 0.3)[0];
  const nn::Tensor ctx = nn::Tensor::from({4, 4, 4, 12}, gaussian(4 * 4 * 4 * 12, rng));
  std::uniform_int_distribution<std::int32_t> code(0, 31);
  std::uniform_int_distribution<std::size_t> cut(1, c.positions() - 1);
  std::vector<std::int32_t> base(c.positions());
  for (auto& v : base) v = code(rng);
  nn::NoGradGuard guard;
  const auto ref = p.forward_logits(base, &ctx, prior::Mode::kInfer).to_vector();
  std::size_t bad = 0, changed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t i = cut(rng);
    std::vector<std::int32_t> codes = base;
    for (std::size_t j = i; j < codes.size(); ++j) codes[j] = code(rng);
    const auto out = p.forward_logits(codes, &ctx, prior::Mode::kInfer).to_vector();
    const std::size_t n = i * c.n_codes;
    if (std::memcmp(out.data(), ref.data(), n * sizeof(double)) != 0) ++bad;
    if (std::memcmp(out.data() + n, ref.data() + n, (out.size() - n) * sizeof(double)) != 0) ++changed;
  }
  return {bad == 0 && changed > 0, std::to_string(bad) + "/100 perturbations changed a past logit (4x4x4 grid); " +
                                       std::to_string(changed) + " changed later logits"};
}

// 5. Cosine schedule identities.
Outcome schedule() {
  double worst = 0.0;
  for (auto [emax, emin, T] : std::vector<std::tuple<double, double, std::size_t>>{
           {3e-4, 0.0, 1000}, {1e-3, 1e-5, 400}, {0.5, 0.1, 10}, {2e-4, 2e-5, 123456}}) {
    worst = std::max(worst, std::abs(trainer::cosine_lr(0, emax, emin, T) - emax));
    worst = std::max(worst, std::abs(trainer::cosine_lr(T, emax, emin, T) - emin));
    worst = std::max(worst, std::abs(trainer::cosine_lr(T / 2, emax, emin, T) - (emax + emin) / 2));
  }
  return {worst <= 1e-12, "max abs err " + fmt(worst) + " at t = 0, T_max/2, T_max over 4 schedules"};
}

// Normal equations by Gaussian elimination, independent of the solver under test.
std::vector<double> solve_normal(const encoding::Matrix& x, const std::vector<double>& y, double lambda) {
  const std::size_t p = x.cols;
  std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t r = 0; r < x.rows; ++r) a[i][j] += x.at(r, i) * x.at(r, j);
    a[i][i] += lambda;
    for (std::size_t r = 0; r < x.rows; ++r) a[i][p] += x.at(r, i) * y[r];
  }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= p; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> b(p);
  for (std::size_t i = 0; i < p; ++i) b[i] = a[i][p] / a[i][i];
  return b;
}

// 6. Ridge stationarity and closed-form LOO against refits.
Outcome ridge() {
  nn::Rng rng(19);
  std::uniform_int_distribution<std::size_t> rows(5, 40), cols(1, 12);
  double stat = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    encoding::Matrix x(rows(rng), cols(rng));
    x.values = gaussian(x.rows * x.cols, rng);
    const std::vector<double> y = gaussian(x.rows, rng);
    for (double lambda : encoding::default_lambda_grid()) {
      const auto b = encoding::ridge_fit(x, y, lambda);
      std::vector<double> e(x.rows);
      for (std::size_t r = 0; r < x.rows; ++r) {
        e[r] = -y[r];
        for (std::size_t c = 0; c < x.cols; ++c) e[r] += x.at(r, c) * b[c];
      }
      for (std::size_t c = 0; c < x.cols; ++c) {
        double g = lambda * b[c];
        for (std::size_t r = 0; r < x.rows; ++r) g += x.at(r, c) * e[r];
        stat = std::max(stat, std::abs(g));
      }
    }
  }
  double loo = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    encoding::Matrix x(12, 3);
    x.values = gaussian(36, rng);
    encoding::Matrix y(12, 1);
    y.values = gaussian(12, rng);
    const encoding::RidgeSolver solver(x);
    for (double lambda : encoding::default_lambda_grid()) {
      const encoding::Matrix res = solver.loo_residuals(y, lambda);
      for (std::size_t i = 0; i < 12; ++i) {
        encoding::Matrix xi(11, 3);
        std::vector<double> yi;
        for (std::size_t r = 0, k = 0; r < 12; ++r) {
          if (r == i) continue;
          for (std::size_t c = 0; c < 3; ++c) xi.at(k, c) = x.at(r, c);
          yi.push_back(y.values[r]);
          ++k;
        }
        const auto b = solve_normal(xi, yi, lambda);
        double pred = 0.0;
        for (std::size_t c = 0; c < 3; ++c) pred += x.at(i, c) * b[c];
        loo = std::max(loo, std::abs(res.at(i, 0) - (y.values[i] - pred)));
      }
    }
  }
  const bool grid = encoding::default_lambda_grid() == std::vector<double>{0.1, 1.0, 100.0};
  return {stat <= 1e-8 && loo <= 1e-9 && grid, "stationarity " + fmt(stat) + " on 100 systems; LOO vs refit " +
                                                   fmt(loo) + " on 100 12x3 systems; grid {0.1,1,100} " +
                                                   (grid ? "fixed" : "changed")};
}

// 7. Noiseless teacher recovery on prior features of the stimulus.
Outcome teacher_recovery() {
  bench::RunConfig cfg = acceptance::recovery_config();
  bench::Pipeline pipe;
  const synth::FrameStream& stim = pipe.stimulus(cfg);
  vqvae::Vqvae vq = vqvae::Vqvae::init(cfg.vqvae, 1);
  {
    std::vector<std::size_t> w(32);
    std::iota(w.begin(), w.end(), 0);
    trainer::train_vqvae(vq, stim, w, bench::train_options(cfg.vqvae_train, cfg.policy(), 1));
  }
  const prior::Prior model = prior::Prior::init(cfg.prior, vq.codebook().embeddings, 2);
  const auto feats = encoding::extract_features(model, vq, stim, cfg.resolved_tap(), encoding::Reducer::kPool);
  const synth::TrMatrix f0 = encoding::align_to_tr(feats, cfg.stimulus.tr_seconds, 0);
  synth::TeacherSpec t;
  t.seed = 1;
  t.n_parcels = 32;
  t.sigma = 0.0;
  t.lag = 3;
  const synth::ParcelSeries y = synth::gen_bold(f0, t, synth::split_runs(cfg.stimulus.n_trs, cfg.stimulus.runs));
  encoding::EncodeOptions o;
  o.delay_trs = 3;
  const auto at3 = encoding::encode_subject(encoding::align_to_tr(feats, cfg.stimulus.tr_seconds, 3), y, o);
  o.delay_trs = 0;
  const auto at0 = encoding::encode_subject(f0, y, o);
  double min_r = 1.0;
  for (const auto& p : at3.parcels) min_r = std::min(min_r, p.r);
  return {at3.parcels.size() == 32 && min_r >= 0.99 && at0.mean_r < at3.mean_r,
          "min parcel r " + fmt(min_r) + " at delay 3 over " + std::to_string(at3.parcels.size()) +
              " parcels; mean r " + fmt(at3.mean_r) + " (delay 3) vs " + fmt(at0.mean_r) + " (delay 0)"};
}

// Mean r of one subject over seeds, per axis value.
std::map<std::string, std::map<std::string, double>> subject_means(const bench::SweepOutput& out) {
  std::map<std::string, std::map<std::string, std::vector<double>>> acc;
  for (const auto& r : out.rows) acc[r.subject][r.value].push_back(r.mean_r);
  std::map<std::string, std::map<std::string, double>> m;
  for (const auto& [s, byv] : acc)
    for (const auto& [v, rs] : byv) m[s][v] = std::accumulate(rs.begin(), rs.end(), 0.0) / static_cast<double>(rs.size());
  return m;
}

// 8. Mean r grows with the training set.
Outcome data_size() {
  bench::SweepSpec spec;
  spec.base = acceptance::data_size_config();
  spec.axis = bench::Axis::kDataSize;
  spec.values = {"200", "800", "3200"};
  spec.seeds = {0, 1, 2};
  bench::Pipeline pipe;
  const auto out = bench::run_sweep(spec, pipe);
  const auto m = subject_means(out);
  bool monotone = true, complete = true;
  double gain_sum = 0.0;
  std::ostringstream d;
  for (const auto& [s, byv] : m) {
    const double a = byv.at("200"), b = byv.at("800"), c = byv.at("3200");
    complete = complete && std::isfinite(a) && std::isfinite(b) && std::isfinite(c);
    monotone = monotone && a <= b && b <= c;
    gain_sum += c - a;
    d << s << " " << fmt(a) << "/" << fmt(b) << "/" << fmt(c) << "; ";
  }
  const double gain = gain_sum / static_cast<double>(m.size());
  d << "r(3200)-r(200) = " << fmt(gain);
  return {complete && monotone && gain >= 0.05, d.str()};
}

// 9. Single and mixed-half runs agree; skips only under injected overflow.
Outcome precision() {
  bench::RunConfig single = acceptance::precision_config();
  bench::RunConfig mixed = single;
  mixed.precision = "mixed-half";
  mixed.resolve();
  bench::Pipeline pipe;
  const auto a = pipe.run_cell(single), b = pipe.run_cell(mixed);
  if (a.training.diverged || b.training.diverged) return {false, "a run diverged"};
  const double dloss = std::abs(a.training.epochs.back().loss - b.training.epochs.back().loss);
  double dr = 0.0;
  for (std::size_t k = 0; k < a.reports.size(); ++k) dr = std::max(dr, std::abs(a.reports[k].mean_r - b.reports[k].mean_r));
  const bool clean = a.training.skipped.empty() && b.training.skipped.empty();

  // Injected overflow: one step whose loss is inflated past the half range.
  const vqvae::Vqvae& vq = pipe.stage1(mixed);
  const prior::Prior model = prior::Prior::init(mixed.prior, vq.codebook().embeddings, mixed.seed);
  trainer::Optimizer opt(trainer::prior_trainable(model), mixed.policy());
  const auto& cache = pipe.pool_cache(mixed);
  const auto pairs = pipe.prior_samples(mixed);
  nn::Rng rng(1);
  const nn::Tensor ctx = cache.context(pairs[0].context);
  opt.step([&] { return nn::scale(model.loss(cache.codes[pairs[0].target], &ctx, rng), 1e6); }, 1e-4);
  const bool injected = !opt.skipped().empty();

  return {dloss <= 1e-2 && dr <= 0.01 && clean && injected,
          "final loss diff " + fmt(dloss) + "; max per-subject mean r diff " + fmt(dr) + "; skips without injection " +
              std::to_string(a.training.skipped.size() + b.training.skipped.size()) + ", with injection " +
              std::to_string(opt.skipped().size())};
}

// 10. Tap shapes for the paper preset and the desk config.
Outcome tap_shapes() {
  nn::Rng rng(23);
  prior::PriorConfig paper = prior::PriorConfig::paper();
  const prior::Prior big = prior::Prior::init(paper, gaussian(paper.n_codes * paper.embedding_dim, rng), 1);
  std::vector<std::int32_t> codes(paper.positions());
  std::uniform_int_distribution<std::int32_t> code(0, static_cast<std::int32_t>(paper.n_codes) - 1);
  for (auto& v : codes) v = code(rng);
  const nn::Tensor ctx = nn::Tensor::from({4, 8, 8, 240}, gaussian(4 * 8 * 8 * 240, rng));
  const nn::Shape paper_shape = big.tap_activation(prior::post_fc_tap(4), codes, &ctx).shape();

  const prior::PriorConfig desk = acceptance::desk_prior();
  const prior::Prior small = prior::Prior::init(desk, gaussian(desk.n_codes * desk.embedding_dim, rng), 1);
  codes.assign(desk.positions(), 0);
  for (auto& v : codes) v = code(rng) % static_cast<std::int32_t>(desk.n_codes);
  const nn::Shape desk_shape = small.tap_activation(prior::default_tap(desk.layers), codes, nullptr).shape();
  const nn::Shape want_desk{1, 4, 8, 8, desk.hidden_dim};
  return {paper_shape == nn::Shape{1, 4, 8, 8, 576} && desk_shape == want_desk,
          "paper " + nn::shape_str(paper_shape) + " at " + prior::post_fc_tap(4) + "; desk " + nn::shape_str(desk_shape) +
              " at " + prior::default_tap(desk.layers)};
}

// 11. Uniform start and a strictly decreasing loss on 50 clips.
Outcome untrained_baseline() {
  bench::RunConfig cfg = acceptance::baseline_config();
  bench::Pipeline pipe;
  const vqvae::Vqvae& vq = pipe.stage1(cfg);
  const auto& cache = pipe.pool_cache(cfg);
  const auto pairs = pipe.prior_samples(cfg);
  prior::Prior model = prior::Prior::init(cfg.prior, vq.codebook().embeddings, cfg.seed);
  double initial = 0.0;
  {
    nn::NoGradGuard g;
    for (const auto& s : pairs) {
      const nn::Tensor ctx = cache.context(s.context);
      const nn::Tensor logits = model.forward_logits(cache.codes[s.target], &ctx, prior::Mode::kInfer);
      initial += nn::cross_entropy(nn::reshape(logits, {cfg.prior.positions(), cfg.prior.n_codes}),
                                   cache.codes[s.target])
                     .item();
    }
    initial /= static_cast<double>(pairs.size());
  }
  const double uniform = std::log(static_cast<double>(cfg.prior.n_codes));
  const auto res = trainer::train_prior(model, cache, pairs, bench::train_options(cfg.prior_train, cfg.policy(), cfg.seed));
  bool decreasing = res.epochs.size() == 5;
  std::ostringstream d;
  d << "initial CE " << fmt(initial) << " vs ln(" << cfg.prior.n_codes << ") " << fmt(uniform) << "; epoch losses";
  for (std::size_t e = 0; e < res.epochs.size(); ++e) {
    d << " " << fmt(res.epochs[e].loss);
    if (e > 0) decreasing = decreasing && res.epochs[e].loss < res.epochs[e - 1].loss;
  }
  return {std::abs(initial - uniform) <= 0.05 * uniform && decreasing && pairs.size() == 50, d.str()};
}

// 12. Emitted reports parse back; reruns are byte-identical.
Outcome report_roundtrip() {
  bench::SweepSpec spec;
  spec.base = acceptance::rerun_config();
  spec.axis = bench::Axis::kDataSize;
  spec.values = {"20", "40"};
  spec.seeds = {0, 1};
  const fs::path root = fs::temp_directory_path() / "vidbrain_acceptance_12";
  fs::remove_all(root);
  std::vector<bench::SweepOutput> outs;
  for (int run = 0; run < 2; ++run) {
    bench::Pipeline pipe;
    outs.push_back(bench::run_sweep(spec, pipe));
    bench::emit_report(outs.back().rows, outs.back().meta, root / std::to_string(run));
  }
  const auto& rows = outs[0].rows;
  const bool csv_rt = bench::same_rows(bench::parse_rows_csv(io::read_file(root / "0" / "results.csv")), rows);
  const bool json_rt =
      bench::same_rows(bench::parse_rows_json(nlohmann::json::parse(io::read_file(root / "0" / "results.json"))), rows);
  bool bytes = true;
  for (const char* f : {"results.csv", "results.json", "plot_data_size.csv"})
    bytes = bytes && io::read_file(root / "0" / f) == io::read_file(root / "1" / f);
  bool any_failed = false;
  for (const auto& r : rows) any_failed = any_failed || r.failed();
  return {csv_rt && json_rt && bytes && !any_failed && rows.size() == 2 * 2 * spec.base.subjects.size(),
          std::to_string(rows.size()) + " rows; CSV round trip " + (csv_rt ? "ok" : "differs") + ", JSON round trip " +
              (json_rt ? "ok" : "differs") + ", rerun bytes " + (bytes ? "identical" : "differ")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "autodiff-fd", 60, autodiff},
      {2, "quantizer-oracle", 0, quantizer},
      {3, "ema-oracle", 0, ema},
      {4, "causality", 0, causality},
      {5, "cosine-schedule", 0, schedule},
      {6, "ridge-loo-oracles", 0, ridge},
      {7, "noiseless-teacher", 120, teacher_recovery},
      {8, "data-size-ordering", 1800, data_size},
      {9, "precision-parity", 0, precision},
      {10, "tap-shapes", 0, tap_shapes},
      {11, "untrained-baseline", 0, untrained_baseline},
      {12, "report-roundtrip", 0, report_roundtrip},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = o.pass;
    std::string timing = fmt(s) + " s";
    if (c.limit_s > 0) {
      timing += " of " + fmt(c.limit_s) + " s allowed";
      pass = pass && s < c.limit_s;
    }
    std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " (" << timing
              << ")" << std::endl;
    failures += pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
