// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "vidbrain/synth/dataset.hpp"
#include "vidbrain/trainer/optim.hpp"
#include "vidbrain/trainer/stages.hpp"
#include "vidbrain/trainer/trainer.hpp"

using namespace vidbrain;
using namespace vidbrain::trainer;
using nn::Tensor;

namespace {

// Least squares on a fixed random design; parameters start on the half grid
// so single and mixed runs see identical initial values.
struct Regression {
  Tensor w, x, y;
  explicit Regression(std::uint64_t seed) {
    nn::Rng rng(seed);
    std::normal_distribution<double> n(0.0, 0.5);
    std::vector<double> wv(6), xv(24), yv(16);
    for (double& v : wv) v = nn::round_half(n(rng));
    for (double& v : xv) v = n(rng);
    for (double& v : yv) v = n(rng);
    w = Tensor::from({3, 2}, wv, true);
    x = Tensor::from({8, 3}, xv);
    y = Tensor::from({8, 2}, yv);
  }
  Tensor loss() const { return nn::mse(nn::matmul(x, w), y); }
  nn::ParamList params() const { return {{"w", w}}; }
};

}  // namespace

TEST_CASE("cosine_lr identities") {
  CHECK(std::abs(cosine_lr(0, 3e-4, 1e-5, 100) - 3e-4) <= 1e-12);
  CHECK(std::abs(cosine_lr(100, 3e-4, 1e-5, 100) - 1e-5) <= 1e-12);
  CHECK(std::abs(cosine_lr(50, 3e-4, 0.0, 100) - 1.5e-4) <= 1e-12);
  CHECK(std::abs(cosine_lr(7, 3e-4, 1e-4, 14) - 2e-4) <= 1e-12);
  CHECK_THROWS_AS(cosine_lr(0, 1, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(cosine_lr(11, 1, 0, 10), std::invalid_argument);
  double prev = 1.0;
  for (std::size_t t = 0; t <= 20; ++t) {
    const double lr = cosine_lr(t, 1.0, 0.0, 20);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("adam scalar fixtures") {
  std::vector<double> p{0.5};
  std::vector<double> g{0.0};
  const std::size_t sizes[] = {1};
  OptimState s = make_optim_state(sizes);
  adam_step({p}, {g}, s, 1e-3);
  CHECK(p[0] == 0.5);
  CHECK(s.step == 1);

  // Textbook recurrence from zero state with g = 1.
  p = {0.0};
  g = {1.0};
  s = make_optim_state(sizes);
  adam_step({p}, {g}, s, 1e-3);
  CHECK(std::abs(p[0] + 1e-3 / (1.0 + 1e-8)) <= 1e-12);

  // Second step by hand.
  const double m = 0.9 * 0.1 + 0.1 * 0.5, v = 0.999 * 0.001 + 0.001 * 0.25;
  const double expect = p[0] - 1e-3 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  g = {0.5};
  adam_step({p}, {g}, s, 1e-3);
  CHECK(std::abs(p[0] - expect) <= 1e-12);
}

TEST_CASE("adam rejects non-finite gradients without modifying anything") {
  std::vector<double> p{1.0, 2.0};
  std::vector<double> g{0.1, NAN};
  const std::size_t sizes[] = {2};
  OptimState s = make_optim_state(sizes);
  CHECK_THROWS_AS(adam_step({p}, {g}, s, 1e-3), DivergenceError);
  CHECK(p == std::vector<double>{1.0, 2.0});
  CHECK(s.step == 0);
  std::vector<double> short_g{0.1};
  CHECK_THROWS_AS(adam_step({p}, {short_g}, s, 1e-3), std::invalid_argument);
}

TEST_CASE("identical single-precision runs are bit-identical") {
  Regression a(1), b(1);
  Optimizer oa(a.params(), nn::PrecisionPolicy::single()), ob(b.params(), nn::PrecisionPolicy::single());
  for (int i = 0; i < 10; ++i) {
    oa.step([&] { return a.loss(); }, 1e-2);
    ob.step([&] { return b.loss(); }, 1e-2);
  }
  CHECK(a.w.to_vector() == b.w.to_vector());
}

TEST_CASE("mixed step with representable gradients tracks the single step") {
  Regression a(2), b(2);
  Optimizer single(a.params(), nn::PrecisionPolicy::single());
  Optimizer mixed(b.params(), nn::PrecisionPolicy::mixed_half());
  for (int i = 0; i < 3; ++i) {
    single.step([&] { return a.loss(); }, 1e-3);
    const StepResult r = mixed.step([&] { return b.loss(); }, 1e-3);
    CHECK(!r.skipped);
  }
  const auto ms = single.master()[0], mm = mixed.master()[0];
  for (std::size_t i = 0; i < ms.size(); ++i) CHECK(std::abs(ms[i] - mm[i]) <= std::ldexp(std::abs(ms[i]), -10));
  // The module holds the half shadow of the master weights.
  for (std::size_t i = 0; i < mm.size(); ++i) CHECK(b.w.at(i) == nn::round_half(mm[i]));
  CHECK(mixed.skipped().empty());
}

TEST_CASE("injected overflow skips the step and halves the scale") {
  Regression r(3);
  Optimizer opt(r.params(), nn::PrecisionPolicy::mixed_half());
  const auto before = opt.master();
  const Tensor x = Tensor::from({2, 3}, {1e-3, 2e-3, 3e-3, 4e-3, 5e-3, 6e-3});
  // The activation feeding the loss receives a gradient of 1e6 per unit of loss.
  const StepResult s = opt.step([&] { return nn::mean(nn::scale(nn::matmul(x, r.w), 1e6)); }, 1e-3);
  CHECK(s.skipped);
  CHECK(opt.policy().loss_scale == 32768.0);
  CHECK(opt.master() == before);
  REQUIRE(opt.skipped().size() == 1);
  CHECK(opt.skipped()[0].loss_scale == 65536.0);
  CHECK(opt.state().step == 0);
}

TEST_CASE("loss scale below one signals divergence") {
  Regression r(3);
  nn::PrecisionPolicy p = nn::PrecisionPolicy::mixed_half(1.0);
  Optimizer opt(r.params(), p);
  CHECK_THROWS_AS(opt.apply(1.0, {{INFINITY, 0, 0, 0, 0, 0}}, 1e-3), DivergenceError);
}

TEST_CASE("loss scale grows after clean steps") {
  Regression r(4);
  nn::PrecisionPolicy p = nn::PrecisionPolicy::mixed_half(1024.0);
  p.growth_interval = 3;
  Optimizer opt(r.params(), p);
  for (int i = 0; i < 3; ++i) opt.step([&] { return r.loss(); }, 1e-4);
  CHECK(opt.policy().loss_scale == 2048.0);
}

TEST_CASE("small gradients survive only with loss scaling") {
  const double g = 1e-6;
  CHECK(nn::round_half(g * 65536.0) / 65536.0 == doctest::Approx(g).epsilon(1e-3));
  CHECK(std::abs(nn::round_half(g) - g) / g > 1e-2);  // subnormal spacing 6e-8
}

TEST_CASE("train loop bookkeeping") {
  Regression r(5);
  Optimizer opt(r.params(), nn::PrecisionPolicy::single());
  TrainOptions o;
  o.epochs = 3;
  o.batch_size = 2;
  o.lr_max = 1e-2;
  std::size_t calls = 0;
  const TrainResult res = train(opt, 5, o, [&](const std::vector<std::size_t>& b, nn::Rng&) {
    ++calls;
    CHECK(!b.empty());
    return r.loss();
  });
  CHECK(calls == 9);
  CHECK(res.steps == 9);
  REQUIRE(res.epochs.size() == 3);
  CHECK(res.epochs.back().lr > 0.0);
  CHECK(res.epochs[2].loss < res.epochs[0].loss);
  const std::string csv = loss_csv(res.epochs);
  CHECK(csv.rfind("epoch,loss,lr,wall_clock_s,loss_scale\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  o.max_steps = 4;
  Regression r2(5);
  Optimizer opt2(r2.params(), nn::PrecisionPolicy::single());
  CHECK(train(opt2, 5, o, [&](const std::vector<std::size_t>&, nn::Rng&) { return r2.loss(); }).steps == 4);
}

TEST_CASE("zero epochs leaves the parameters at initialization") {
  Regression r(6);
  const auto init = r.w.to_vector();
  Optimizer opt(r.params(), nn::PrecisionPolicy::single());
  TrainOptions o;
  o.epochs = 0;
  const TrainResult res = train(opt, 4, o, [&](const std::vector<std::size_t>&, nn::Rng&) { return r.loss(); });
  CHECK(res.epochs.empty());
  CHECK(r.w.to_vector() == init);
}

TEST_CASE("divergence stops training and keeps completed epochs") {
  Regression r(7);
  Optimizer opt(r.params(), nn::PrecisionPolicy::single());
  TrainOptions o;
  o.epochs = 4;
  o.batch_size = 4;
  int calls = 0;
  const TrainResult res = train(opt, 4, o, [&](const std::vector<std::size_t>&, nn::Rng&) {
    return ++calls == 3 ? nn::scale(r.loss(), NAN) : r.loss();
  });
  CHECK(res.diverged);
  CHECK(res.epochs.size() == 2);
  CHECK(!res.error.empty());
}

TEST_CASE("prior stage loss decreases on a small pool") {
  synth::SynthSceneSpec spec;
  const synth::ClipPool pool = synth::make_pool(spec, 12);
  vqvae::VqvaeConfig vc = vqvae::VqvaeConfig::desk();
  vc.n_hiddens = 24;
  vc.embedding_dim = 16;
  vc.n_codes = 32;
  vqvae::Vqvae vq = vqvae::Vqvae::init(vc, 1);
  TrainOptions vo;
  vo.epochs = 1;
  vo.batch_size = 4;
  std::vector<std::size_t> windows(pool.stream.n_windows());
  std::iota(windows.begin(), windows.end(), 0);
  CHECK(!train_vqvae(vq, pool.stream, windows, vo).diverged);

  const WindowCache cache = encode_windows(vq, pool.stream, 0, pool.stream.n_windows());
  CHECK(cache.size() == 13);
  prior::PriorConfig pc;
  pc.hidden_dim = 24;
  pc.layers = 2;
  pc.n_codes = vc.n_codes;
  pc.embedding_dim = vc.embedding_dim;
  pc.context_dim = vc.n_hiddens;
  prior::Prior model = prior::Prior::init(pc, vq.codebook().embeddings, 2);
  TrainOptions po;
  po.epochs = 4;
  po.batch_size = 4;
  po.lr_max = 3e-3;
  const auto samples = consecutive_samples(cache);
  CHECK(samples.size() == pool.size());
  const TrainResult res = train_prior(model, cache, samples, po);
  REQUIRE(res.epochs.size() == 4);
  CHECK(res.epochs[0].loss <= std::log(32.0) * 1.05);
  for (std::size_t e = 1; e < 4; ++e) CHECK(res.epochs[e].loss < res.epochs[e - 1].loss);
}
