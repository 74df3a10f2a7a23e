// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "fd_check.hpp"
#include "vidbrain/io/checkpoint.hpp"
#include "vidbrain/prior/prior.hpp"
#include "vidbrain/prior/sampling.hpp"

using namespace vidbrain;
using namespace vidbrain::prior;
using nn::Tensor;

namespace {

PriorConfig tiny() {
  PriorConfig c;
  c.hidden_dim = 6;
  c.heads = 2;
  c.layers = 2;
  c.n_codes = 5;
  c.embedding_dim = 4;
  c.context_dim = 4;
  c.grid = {2, 2, 3};
  return c;
}

std::vector<double> random_table(const PriorConfig& c, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::normal_distribution<double> n;
  std::vector<double> t(c.n_codes * c.embedding_dim);
  for (double& v : t) v = n(rng);
  return t;
}

std::vector<std::int32_t> random_codes(const PriorConfig& c, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::uniform_int_distribution<std::int32_t> u(0, static_cast<std::int32_t>(c.n_codes) - 1);
  std::vector<std::int32_t> codes(c.positions());
  for (auto& v : codes) v = u(rng);
  return codes;
}

Tensor random_context(const PriorConfig& c, std::uint64_t seed) {
  nn::Rng rng(seed);
  return nn::normal_param({c.grid[0], c.grid[1], c.grid[2], c.context_dim}, 1.0, rng);
}

// fc_out starts at zero; give it values so every path carries gradient.
void perturb_output(const Prior& p, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& [name, t] : p.parameters())
    if (name.rfind("fc_out", 0) == 0)
      for (double& v : t.mutable_data()) v = n(rng);
}

}  // namespace

TEST_CASE("logits at init give exactly ln(n_codes) loss") {
  const PriorConfig c = PriorConfig::desk();
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  const auto codes = random_codes(c, 2);
  nn::NoGradGuard g;
  const Tensor logits = p.forward_logits(codes, nullptr, Mode::kInfer);
  CHECK(logits.shape() == nn::Shape{4, 8, 8, 256});
  const double ce = nn::cross_entropy(nn::reshape(logits, {c.positions(), c.n_codes}), codes).item();
  CHECK(std::abs(ce - std::log(256.0)) <= 1e-12);
}

TEST_CASE("logits at position i do not depend on codes at positions >= i") {
  const PriorConfig c = tiny();
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  perturb_output(p, 4);
  const Tensor ctx = random_context(c, 5);
  const auto base = random_codes(c, 6);
  nn::NoGradGuard g;
  const Tensor ref = p.forward_logits(base, &ctx, Mode::kInfer);
  for (std::size_t j = 0; j < c.positions(); ++j) {
    auto codes = base;
    codes[j] = (codes[j] + 1) % static_cast<std::int32_t>(c.n_codes);
    const Tensor out = p.forward_logits(codes, &ctx, Mode::kInfer);
    bool prefix_equal = true, later_changed = j + 1 == c.positions();
    for (std::size_t i = 0; i < c.positions(); ++i)
      for (std::size_t k = 0; k < c.n_codes; ++k) {
        const double a = ref.at(i * c.n_codes + k), b = out.at(i * c.n_codes + k);
        if (i <= j && a != b) prefix_equal = false;
        if (i > j && a != b) later_changed = true;
      }
    CHECK(prefix_equal);
    CHECK(later_changed);
  }
}

TEST_CASE("causality holds bitwise on the desk model") {
  const PriorConfig c = PriorConfig::desk();
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  perturb_output(p, 4);
  const auto base = random_codes(c, 6);
  nn::NoGradGuard g;
  const Tensor ref = p.forward_logits(base, nullptr, Mode::kInfer);
  for (std::size_t j : {0ul, 37ul, 200ul, 255ul}) {
    auto codes = base;
    codes[j] = (codes[j] + 7) % 256;
    const Tensor out = p.forward_logits(codes, nullptr, Mode::kInfer);
    bool same = true;
    for (std::size_t i = 0; i <= j * c.n_codes + c.n_codes - 1; ++i) same = same && ref.at(i) == out.at(i);
    CHECK(same);
  }
}

TEST_CASE("context changes the logits and the null context is used otherwise") {
  const PriorConfig c = tiny();
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  perturb_output(p, 4);
  const auto codes = random_codes(c, 6);
  const Tensor ctx = random_context(c, 5);
  nn::NoGradGuard g;
  const Tensor a = p.forward_logits(codes, nullptr, Mode::kInfer);
  const Tensor b = p.forward_logits(codes, &ctx, Mode::kInfer);
  double diff = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) diff = std::max(diff, std::abs(a.at(i) - b.at(i)));
  CHECK(diff > 1e-6);
  const Tensor bad = Tensor::zeros({1, 2, 3});
  CHECK_THROWS_AS(p.forward_logits(codes, &bad, Mode::kInfer), std::invalid_argument);
}

TEST_CASE("codes outside the codebook are rejected") {
  const PriorConfig c = tiny();
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  auto codes = random_codes(c, 6);
  codes[3] = 5;
  CHECK_THROWS_AS(p.forward_logits(codes, nullptr, Mode::kInfer), std::out_of_range);
  codes[3] = -1;
  CHECK_THROWS_AS(p.forward_logits(codes, nullptr, Mode::kInfer), std::out_of_range);
  codes.pop_back();
  CHECK_THROWS_AS(p.forward_logits(codes, nullptr, Mode::kInfer), std::invalid_argument);
}

TEST_CASE("prior gradients match finite differences") {
  const PriorConfig c = tiny();
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  perturb_output(p, 4);
  const auto codes = random_codes(c, 6);
  const Tensor ctx = random_context(c, 5);
  std::vector<Tensor> leaves;
  for (auto& [name, t] : p.parameters())
    if (name != "null_context") leaves.push_back(t);
  auto loss = [&] {
    return nn::cross_entropy(nn::reshape(p.forward_logits(codes, &ctx, Mode::kInfer), {c.positions(), c.n_codes}),
                             codes);
  };
  CHECK(testing::max_fd_error(loss, leaves) <= 1e-4);
}

TEST_CASE("training loss uses dropout and is seeded") {
  const PriorConfig c = tiny();
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  perturb_output(p, 4);
  const auto codes = random_codes(c, 6);
  nn::Rng r1(9), r2(9), r3(10);
  const double a = p.loss(codes, nullptr, r1).item(), b = p.loss(codes, nullptr, r2).item();
  const double d = p.loss(codes, nullptr, r3).item();
  CHECK(a == b);
  CHECK(a != d);
}

TEST_CASE("every registered tap has its declared shape") {
  const PriorConfig c = tiny();
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  const auto codes = random_codes(c, 6);
  const Tensor ctx = random_context(c, 5);
  const auto reg = p.registry();
  CHECK(reg.size() == 20 * c.layers);
  for (const auto& t : reg) {
    CAPTURE(t.name);
    CHECK(p.tap_activation(t.name, codes, &ctx).shape() == t.shape);
  }
  CHECK_THROWS_AS(p.tap_activation("attn_stack.attn_nets.9.post_fc_dp", codes, &ctx), std::invalid_argument);
  CHECK_THROWS_AS(p.tap_activation("nonsense", codes, &ctx), std::invalid_argument);
}

TEST_CASE("tapped activation equals the value inside a full forward") {
  const PriorConfig c = tiny();
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  const auto codes = random_codes(c, 6);
  const std::string name = post_fc_tap(0);
  Tensor seen;
  const nn::TapFn grab = [&](std::string_view n, const Tensor& t) {
    if (n == name) seen = t;
  };
  nn::NoGradGuard g;
  p.forward_logits(codes, nullptr, Mode::kInfer, nullptr, &grab);
  const Tensor direct = p.tap_activation(name, codes, nullptr);
  REQUIRE(seen.defined());
  CHECK(seen.to_vector() == direct.to_vector());
}

TEST_CASE("default tap names") {
  CHECK(default_tap(4) == "attn_stack.attn_nets.3.post_fc_dp");
  CHECK(default_tap(8) == "attn_stack.attn_nets.4.post_fc_dp");
  CHECK(default_tap(1) == "attn_stack.attn_nets.0.post_fc_dp");
  const PriorConfig c = PriorConfig::desk();
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  const auto codes = random_codes(c, 2);
  CHECK(p.tap_activation(default_tap(4), codes, nullptr).shape() == nn::Shape{1, 4, 8, 8, 48});
  CHECK_THROWS_AS(p.tap_activation(post_fc_tap(4), codes, nullptr), std::invalid_argument);
}

TEST_CASE("paper preset registry shapes") {
  const PriorConfig c = PriorConfig::paper();
  c.validate();
  CHECK(c.hidden_dim == 576);
  CHECK(c.layers == 8);
}

TEST_CASE("config validation names the constraint") {
  PriorConfig c = PriorConfig::desk();
  c.hidden_dim = 7;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = PriorConfig::desk();
  c.hidden_dim = 15;  // odd width, two heads
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.heads = 1;
  CHECK_NOTHROW(c.validate());
  c = PriorConfig::desk();
  c.layers = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(PriorConfig::from_json(PriorConfig::paper().to_json()).to_json() == PriorConfig::paper().to_json());
}

TEST_CASE("sample_categorical matches softmax frequencies") {
  const std::vector<double> logits{0.5, -1.0, 2.0, 0.0};
  for (double temp : {1.0, 0.5, 2.0}) {
    std::vector<double> p(logits.size());
    double z = 0;
    for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(logits[i] / temp);
    nn::Rng rng(17);
    const int n = 10000;
    std::vector<int> hits(logits.size());
    for (int i = 0; i < n; ++i) ++hits[sample_categorical(logits, temp, rng)];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double expect = p[i] / z, se = std::sqrt(expect * (1 - expect) / n);
      CHECK(std::abs(hits[i] / double(n) - expect) <= 3 * se);
    }
  }
  nn::Rng rng(1);
  CHECK_THROWS_AS(sample_categorical(logits, 0.0, rng), std::invalid_argument);
}

TEST_CASE("low temperature sampling picks the argmax") {
  const std::vector<double> logits{0.5, -1.0, 2.0, 1.9};
  nn::Rng rng(3);
  for (int i = 0; i < 100; ++i) CHECK(sample_categorical(logits, 1e-3, rng) == 2);
}

TEST_CASE("a one-position grid predicts from the start token alone") {
  PriorConfig c = tiny();
  c.grid = {1, 1, 1};
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  perturb_output(p, 4);
  const Tensor ctx = random_context(c, 2);
  const std::vector<std::int32_t> zero{0}, four{4};
  const Tensor a = p.forward_logits(zero, &ctx, Mode::kInfer), b = p.forward_logits(four, &ctx, Mode::kInfer);
  CHECK(a.shape() == nn::Shape{1, 1, 1, 5});
  CHECK(a.to_vector() == b.to_vector());
  nn::Rng rng(1);
  const std::vector<std::int32_t> two{2};
  CHECK(std::isfinite(p.loss(two, &ctx, rng).item()));
}

TEST_CASE("tapping twice gives identical activations") {
  const PriorConfig c = tiny();
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  perturb_output(p, 4);
  const auto codes = random_codes(c, 7);
  const Tensor ctx = random_context(c, 2);
  for (const auto& site : p.registry()) {
    const Tensor a = p.tap_activation(site.name, codes, &ctx), b = p.tap_activation(site.name, codes, &ctx);
    CHECK(a.to_vector() == b.to_vector());
  }
}

TEST_CASE("sample keeps the prefix and is seeded") {
  const PriorConfig c = tiny();
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  perturb_output(p, 4);
  const std::vector<std::int32_t> prefix{4, 1, 0};
  nn::Rng r1(5), r2(5);
  const auto a = sample(p, prefix, 1.0, r1), b = sample(p, prefix, 1.0, r2);
  CHECK(a == b);
  REQUIRE(a.size() == c.positions());
  CHECK(std::equal(prefix.begin(), prefix.end(), a.begin()));
  for (auto v : a) CHECK((v >= 0 && v < 5));
  CHECK_THROWS_AS(sample(p, prefix, -1.0, r1), std::invalid_argument);
}

TEST_CASE("prior checkpoint round trip") {
  const PriorConfig c = tiny();
  const Prior p = Prior::init(c, random_table(c, 1), 3);
  perturb_output(p, 4);
  const io::Checkpoint ck = p.to_checkpoint("abc123");
  CHECK(ck.parent_hash == "abc123");
  const Prior q = Prior::from_checkpoint(io::deserialize(io::serialize(ck)));
  CHECK(io::serialize(q.to_checkpoint("abc123")) == io::serialize(ck));
  const auto codes = random_codes(c, 6);
  nn::NoGradGuard g;
  CHECK(p.forward_logits(codes, nullptr, Mode::kInfer).to_vector() ==
        q.forward_logits(codes, nullptr, Mode::kInfer).to_vector());
}
