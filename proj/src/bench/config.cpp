// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/bench/config.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "vidbrain/io/hash.hpp"

namespace vidbrain::bench {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw std::invalid_argument(where + ": unknown key '" + key + "'");
}

}  // namespace

nlohmann::json StageOptions::to_json() const {
  return {{"epochs", epochs}, {"batch_size", batch_size}, {"lr_max", lr_max}, {"lr_min", lr_min},
          {"max_steps", max_steps}};
}

StageOptions StageOptions::from_json(const nlohmann::json& j, const StageOptions& d) {
  reject_unknown(j, {"epochs", "batch_size", "lr_max", "lr_min", "max_steps"}, "training options");
  StageOptions s;
  s.epochs = j.value("epochs", d.epochs);
  s.batch_size = j.value("batch_size", d.batch_size);
  s.lr_max = j.value("lr_max", d.lr_max);
  s.lr_min = j.value("lr_min", d.lr_min);
  s.max_steps = j.value("max_steps", d.max_steps);
  return s;
}

nlohmann::json StimulusSpec::to_json() const {
  return {{"seed", seed}, {"n_trs", n_trs}, {"tr_seconds", tr_seconds}, {"runs", runs}};
}

StimulusSpec StimulusSpec::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"seed", "n_trs", "tr_seconds", "runs"}, "stimulus");
  StimulusSpec s;
  s.seed = j.value("seed", s.seed);
  s.n_trs = j.value("n_trs", s.n_trs);
  s.tr_seconds = j.value("tr_seconds", s.tr_seconds);
  s.runs = j.value("runs", s.runs);
  return s;
}

std::string RunConfig::resolved_tap() const { return tap.empty() ? prior::default_tap(prior.layers) : tap; }

namespace {
nn::PrecisionPolicy policy_for(const std::string& name) {
  return nn::parse_precision(name) == nn::PrecisionMode::kSingle ? nn::PrecisionPolicy::single()
                                                                 : nn::PrecisionPolicy::mixed_half();
}
}  // namespace

nn::PrecisionPolicy RunConfig::policy() const { return policy_for(precision); }
nn::PrecisionPolicy RunConfig::stage1_policy() const { return policy_for(stage1_precision); }

void RunConfig::resolve() {
  vqvae.validate();
  prior.n_codes = vqvae.n_codes;
  prior.embedding_dim = vqvae.embedding_dim;
  prior.context_dim = vqvae.n_hiddens;
  prior.grid = vqvae.latent_grid();
  prior.validate();
  teacher_prior.n_codes = vqvae.n_codes;
  teacher_prior.embedding_dim = vqvae.embedding_dim;
  teacher_prior.context_dim = vqvae.n_hiddens;
  teacher_prior.grid = vqvae.latent_grid();
  teacher_prior.validate();
  scene.validate();
  bold.validate();
  nn::parse_precision(precision);
  nn::parse_precision(stage1_precision);
  encoding::parse_reducer(reducer);
  if (scene.frame_size != vqvae.frame_size)
    throw std::invalid_argument("scene frame_size (" + std::to_string(scene.frame_size) +
                                ") must match the VQ-VAE frame_size (" + std::to_string(vqvae.frame_size) + ")");
  if (pool_size == 0) throw std::invalid_argument("pool_size must be positive");
  if (data_size == 0 || data_size > pool_size)
    throw std::invalid_argument("data_size must lie in [1, pool_size = " + std::to_string(pool_size) + "]");
  for (const StageOptions* s : {&vqvae_train, &prior_train, &teacher_train})
  {
    if (s->batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (!(s->lr_max > 0 && std::isfinite(s->lr_max) && s->lr_min >= 0 && s->lr_min <= s->lr_max))
      throw std::invalid_argument("learning rates need 0 <= lr_min <= lr_max and a finite lr_max > 0");
  }
  if (!(stimulus.tr_seconds > 0)) throw std::invalid_argument("stimulus tr_seconds must be > 0");
  if (stimulus.runs == 0 || stimulus.n_trs < 2 * stimulus.runs)
    throw std::invalid_argument("stimulus needs at least 2 TRs per run");
  if (subjects.empty()) throw std::invalid_argument("at least one subject is required");
  if (lambda_grid.empty()) throw std::invalid_argument("lambda_grid must not be empty");
  for (double l : lambda_grid)
    if (!(l >= 0)) throw std::invalid_argument("lambda_grid values must be >= 0");
  // Throws for unknown taps only once the model exists; check the block index here.
  const std::string t = resolved_tap();
  const std::string prefix = "attn_stack.attn_nets.";
  if (t.rfind(prefix, 0) != 0) throw std::invalid_argument("unknown tap '" + t + "'");
  const std::size_t block = std::stoul(t.substr(prefix.size()));
  if (block >= prior.layers)
    throw std::invalid_argument("tap '" + t + "' needs block " + std::to_string(block) + " but the prior has " +
                                std::to_string(prior.layers) + " blocks");
}

nlohmann::json RunConfig::to_json() const {
  return {{"seed", seed},
          {"precision", precision},
          {"stage1_precision", stage1_precision},
          {"vqvae", vqvae.to_json()},
          {"prior", prior.to_json()},
          {"scene", scene.to_json()},
          {"pool_size", pool_size},
          {"data_size", data_size},
          {"data_seed", data_seed},
          {"vqvae_seed", vqvae_seed},
          {"vqvae_train", vqvae_train.to_json()},
          {"prior_train", prior_train.to_json()},
          {"stimulus", stimulus.to_json()},
          {"teacher_seed", teacher_seed},
          {"teacher_prior", teacher_prior.to_json()},
          {"teacher_train", teacher_train.to_json()},
          {"bold", bold.to_json()},
          {"subjects", subjects},
          {"tap", tap},
          {"reducer", reducer},
          {"delay_trs", delay_trs},
          {"split_seed", split_seed},
          {"lambda_grid", lambda_grid},
          {"record_wall_clock", record_wall_clock}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"seed", "precision", "stage1_precision", "vqvae", "prior", "scene", "pool_size", "data_size", "data_seed", "vqvae_seed",
                  "vqvae_train", "prior_train", "stimulus", "teacher_seed", "teacher_prior", "teacher_train", "bold", "subjects", "tap",
                  "reducer", "delay_trs", "split_seed", "lambda_grid", "record_wall_clock"},
                 "config");
  RunConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.precision = j.value("precision", c.precision);
    c.stage1_precision = j.value("stage1_precision", c.stage1_precision);
    if (j.contains("vqvae")) c.vqvae = vqvae::VqvaeConfig::from_json(j["vqvae"]);
    if (j.contains("prior")) c.prior = prior::PriorConfig::from_json(j["prior"]);
    if (j.contains("scene")) c.scene = synth::SynthSceneSpec::from_json(j["scene"]);
    c.pool_size = j.value("pool_size", c.pool_size);
    c.data_size = j.value("data_size", c.data_size);
    c.data_seed = j.value("data_seed", c.data_seed);
    c.vqvae_seed = j.value("vqvae_seed", c.vqvae_seed);
    if (j.contains("vqvae_train")) c.vqvae_train = StageOptions::from_json(j["vqvae_train"], c.vqvae_train);
    if (j.contains("prior_train")) c.prior_train = StageOptions::from_json(j["prior_train"], c.prior_train);
    if (j.contains("stimulus")) c.stimulus = StimulusSpec::from_json(j["stimulus"]);
    c.teacher_seed = j.value("teacher_seed", c.teacher_seed);
    if (j.contains("teacher_prior")) c.teacher_prior = prior::PriorConfig::from_json(j["teacher_prior"]);
    if (j.contains("teacher_train")) c.teacher_train = StageOptions::from_json(j["teacher_train"], c.teacher_train);
    if (j.contains("bold")) c.bold = synth::TeacherSpec::from_json(j["bold"]);
    c.subjects = j.value("subjects", c.subjects);
    c.tap = j.value("tap", c.tap);
    c.reducer = j.value("reducer", c.reducer);
    c.delay_trs = j.value("delay_trs", c.delay_trs);
    c.split_seed = j.value("split_seed", c.split_seed);
    c.lambda_grid = j.value("lambda_grid", c.lambda_grid);
    c.record_wall_clock = j.value("record_wall_clock", c.record_wall_clock);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return c;
}

std::string RunConfig::fingerprint() const { return io::sha256_hex(to_json().dump()); }

trainer::TrainOptions train_options(const StageOptions& s, const nn::PrecisionPolicy& policy, std::uint64_t seed) {
  trainer::TrainOptions o;
  o.epochs = s.epochs;
  o.batch_size = s.batch_size;
  o.lr_max = s.lr_max;
  o.lr_min = s.lr_min;
  o.max_steps = s.max_steps;
  o.policy = policy;
  o.seed = seed;
  return o;
}

}  // namespace vidbrain::bench
