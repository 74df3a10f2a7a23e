// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "vidbrain/encoding/features.hpp"
#include "vidbrain/prior/prior.hpp"
#include "vidbrain/synth/bold.hpp"
#include "vidbrain/synth/video.hpp"
#include "vidbrain/trainer/trainer.hpp"
#include "vidbrain/vqvae/vqvae.hpp"

namespace vidbrain::bench {

inline constexpr const char* kToolVersion = "vidbrain 0.3.0";

struct StageOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 8;
  double lr_max = 3e-4;
  double lr_min = 0.0;
  std::size_t max_steps = 0;

  nlohmann::json to_json() const;
  static StageOptions from_json(const nlohmann::json& j, const StageOptions& defaults);
};

struct StimulusSpec {
  std::uint64_t seed = 1000;
  std::size_t n_trs = 300;
  double tr_seconds = 1.49;
  std::size_t runs = 1;

  nlohmann::json to_json() const;
  static StimulusSpec from_json(const nlohmann::json& j);
};

/// Everything one pipeline run depends on. Model widths that follow from
/// the VQ-VAE (n_codes, embedding_dim, context width, grid) are resolved
/// into the prior config by resolve().
struct RunConfig {
  std::uint64_t seed = 0;  // stage-2 seed
  std::string precision = "single";         // stage 2
  std::string stage1_precision = "single";  // stage 1, fixed across stage-2 sweeps
  vqvae::VqvaeConfig vqvae = vqvae::VqvaeConfig::desk();
  prior::PriorConfig prior = prior::PriorConfig::desk();
  synth::SynthSceneSpec scene;
  std::size_t pool_size = 3200;  // clips available for training
  std::size_t data_size = 800;   // clips used, a nested subsample of the pool
  std::uint64_t data_seed = 0;
  std::uint64_t vqvae_seed = 0;
  StageOptions vqvae_train{.epochs = 1, .batch_size = 4, .lr_max = 3e-4, .lr_min = 0.0, .max_steps = 150};
  StageOptions prior_train{.epochs = 2, .batch_size = 8, .lr_max = 3e-4, .lr_min = 0.0, .max_steps = 0};
  StimulusSpec stimulus;
  // Teacher: a separately seeded prior trained on the full pool, on top of
  // the full-pool stage-1 model.
  std::uint64_t teacher_seed = 500;
  prior::PriorConfig teacher_prior = prior::PriorConfig::desk();
  StageOptions teacher_train{.epochs = 2, .batch_size = 8, .lr_max = 3e-4, .lr_min = 0.0, .max_steps = 0};
  synth::TeacherSpec bold;  // seed is replaced per subject
  std::vector<std::uint64_t> subjects{1, 2, 3, 4};
  std::string tap;  // empty = default_tap(layers)
  std::string reducer = "pool";
  std::size_t delay_trs = 3;
  std::uint64_t split_seed = 0;
  std::vector<double> lambda_grid{0.1, 1.0, 100.0};
  bool record_wall_clock = true;

  /// Fills derived prior fields and the default tap, then validates.
  /// Throws std::invalid_argument naming the violated constraint.
  void resolve();
  std::string resolved_tap() const;
  nn::PrecisionPolicy policy() const;
  nn::PrecisionPolicy stage1_policy() const;
  nlohmann::json to_json() const;
  /// Unknown keys are rejected with std::invalid_argument.
  static RunConfig from_json(const nlohmann::json& j);
  /// SHA-256 of the canonical JSON of the resolved config.
  std::string fingerprint() const;
};

trainer::TrainOptions train_options(const StageOptions& s, const nn::PrecisionPolicy& policy, std::uint64_t seed);

}  // namespace vidbrain::bench
