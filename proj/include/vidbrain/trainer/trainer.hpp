// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vidbrain/nn/layers.hpp"
#include "vidbrain/nn/precision.hpp"
#include "vidbrain/trainer/optim.hpp"

namespace vidbrain::trainer {

struct SkipRecord {
  std::size_t step = 0;
  double loss_scale = 0.0;  // scale in effect when the overflow occurred
};

struct StepResult {
  double loss = 0.0;  // unscaled
  bool skipped = false;
};

/// Owns the optimizer state and, in mixed-half mode, the full-precision
/// master copy of every trainable parameter. The module's tensors then hold
/// the binary16 shadow of the master weights.
class Optimizer {
 public:
  Optimizer(nn::ParamList params, nn::PrecisionPolicy policy);

  /// Builds the loss with `loss_fn`, runs the reverse pass and applies one
  /// Adam step at learning rate `lr`. In mixed-half mode the forward runs
  /// under half storage and the reverse pass is seeded with the loss scale;
  /// a non-finite gradient skips the step and backs the scale off. Throws
  /// DivergenceError for a non-finite loss or gradient in single mode, or
  /// when the loss scale falls below 1.
  StepResult step(const std::function<nn::Tensor()>& loss_fn, double lr);

  /// Same as step() with precomputed parameter gradients of the unscaled
  /// loss times the current loss scale.
  StepResult apply(double loss, std::vector<std::vector<double>> scaled_grads, double lr);

  const nn::PrecisionPolicy& policy() const { return policy_; }
  const std::vector<SkipRecord>& skipped() const { return skipped_; }
  const OptimState& state() const { return state_; }
  std::size_t steps() const { return steps_; }
  const nn::ParamList& params() const { return params_; }
  /// Master values (mixed-half) or the parameters themselves (single).
  std::vector<std::vector<double>> master() const;

 private:
  void write_shadow();

  nn::ParamList params_;
  nn::PrecisionPolicy policy_;
  OptimState state_;
  std::vector<std::vector<double>> master_;
  std::vector<SkipRecord> skipped_;
  std::size_t steps_ = 0;
  int clean_steps_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // sample-weighted mean over the epoch
  double lr = 0.0;        // rate used by the epoch's last step
  double wall_clock_s = 0.0;
  double loss_scale = 1.0;
};

struct TrainOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 8;
  double lr_max = 3e-4;
  double lr_min = 0.0;
  /// Caps the total step count (0 = no cap); T_max is the capped total.
  std::size_t max_steps = 0;
  nn::PrecisionPolicy policy;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::vector<SkipRecord> skipped;
  std::size_t steps = 0;
  bool diverged = false;
  std::string error;
};

/// Builds the mean loss of one batch of sample indices.
using BatchLoss = std::function<nn::Tensor(const std::vector<std::size_t>& batch, nn::Rng& rng)>;
/// Called after every completed epoch (1-based).
using EpochHook = std::function<void(const EpochRecord&)>;

/// Epoch loop over `n_samples` with a seeded shuffle per epoch and the
/// cosine schedule over the total step count. Divergence stops the loop and
/// is reported in the result; completed epochs are kept.
TrainResult train(Optimizer& opt, std::size_t n_samples, const TrainOptions& options, const BatchLoss& loss,
                  const EpochHook& on_epoch = {});

/// "epoch,loss,lr,wall_clock_s,loss_scale".
std::string loss_csv(const std::vector<EpochRecord>& epochs);

}  // namespace vidbrain::trainer
