// SPDX-License-Identifier: Apache-2.0
// Run configurations used by the acceptance criteria. Sizes are chosen to
// fit the runtime bounds on one core.
#pragma once

#include "vidbrain/bench/config.hpp"

namespace vidbrain::acceptance {

inline prior::PriorConfig desk_prior() { return prior::PriorConfig::desk(); }

// Desk models, a 300-TR stimulus and a VQ-VAE trained just long enough to
// seed its codebook from data.
inline bench::RunConfig recovery_config() {
  bench::RunConfig c;
  c.stimulus.n_trs = 300;
  c.vqvae_train.max_steps = 8;
  c.resolve();
  return c;
}

// Data-size sweep at desk widths with two prior layers. Stage 1 runs one
// uncapped epoch, so its training set grows with the data condition.
inline bench::RunConfig data_size_config() {
  bench::RunConfig c;
  c.pool_size = 3200;
  c.data_size = 200;
  c.prior.layers = 2;
  c.teacher_prior.layers = 2;
  c.vqvae_train.max_steps = 0;
  c.prior_train.epochs = 1;
  c.prior_train.lr_max = 2e-3;
  c.teacher_train.epochs = 1;
  c.teacher_train.lr_max = 2e-3;
  c.stimulus.n_trs = 100;
  c.record_wall_clock = false;
  c.resolve();
  return c;
}

inline bench::RunConfig precision_config() {
  bench::RunConfig c;
  c.pool_size = 100;
  c.data_size = 100;
  c.vqvae_train.max_steps = 30;
  c.prior_train.epochs = 1;
  c.teacher_train.epochs = 1;
  c.stimulus.n_trs = 100;
  c.record_wall_clock = false;
  c.resolve();
  return c;
}

inline bench::RunConfig baseline_config() {
  bench::RunConfig c;
  c.pool_size = 50;
  c.data_size = 50;
  c.vqvae_train.max_steps = 30;
  c.prior_train.epochs = 5;
  c.prior_train.lr_max = 1e-3;
  c.resolve();
  return c;
}

// Small enough to run twice.
inline bench::RunConfig rerun_config() {
  bench::RunConfig c;
  c.vqvae.n_hiddens = 24;
  c.vqvae.embedding_dim = 16;
  c.vqvae.n_codes = 32;
  c.prior.hidden_dim = 12;
  c.prior.layers = 2;
  c.teacher_prior = c.prior;
  c.pool_size = 40;
  c.data_size = 40;
  c.vqvae_train.max_steps = 5;
  c.prior_train.epochs = 1;
  c.prior_train.batch_size = 4;
  c.teacher_train.epochs = 1;
  c.teacher_train.batch_size = 4;
  c.stimulus.n_trs = 40;
  c.bold.n_parcels = 8;
  c.subjects = {1, 2};
  c.record_wall_clock = false;
  c.resolve();
  return c;
}

}  // namespace vidbrain::acceptance
