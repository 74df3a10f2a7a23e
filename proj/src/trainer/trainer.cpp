// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace vidbrain::trainer {

namespace {

bool mixed(const nn::PrecisionPolicy& p) { return p.mode == nn::PrecisionMode::kMixedHalf; }

}  // namespace

Optimizer::Optimizer(nn::ParamList params, nn::PrecisionPolicy policy)
    : params_(std::move(params)), policy_(policy) {
  policy_.validate();
  std::vector<std::size_t> sizes;
  for (const auto& [name, t] : params_) sizes.push_back(t.numel());
  state_ = make_optim_state(sizes);
  if (mixed(policy_)) {
    for (const auto& [name, t] : params_) master_.push_back(t.to_vector());
    write_shadow();
  }
}

void Optimizer::write_shadow() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].second.mutable_data();
    std::copy(master_[i].begin(), master_[i].end(), dst.begin());
    nn::round_half_inplace(dst);
  }
}

std::vector<std::vector<double>> Optimizer::master() const {
  if (mixed(policy_)) return master_;
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : params_) out.push_back(t.to_vector());
  return out;
}

StepResult Optimizer::step(const std::function<nn::Tensor()>& loss_fn, double lr) {
  std::vector<nn::Tensor> leaves;
  for (const auto& [name, t] : params_) leaves.push_back(t);
  nn::Tensor loss;
  std::vector<nn::Tensor> grads;
  {
    nn::HalfStorageScope half(mixed(policy_));
    loss = loss_fn();
    if (!std::isfinite(loss.item()))
      throw DivergenceError("non-finite loss at step " + std::to_string(steps_));
    grads = nn::grad(loss, leaves, policy_.loss_scale);
  }
  std::vector<std::vector<double>> g;
  g.reserve(grads.size());
  for (const auto& t : grads) g.push_back(t.to_vector());
  return apply(loss.item(), std::move(g), lr);
}

StepResult Optimizer::apply(double loss, std::vector<std::vector<double>> scaled_grads, double lr) {
  StepResult r{loss, false};
  const std::size_t step_index = steps_++;
  if (!mixed(policy_)) {
    std::vector<std::span<double>> p;
    std::vector<std::span<const double>> g;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      p.push_back(params_[i].second.mutable_data());
      g.emplace_back(scaled_grads[i]);
    }
    adam_step(std::move(p), g, state_, lr);
    return r;
  }

  bool overflow = false;
  for (const auto& g : scaled_grads) overflow = overflow || nn::has_nonfinite(g);
  if (overflow) {
    skipped_.push_back({step_index, policy_.loss_scale});
    policy_.loss_scale *= policy_.backoff_factor;
    clean_steps_ = 0;
    if (policy_.loss_scale < 1.0)
      throw DivergenceError("loss scale fell below 1 after repeated overflow at step " + std::to_string(step_index));
    r.skipped = true;
    return r;
  }
  const double inv = 1.0 / policy_.loss_scale;
  std::vector<std::span<double>> p;
  std::vector<std::span<const double>> g;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (double& x : scaled_grads[i]) x *= inv;
    p.emplace_back(master_[i]);
    g.emplace_back(scaled_grads[i]);
  }
  adam_step(std::move(p), g, state_, lr);
  write_shadow();
  if (++clean_steps_ >= policy_.growth_interval) {
    policy_.loss_scale *= policy_.growth_factor;
    clean_steps_ = 0;
  }
  return r;
}

TrainResult train(Optimizer& opt, std::size_t n_samples, const TrainOptions& options, const BatchLoss& loss,
                  const EpochHook& on_epoch) {
  if (n_samples == 0) throw std::invalid_argument("train: empty dataset");
  if (options.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  TrainResult result;
  const std::size_t per_epoch = (n_samples + options.batch_size - 1) / options.batch_size;
  std::size_t total = options.epochs * per_epoch;
  if (options.max_steps > 0) total = std::min(total, options.max_steps);
  if (total == 0) return result;

  nn::Rng rng(options.seed);
  std::vector<std::size_t> order(n_samples);
  std::size_t t = 0;
  try {
    for (std::size_t e = 1; e <= options.epochs && t < total; ++e) {
      const auto start = std::chrono::steady_clock::now();
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      double sum = 0.0, lr = 0.0;
      std::size_t seen = 0;
      for (std::size_t b = 0; b < per_epoch && t < total; ++b, ++t) {
        const std::size_t lo = b * options.batch_size, hi = std::min(n_samples, lo + options.batch_size);
        const std::vector<std::size_t> batch(order.begin() + lo, order.begin() + hi);
        lr = cosine_lr(t, options.lr_max, options.lr_min, total);
        const StepResult s = opt.step([&] { return loss(batch, rng); }, lr);
        sum += s.loss * static_cast<double>(batch.size());
        seen += batch.size();
      }
      EpochRecord rec;
      rec.epoch = e;
      rec.loss = sum / static_cast<double>(seen);
      rec.lr = lr;
      rec.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rec.loss_scale = opt.policy().loss_scale;
      result.epochs.push_back(rec);
      if (on_epoch) on_epoch(rec);
    }
  } catch (const DivergenceError& err) {
    result.diverged = true;
    result.error = err.what();
  }
  result.steps = t;
  result.skipped = opt.skipped();
  return result;
}

std::string loss_csv(const std::vector<EpochRecord>& epochs) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss,lr,wall_clock_s,loss_scale\n";
  for (const auto& r : epochs)
    out << r.epoch << "," << r.loss << "," << r.lr << "," << r.wall_clock_s << "," << r.loss_scale << "\n";
  return out.str();
}

}  // namespace vidbrain::trainer
