// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// AdamW with global-norm clipping, the one-cycle schedule, augmentation and
// the train/evaluate loops.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "nakul/data.hpp"
#include "nakul/graph.hpp"
#include "nakul/model.hpp"

namespace nakul {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  double warmup_fraction = 0.3;
  double start_divisor = 25.0;
  double final_lr = 1e-6;
  double label_smoothing = 0.1;
  std::size_t patience = 25;
  std::uint64_t seed = 0;
  double grad_clip = 1.0;
  double val_fraction = 0.2;
  bool augment = true;

  void validate() const;
};

struct AdamState {
  std::vector<Tensor> m, v;
  std::size_t step = 0;
  std::size_t skipped = 0;
};

/// Euclidean norm over every gradient entry.
double global_grad_norm(const std::vector<Parameter*>& params);

/// One AdamW update from Parameter::grad: clip to cfg.grad_clip (global
/// norm), decoupled decay p *= 1 - lr * wd, then the bias-corrected Adam
/// step. Returns false and bumps state.skipped, leaving everything else
/// untouched, when any gradient is non-finite.
bool adamw_step(const std::vector<Parameter*>& params, AdamState& state, const TrainConfig& cfg, double lr);

/// Linear ramp from lr / start_divisor to lr over the first warmup_fraction
/// of steps, then cosine decay to final_lr at step total_steps - 1.
double onecycle_lr(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

struct AugmentConfig {
  double jitter_seconds = 0.05;
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double noise_sigma = 0.05;
};

/// Largest circular shift in samples: floor(jitter_seconds * rate).
std::size_t max_jitter(double rate, const AugmentConfig& cfg = {});

/// x [C, T]: circular shift, global amplitude scale, additive Gaussian noise.
Tensor augment(const Tensor& x, double rate, Rng& rng, const AugmentConfig& cfg = {});

struct EvalResult {
  std::vector<int> predicted;
  std::vector<int> truth;
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalResult evaluate(NakulModel& model, const graph::ElectrodeGraph& g, const Dataset& data,
                    const std::vector<std::size_t>& indices, double label_smoothing,
                    std::size_t batch_size = 32);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;  // at the last step of the epoch
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  double best_val_acc = 0.0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
  std::size_t skipped_steps = 0;
};

struct TrainHooks {
  /// Called after every epoch.
  std::function<void(const EpochMetrics&)> on_epoch;
  /// Overrides the learning rate schedule when set.
  std::function<double(std::size_t step, std::size_t total)> lr_schedule;
};

/// Trains on split.train, selects on split.val, and leaves the model holding
/// the best parameters (highest val accuracy, ties to lower val loss). Throws
/// TrainingAbort on a non-finite loss.
TrainResult train(NakulModel& model, const graph::ElectrodeGraph& g, const Dataset& data, const Split& split,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Training loss of one batch plus gradients into Parameter::grad.
double train_step_loss(NakulModel& model, const graph::ElectrodeGraph& g, const Tensor& x,
                       const std::vector<int>& labels, double label_smoothing, Rng* rng);

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& history);

}  // namespace nakul
