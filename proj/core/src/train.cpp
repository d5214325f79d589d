// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "nakul/csv.hpp"
#include "nakul/errors.hpp"
#include "nakul/ops.hpp"

namespace nakul {

void TrainConfig::validate() const {
  auto bad = [](const char* key, const char* what) { throw ConfigError(key, what); };
  if (!(lr >= 0.0) || !std::isfinite(lr)) bad("train.lr", "must be nonnegative");
  if (!(weight_decay >= 0.0)) bad("train.weight_decay", "must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) bad("train.beta1", "must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) bad("train.beta2", "must be in [0, 1)");
  if (!(eps > 0.0)) bad("train.eps", "must be positive");
  if (batch_size < 1) bad("train.batch_size", "must be at least 1");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) bad("train.warmup_fraction", "must be in (0, 1)");
  if (!(start_divisor >= 1.0)) bad("train.start_divisor", "must be at least 1");
  if (!(final_lr >= 0.0)) bad("train.final_lr", "must be nonnegative");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) bad("train.label_smoothing", "must be in [0, 1)");
  if (!(grad_clip > 0.0)) bad("train.grad_clip", "must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) bad("train.val_fraction", "must be in (0, 1)");
}

double global_grad_norm(const std::vector<Parameter*>& params) {
  double s = 0.0;
  for (const auto* p : params)
    for (double g : p->grad.data()) s += g * g;
  return std::sqrt(s);
}

bool adamw_step(const std::vector<Parameter*>& params, AdamState& st, const TrainConfig& cfg, double lr) {
  for (const auto* p : params) {
    if (!p->grad.all_finite()) {
      ++st.skipped;
      return false;
    }
  }
  if (st.m.size() != params.size()) {
    st.m.clear();
    st.v.clear();
    for (const auto* p : params) {
      st.m.emplace_back(p->value.shape());
      st.v.emplace_back(p->value.shape());
    }
  }
  const double norm = global_grad_norm(params);
  const double clip = norm > cfg.grad_clip ? cfg.grad_clip / norm : 1.0;
  ++st.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(st.step));
  const double decay = 1.0 - lr * cfg.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->value.data();
    auto g = params[i]->grad.data();
    auto m = st.m[i].data();
    auto v = st.v[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j] * clip;
      w[j] *= decay;
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.eps);
    }
  }
  return true;
}

double onecycle_lr(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
  if (total_steps == 0) return cfg.lr;
  const double start = cfg.lr / cfg.start_divisor;
  const double warm = cfg.warmup_fraction * double(total_steps);
  const double s = double(step);
  if (s < warm) return start + (cfg.lr - start) * s / warm;
  const double span = double(total_steps - 1) - warm;
  if (span <= 0.0) return cfg.final_lr;
  const double progress = std::min(1.0, (s - warm) / span);
  return cfg.final_lr + (cfg.lr - cfg.final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::size_t max_jitter(double rate, const AugmentConfig& cfg) {
  // Floor keeps the shift inside the jitter window; epsilon absorbs 0.05 * rate round-off.
  return static_cast<std::size_t>(std::floor(cfg.jitter_seconds * rate + 1e-9));
}

Tensor augment(const Tensor& x, double rate, Rng& rng, const AugmentConfig& cfg) {
  if (x.rank() != 2) throw ShapeError("augment expects [C, T], got " + to_string(x.shape()));
  const std::size_t C = x.dim(0), T = x.dim(1);
  const auto s = static_cast<std::int64_t>(max_jitter(rate, cfg));
  const std::int64_t shift = rng.integer(-s, s);
  const double scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
  Tensor y({C, T});
  const auto Ti = static_cast<std::int64_t>(T);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::int64_t t = 0; t < Ti; ++t) {
      const std::int64_t src = ((t - shift) % Ti + Ti) % Ti;
      y[c * T + std::size_t(t)] = scale * x[c * T + std::size_t(src)];
    }
  }
  if (cfg.noise_sigma > 0.0) {
    for (auto& v : y.data()) v += rng.normal(0.0, cfg.noise_sigma);
  }
  return y;
}

namespace {

std::vector<int> argmax_rows(const Tensor& logits) {
  const std::size_t B = logits.dim(0), n = logits.dim(1);
  std::vector<int> out(B);
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = logits.ptr() + b * n;
    out[b] = int(std::max_element(row, row + n) - row);
  }
  return out;
}

}  // namespace

EvalResult evaluate(NakulModel& model, const graph::ElectrodeGraph& g, const Dataset& data,
                    const std::vector<std::size_t>& indices, double label_smoothing, std::size_t batch_size) {
  EvalResult r;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    std::vector<std::size_t> idx(indices.begin() + start,
                                 indices.begin() + std::min(indices.size(), start + batch_size));
    const auto labels = data.labels(idx);
    Tape tape(false);
    Var logits = model.forward(tape, data.batch(idx), g);
    Var loss = ops::smoothed_cross_entropy(logits, labels, label_smoothing);
    loss_sum += loss.value().item() * double(idx.size());
    const auto pred = argmax_rows(logits.value());
    r.predicted.insert(r.predicted.end(), pred.begin(), pred.end());
    r.truth.insert(r.truth.end(), labels.begin(), labels.end());
  }
  if (!indices.empty()) {
    r.loss = loss_sum / double(indices.size());
    std::size_t hit = 0;
    for (std::size_t i = 0; i < r.truth.size(); ++i) hit += r.predicted[i] == r.truth[i];
    r.accuracy = double(hit) / double(r.truth.size());
  }
  return r;
}

double train_step_loss(NakulModel& model, const graph::ElectrodeGraph& g, const Tensor& x,
                       const std::vector<int>& labels, double label_smoothing, Rng* rng) {
  Tape tape;
  ForwardOptions opts;
  opts.training = rng != nullptr;
  opts.rng = rng;
  Var loss = ops::smoothed_cross_entropy(model.forward(tape, x, g, opts), labels, label_smoothing);
  const double value = loss.value().item();
  if (!std::isfinite(value)) return value;
  tape.backward(loss);
  return value;
}

TrainResult train(NakulModel& model, const graph::ElectrodeGraph& g, const Dataset& data, const Split& split,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (split.train.empty()) throw std::invalid_argument("training split is empty");
  TrainResult result;
  const auto params = model.parameters();
  Rng shuffle_rng = Rng::stream(cfg.seed, "shuffle");
  Rng augment_rng = Rng::stream(cfg.seed, "augment");
  Rng dropout_rng = Rng::stream(cfg.seed, "dropout");

  const std::size_t steps_per_epoch = (split.train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;
  AdamState state;
  std::vector<Tensor> best;
  std::size_t since_improvement = 0;
  std::size_t step = 0;
  std::vector<std::size_t> order = split.train;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    double loss_sum = 0.0, lr = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + std::min(order.size(), start + cfg.batch_size));
      Tensor x = data.batch(idx);
      if (cfg.augment) {
        const std::size_t per = data.channels * data.length;
        for (std::size_t i = 0; i < idx.size(); ++i) {
          Tensor one({data.channels, data.length}, std::vector<double>(x.ptr() + i * per, x.ptr() + (i + 1) * per));
          Tensor aug = augment(one, data.rate, augment_rng);
          std::copy_n(aug.ptr(), per, x.ptr() + i * per);
        }
      }
      model.zero_grad();
      const double loss = train_step_loss(model, g, x, data.labels(idx), cfg.label_smoothing, &dropout_rng);
      if (!std::isfinite(loss)) {
        throw TrainingAbort("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step) + " (lr " + format_number(lr) + ")");
      }
      lr = hooks.lr_schedule ? hooks.lr_schedule(step, total_steps) : onecycle_lr(step, total_steps, cfg);
      adamw_step(params, state, cfg, lr);
      loss_sum += loss * double(idx.size());
    }
    const EvalResult val = evaluate(model, g, data, split.val, cfg.label_smoothing);
    EpochMetrics m{epoch, loss_sum / double(order.size()), val.loss, val.accuracy, lr};
    result.history.push_back(m);
    if (hooks.on_epoch) hooks.on_epoch(m);

    const bool acc_improved = result.best_epoch == 0 || val.accuracy > result.best_val_acc;
    const bool better = acc_improved || (val.accuracy == result.best_val_acc && val.loss < result.best_val_loss);
    if (better) {
      result.best_epoch = epoch;
      result.best_val_acc = val.accuracy;
      result.best_val_loss = val.loss;
      best.clear();
      for (const auto* p : params) best.push_back(p->value);
    }
    since_improvement = acc_improved ? 0 : since_improvement + 1;
    if (since_improvement >= cfg.patience && cfg.patience > 0) {
      result.early_stopped = true;
      break;
    }
  }
  if (!best.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  }
  result.skipped_steps = state.skipped;
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& history) {
  out << "epoch,train_loss,val_loss,val_acc,lr\n";
  for (const auto& m : history) {
    out << m.epoch << ',' << format_number(m.train_loss) << ',' << format_number(m.val_loss) << ','
        << format_number(m.val_acc) << ',' << format_number(m.lr) << '\n';
  }
}

}  // namespace nakul
