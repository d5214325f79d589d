// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "nakul/config.hpp"
#include "nakul/dynamic.hpp"
#include "nakul/graph.hpp"
#include "nakul/model.hpp"
#include "nakul/ops.hpp"
#include "nakul/spectral.hpp"
#include "nakul/ssm.hpp"

namespace nakul {

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(0.0, scale);
  return t;
}

// Doubles its input but reports three times the gradient.
Var faulty_double(const Var& a) {
  Tape& tape = *a.tape();
  Tensor y = a.value();
  y *= 2.0;
  return tape.record(std::move(y), {a}, [&tape, a](const Tensor& g) {
    Tensor& ga = tape.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 3.0 * g[i];
  });
}

// Weighted sum of all entries against a fixed random probe.
Var probe_sum(const Var& y, const Tensor& probe) { return ops::sum(ops::mul_const(y, probe)); }

// Forward value on the top-k support recorded with the analytic gradient.
double evaluate(const GradCheckCase& c, std::vector<std::vector<unsigned char>>& support) {
  ops::TopkSupportPin pin(support, ops::TopkSupportPin::Mode::kReplay);
  Tape tape(false);
  return c.build(tape).value().item();
}

}  // namespace

GradCheckResult check_gradients(const GradCheckCase& c, const GradCheckOptions& opts) {
  GradCheckResult r;
  r.module = c.module;
  for (auto* p : c.params) p->zero_grad();
  std::vector<std::vector<unsigned char>> support;
  {
    ops::TopkSupportPin pin(support, ops::TopkSupportPin::Mode::kRecord);
    Tape tape;
    Var loss = c.build(tape);
    tape.backward(loss);
  }
  // Every parameter tensor gets one sample before the rest are spread by size.
  Rng rng = Rng::stream(opts.seed, "gradcheck." + c.module);
  std::vector<std::pair<std::size_t, std::size_t>> picks;
  std::size_t total = 0;
  for (auto* p : c.params) total += p->value.size();
  for (std::size_t i = 0; i < c.params.size() && picks.size() < opts.samples; ++i) {
    picks.emplace_back(i, std::size_t(rng.integer(0, std::int64_t(c.params[i]->value.size()) - 1)));
  }
  while (picks.size() < std::min(opts.samples, total)) {
    std::size_t flat = std::size_t(rng.integer(0, std::int64_t(total) - 1));
    std::size_t i = 0;
    while (flat >= c.params[i]->value.size()) flat -= c.params[i++]->value.size();
    picks.emplace_back(i, flat);
  }
  for (auto [i, j] : picks) {
    Parameter& p = *c.params[i];
    const double orig = p.value[j];
    p.value[j] = orig + opts.step;
    const double up = evaluate(c, support);
    p.value[j] = orig - opts.step;
    const double down = evaluate(c, support);
    p.value[j] = orig;
    const double numeric = (up - down) / (2.0 * opts.step);
    const double analytic = p.grad[j];
    const double err = relative_error(analytic, numeric, opts.floor);
    if (r.samples == 0 || err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_parameter = p.name;
      r.worst_index = j;
      r.worst_analytic = analytic;
      r.worst_numeric = numeric;
    }
    ++r.samples;
  }
  return r;
}

namespace {

std::function<Var(Tape&)> maybe_corrupt(const std::string& module, const GradCheckOptions& opts,
                                        std::function<Var(Tape&)> build) {
  if (opts.corrupt != module) return build;
  return [build](Tape& tape) { return faulty_double(build(tape)); };
}

GradCheckResult check_tensor_engine(const GradCheckOptions& opts) {
  Rng rng = Rng::stream(opts.seed, "gc.tensor_engine");
  Parameter x("x", random_tensor({3, 8, 4}, rng));
  Parameter w("w", random_tensor({4, 4}, rng, 0.5));
  Parameter w2("w2", random_tensor({4, 3}, rng, 0.5));
  Parameter gamma("gamma", random_tensor({4}, rng, 0.3));
  Parameter beta("beta", random_tensor({4}, rng, 0.3));
  for (auto& v : gamma.value.data()) v += 1.0;
  const Tensor p1 = random_tensor({3, 5, 4}, rng), p2 = random_tensor({3, 4}, rng), p3 = random_tensor({24, 3}, rng);
  const Tensor p4 = random_tensor({3, 8, 4}, rng);
  GradCheckCase c{"tensor_engine", {&x, &w, &w2, &gamma, &beta}, nullptr};
  c.build = maybe_corrupt(c.module, opts, [&](Tape& t) {
    Var y = ops::layer_norm(t.param(x), t.param(gamma), t.param(beta));
    y = ops::gelu(ops::linear(y, t.param(w)));
    Var spec = ops::softmax(ops::softplus(ops::complex_abs(ops::rfft(y))));
    Var round = ops::irfft(ops::rfft(ops::mul(y, ops::sigmoid(y))), 8);
    Var pooled = ops::mean_groups(ops::swap_axes12(ops::reshape(y, {3, 8, 1, 4})), 3, 4);
    Var mm = ops::matmul(ops::reshape(y, {24, 4}), t.param(w2));
    Var loss = ops::add(probe_sum(spec, p1), probe_sum(pooled, p2));
    loss = ops::add(loss, probe_sum(mm, p3));
    return ops::add(loss, ops::scale(probe_sum(round, p4), 0.5));
  });
  return check_gradients(c, opts);
}

GradCheckResult check_ssm(const GradCheckOptions& opts) {
  Rng rng = Rng::stream(opts.seed, "gc.ssm_core");
  const std::size_t N = 4, D = 6, L = 16;
  ssm::SelectiveParams sp = ssm::SelectiveParams::random(N, D, rng);
  ssm::SsmParams base = ssm::default_params(N);
  base.D_skip = 0.3;
  const Tensor x = random_tensor({L, D}, rng), probe = random_tensor({L}, rng);
  GradCheckCase c{"ssm_core", {&sp.w_delta, &sp.w_b, &sp.w_c}, nullptr};
  c.build = maybe_corrupt(c.module, opts, [&](Tape& t) {
    return probe_sum(ssm::selective_scan(sp, base, t.constant(x)), probe);
  });
  return check_gradients(c, opts);
}

GradCheckResult check_spectral(const GradCheckOptions& opts) {
  Rng rng = Rng::stream(opts.seed, "gc.spectral_branch");
  const std::size_t D = 4, T = 16;
  // 16 samples at 32 Hz: bins every 2 Hz up to 16 Hz, covering the default centers scaled by 0.25.
  spectral::SpectralBranch branch(D, {4, 32.0, 0.25}, rng);
  for (auto& v : branch.w_gate.value.data()) v *= 0.1;
  const Tensor x = random_tensor({3, T, D}, rng), probe = random_tensor({3, T, D}, rng);
  GradCheckCase c{"spectral_branch", branch.parameters(), nullptr};
  c.build = maybe_corrupt(c.module, opts, [&](Tape& t) {
    return probe_sum(branch.forward(t, t.constant(x)), probe);
  });
  return check_gradients(c, opts);
}

GradCheckResult check_dynamic(const GradCheckOptions& opts) {
  Rng rng = Rng::stream(opts.seed, "gc.dynamic_branch");
  const std::size_t D = 4, T = 16;
  dynamic::DynamicBranch branch(D, dynamic::kDefaultKernelSizes, rng);
  const Tensor x = random_tensor({3, T, D}, rng), probe = random_tensor({3, T, D}, rng);
  GradCheckCase c{"dynamic_branch", branch.parameters(), nullptr};
  c.build = maybe_corrupt(c.module, opts, [&](Tape& t) {
    return probe_sum(branch.forward(t, t.constant(x)), probe);
  });
  return check_gradients(c, opts);
}

GradCheckResult check_graph(const GradCheckOptions& opts) {
  Rng rng = Rng::stream(opts.seed, "gc.graph_branch");
  const std::size_t D = 8, C = 6;
  graph::SpatialAttention attn(D, C, 2, 3, rng);
  const auto g = graph::build_graph(graph::circle_layout(C, 0.05));
  const Tensor x = random_tensor({2, C, D}, rng), probe = random_tensor({2, C, D}, rng);
  GradCheckCase c{"graph_branch", attn.parameters(), nullptr};
  c.build = maybe_corrupt(c.module, opts, [&](Tape& t) {
    return probe_sum(attn.forward(t, g, t.constant(x)), probe);
  });
  return check_gradients(c, opts);
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.channels = 4;
  m.length = 40;
  m.classes = 3;
  m.rate = 40.0;
  m.patch = 5;
  m.dim = 8;
  m.blocks = 2;
  m.heads = 2;
  m.k_top = 3;
  m.ffn_hidden = 16;
  m.head_hidden = 6;
  return m;
}

GradCheckResult check_model_case(const std::string& module, const ModelConfig& mc, std::size_t batch,
                                 double smoothing, const GradCheckOptions& opts, const graph::ElectrodeGraph& g) {
  NakulModel model(mc, opts.seed);
  Rng rng = Rng::stream(opts.seed, "gc." + module);
  const Tensor x = random_tensor({batch, mc.channels, mc.length}, rng);
  std::vector<int> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) labels[i] = int(i % mc.classes);
  GradCheckCase c{module, model.parameters(), nullptr};
  for (auto& [name, p] : model.named_parameters()) p->name = name;
  c.build = maybe_corrupt(module, opts, [&](Tape& t) {
    return ops::smoothed_cross_entropy(model.forward(t, x, g), labels, smoothing);
  });
  return check_gradients(c, opts);
}

GradCheckResult check_training(const GradCheckOptions& opts) {
  Rng rng = Rng::stream(opts.seed, "gc.training_harness");
  Parameter logits("logits", random_tensor({10, 6}, rng));
  std::vector<int> labels(10);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = int(rng.integer(0, 5));
  GradCheckCase c{"training_harness", {&logits}, nullptr};
  c.build = maybe_corrupt(c.module, opts, [&](Tape& t) {
    return ops::smoothed_cross_entropy(t.param(logits), labels, 0.1);
  });
  return check_gradients(c, opts);
}

}  // namespace

std::vector<GradCheckResult> check_all_modules(const RunConfig& cfg, const GradCheckOptions& opts) {
  std::vector<GradCheckResult> out;
  out.push_back(check_tensor_engine(opts));
  out.push_back(check_ssm(opts));
  out.push_back(check_spectral(opts));
  out.push_back(check_dynamic(opts));
  out.push_back(check_graph(opts));
  {
    const ModelConfig mc = tiny_model();
    const auto g = graph::build_graph(graph::circle_layout(mc.channels, 0.03));
    out.push_back(check_model_case("nakul_model", mc, 3, 0.0, opts, g));
  }
  out.push_back(check_training(opts));
  {
    RunConfig run = cfg;
    run.finalize();
    out.push_back(check_model_case("cli", run.model, 2, run.train.label_smoothing, opts, make_graph(run)));
  }
  return out;
}

}  // namespace nakul
