// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/model.hpp"

#include <cmath>
#include <cstdint>

#include "nakul/errors.hpp"
#include "nakul/ops.hpp"

namespace nakul {

namespace {

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(double(fan_in));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

Var bias_add(Tape& tape, const Var& x, Parameter& b) { return ops::add_trailing(x, tape.param(b)); }

// Inverted dropout mask with keep probability 1 - p.
Tensor dropout_mask(const Shape& shape, double p, Rng& rng) {
  Tensor m(shape);
  const double keep = 1.0 / (1.0 - p);
  // Two 32-bit draws per engine call; p is resolved to 2^-32.
  const auto cut = static_cast<std::uint64_t>(std::ldexp(p, 32));
  std::span<double> d = m.data();
  for (std::size_t i = 0; i < d.size(); i += 2) {
    const std::uint64_t r = rng.next();
    d[i] = (r & 0xffffffffULL) < cut ? 0.0 : keep;
    if (i + 1 < d.size()) d[i + 1] = (r >> 32) < cut ? 0.0 : keep;
  }
  return m;
}

Var dropout(const Var& x, double p, const ForwardOptions& opts) {
  if (!opts.training || p <= 0.0) return x;
  return ops::mul_const(x, dropout_mask(x.shape(), p, *opts.rng));
}

// Drops the whole residual branch per sample (axis 0).
Var drop_path(const Var& x, double p, const ForwardOptions& opts) {
  if (!opts.training || p <= 0.0) return x;
  Tensor m(x.shape());
  const std::size_t B = x.shape()[0], per = m.size() / B;
  for (std::size_t b = 0; b < B; ++b) {
    const double v = opts.rng->bernoulli(p) ? 0.0 : 1.0 / (1.0 - p);
    std::fill(m.ptr() + b * per, m.ptr() + (b + 1) * per, v);
  }
  return ops::mul_const(x, m);
}

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

}  // namespace

void ModelConfig::validate() const {
  require(channels >= 1, "data.channels", "must be at least 1");
  require(classes >= 2, "data.classes", "must be at least 2");
  require(rate > 0.0 && std::isfinite(rate), "data.rate", "must be positive");
  require(patch >= 1, "model.patch", "must be at least 1");
  require(length >= patch, "data.length", "must be at least the patch length");
  require(patches() >= 2, "data.length", "needs at least two patches for the spectral branch");
  require(dim >= 1, "model.dim", "must be at least 1");
  require(heads >= 1 && dim % heads == 0, "model.heads", "must divide model.dim");
  require(bands >= 1, "model.bands", "must be at least 1");
  require(k_top >= 1, "model.k_top", "must be at least 1");
  require(state_dim >= 1, "model.state_dim", "must be at least 1");
  require(ffn_hidden >= 1, "model.ffn_hidden", "must be at least 1");
  require(head_hidden >= 1, "model.head_hidden", "must be at least 1");
  require(!kernel_sizes.empty(), "model.kernel_sizes", "needs at least one size");
  for (auto k : kernel_sizes) require(k >= 1, "model.kernel_sizes", "sizes must be positive");
  require(fusion_scale >= 0.0 && std::isfinite(fusion_scale), "model.fusion_scale", "must be nonnegative");
  require(dropout >= 0.0 && dropout < 1.0, "model.dropout", "must be in [0, 1)");
  require(drop_path >= 0.0 && drop_path < 1.0, "model.drop_path", "must be in [0, 1)");
  require(drop_edge >= 0.0 && drop_edge < 1.0, "model.drop_edge", "must be in [0, 1)");
  if (forced_fusion) {
    double total = 0.0;
    for (double w : *forced_fusion) {
      require(w >= 0.0 && std::isfinite(w), "model.fusion", "forced weights must be nonnegative");
      total += w;
    }
    require(std::abs(total - 1.0) < 1e-9, "model.fusion", "forced weights must sum to 1");
  }
}

NakulBlock::NakulBlock(const ModelConfig& cfg, std::size_t index, Rng& rng)
    : spectral(cfg.dim,
               spectral::SpectralConfig{cfg.bands, cfg.rate / double(cfg.patch), 1.0 / double(cfg.patch)},
               rng),
      dynamic(cfg.dim, cfg.kernel_sizes, rng),
      attention(cfg.dim, cfg.channels, cfg.heads, cfg.k_top, rng),
      cfg_(cfg),
      index_(index) {
  const std::size_t D = cfg.dim, H = cfg.ffn_hidden;
  fusion_logits = Parameter("fusion_logits", Tensor({3}));
  w_proj = Parameter("w_proj", uniform_init({D, D}, D, rng));
  ln_mix_g = Parameter("ln_mix.gamma", Tensor({D}, 1.0));
  ln_mix_b = Parameter("ln_mix.beta", Tensor({D}));
  ln_fuse_g = Parameter("ln_fuse.gamma", Tensor({D}, 1.0));
  ln_fuse_b = Parameter("ln_fuse.beta", Tensor({D}));
  ln_ffn_g = Parameter("ln_ffn.gamma", Tensor({D}, 1.0));
  ln_ffn_b = Parameter("ln_ffn.beta", Tensor({D}));
  ffn_w1 = Parameter("ffn.w1", uniform_init({H, D}, D, rng));
  ffn_b1 = Parameter("ffn.b1", Tensor({H}));
  ffn_w2 = Parameter("ffn.w2", uniform_init({D, H}, H, rng));
  ffn_b2 = Parameter("ffn.b2", Tensor({D}));
}

std::array<double, 3> NakulBlock::fusion_weights() const {
  if (cfg_.forced_fusion) return *cfg_.forced_fusion;
  std::array<double, 3> w{};
  double mx = std::max({fusion_logits.value[0], fusion_logits.value[1], fusion_logits.value[2]});
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) total += (w[i] = std::exp(fusion_logits.value[i] - mx));
  for (auto& v : w) v /= total;
  return w;
}

Var NakulBlock::forward(Tape& tape, const Var& x, const graph::ElectrodeGraph& g, const ForwardOptions& opts,
                        BlockTrace* trace) {
  if (x.shape().size() != 4 || x.shape()[1] != cfg_.channels || x.shape()[3] != cfg_.dim) {
    throw ShapeError("block expects [B, " + std::to_string(cfg_.channels) + ", T_p, " +
                     std::to_string(cfg_.dim) + "], got " + to_string(x.shape()));
  }
  const std::size_t B = x.shape()[0], C = x.shape()[1], Tp = x.shape()[2], D = x.shape()[3];
  const double depth_p = cfg_.blocks > 1 ? cfg_.drop_path * double(index_) / double(cfg_.blocks - 1)
                                         : cfg_.drop_path;

  Var xn = ops::layer_norm(x, tape.param(ln_mix_g), tape.param(ln_mix_b));
  Var weights = cfg_.forced_fusion
                    ? tape.constant(Tensor({3}, std::vector<double>(cfg_.forced_fusion->begin(),
                                                                    cfg_.forced_fusion->end())))
                    : ops::softmax(tape.param(fusion_logits));
  if (trace) trace->fusion_weights = weights.value();
  auto active = [&](Branch b) { return !cfg_.forced_fusion || (*cfg_.forced_fusion)[int(b)] != 0.0; };

  std::vector<Var> ys(3);
  Var seq = ops::reshape(xn, {B * C, Tp, D});
  if (active(Branch::kSpectral)) {
    spectral::SpectralOptions so;
    if (trace) so.trace = &trace->spectral;
    ys[0] = ops::reshape(spectral.forward(tape, seq, so), {B, C, Tp, D});
  }
  if (active(Branch::kDynamic)) {
    dynamic::DynamicOptions dopt;
    if (trace) dopt.trace = &trace->dynamic;
    ys[1] = ops::reshape(dynamic.forward(tape, seq, dopt), {B, C, Tp, D});
  }
  if (active(Branch::kGraph)) {
    Var tokens = ops::reshape(ops::swap_axes12(xn), {B * Tp, C, D});
    graph::AttentionOptions ao;
    if (trace && opts.trace && opts.trace->keep_attention) ao.probe.probabilities = &trace->attention;
    Var y = attention.forward(tape, g, tokens, ao);
    ys[2] = ops::swap_axes12(ops::reshape(y, {B, Tp, C, D}));
  }
  if (trace && opts.trace && opts.trace->keep_branch_outputs) {
    if (ys[0].valid()) trace->y_spec = ys[0].value();
    if (ys[1].valid()) trace->y_dyn = ys[1].value();
    if (ys[2].valid()) trace->y_graph = ys[2].value();
  }

  Var fused;
  if (cfg_.forced_fusion) {
    std::vector<double> w;
    std::vector<Var> used;
    for (std::size_t i = 0; i < 3; ++i) {
      if (ys[i].valid()) {
        w.push_back((*cfg_.forced_fusion)[i]);
        used.push_back(ys[i]);
      }
    }
    const std::size_t n = w.size();
    fused = ops::weighted_sum(tape.constant(Tensor({n}, std::move(w))), used);
  } else {
    fused = ops::weighted_sum(weights, ys);
  }

  Var mix = ops::layer_norm(ops::linear(fused, tape.param(w_proj)), tape.param(ln_fuse_g), tape.param(ln_fuse_b));
  Var z = ops::add(x, drop_path(ops::scale(mix, cfg_.fusion_scale), depth_p, opts));

  Var h = ops::layer_norm(z, tape.param(ln_ffn_g), tape.param(ln_ffn_b));
  h = ops::gelu(bias_add(tape, ops::linear(h, tape.param(ffn_w1)), ffn_b1));
  h = dropout(h, cfg_.dropout, opts);
  h = bias_add(tape, ops::linear(h, tape.param(ffn_w2)), ffn_b2);
  return ops::add(z, drop_path(h, depth_p, opts));
}

std::vector<std::pair<std::string, Parameter*>> NakulBlock::named_parameters() {
  std::vector<std::pair<std::string, Parameter*>> out;
  for (auto* p : spectral.parameters()) out.emplace_back("spectral." + p->name, p);
  for (auto* p : dynamic.parameters()) out.emplace_back("dynamic." + p->name, p);
  for (auto* p : attention.parameters()) out.emplace_back("graph." + p->name, p);
  for (auto* p : {&fusion_logits, &w_proj, &ln_mix_g, &ln_mix_b, &ln_fuse_g, &ln_fuse_b, &ln_ffn_g,
                  &ln_ffn_b, &ffn_w1, &ffn_b1, &ffn_w2, &ffn_b2}) {
    out.emplace_back(p->name, p);
  }
  return out;
}

NakulModel::NakulModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng = Rng::stream(seed, "init");
  const std::size_t D = cfg_.dim, P = cfg_.patch;
  embed_w = Parameter("embed.w", uniform_init({D, P}, P, rng));
  embed_b = Parameter("embed.b", Tensor({D}));
  Tensor pe({cfg_.channels, cfg_.patches(), D});
  for (auto& v : pe.data()) v = rng.normal(0.0, 0.02);
  pos = Parameter("embed.pos", std::move(pe));
  blocks_.reserve(cfg_.blocks);
  for (std::size_t i = 0; i < cfg_.blocks; ++i) blocks_.emplace_back(cfg_, i, rng);
  head_w1 = Parameter("head.w1", uniform_init({cfg_.head_hidden, D}, D, rng));
  head_b1 = Parameter("head.b1", Tensor({cfg_.head_hidden}));
  head_w2 = Parameter("head.w2", uniform_init({cfg_.classes, cfg_.head_hidden}, cfg_.head_hidden, rng));
  head_b2 = Parameter("head.b2", Tensor({cfg_.classes}));
}

Var NakulModel::embed(Tape& tape, const Tensor& x) {
  if (x.rank() != 3 || x.dim(1) != cfg_.channels) {
    throw ShapeError("model expects input [B, " + std::to_string(cfg_.channels) + ", T], got " +
                     to_string(x.shape()));
  }
  const std::size_t B = x.dim(0), C = x.dim(1), T = x.dim(2), P = cfg_.patch;
  if (T < P) throw ShapeError("input length " + std::to_string(T) + " is shorter than one patch");
  const std::size_t Tp = (T + P - 1) / P;
  if (Tp != cfg_.patches()) {
    throw ShapeError("input length " + std::to_string(T) + " gives " + std::to_string(Tp) +
                     " patches, model has " + std::to_string(cfg_.patches()));
  }
  Tensor windows({B, C, Tp, P});
  for (std::size_t bc = 0; bc < B * C; ++bc) std::copy_n(x.ptr() + bc * T, T, windows.ptr() + bc * Tp * P);
  Var tokens = ops::linear(tape.constant(std::move(windows)), tape.param(embed_w));
  tokens = bias_add(tape, tokens, embed_b);
  return ops::add_trailing(tokens, tape.param(pos));
}

Var NakulModel::run_blocks(Tape& tape, const Var& tokens, const graph::ElectrodeGraph& g,
                           const ForwardOptions& opts) {
  if (g.channels() != cfg_.channels) {
    throw ShapeError("graph has " + std::to_string(g.channels()) + " channels, model expects " +
                     std::to_string(cfg_.channels));
  }
  if (opts.training && !opts.rng) throw std::invalid_argument("training forward needs an rng");
  graph::ElectrodeGraph dropped;
  const graph::ElectrodeGraph* gp = &g;
  if (opts.training && cfg_.drop_edge > 0.0) {
    dropped = graph::drop_edges(g, cfg_.drop_edge, *opts.rng);
    gp = &dropped;
  }
  if (opts.trace) opts.trace->blocks.assign(blocks_.size(), {});
  Var x = tokens;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    x = blocks_[i].forward(tape, x, *gp, opts, opts.trace ? &opts.trace->blocks[i] : nullptr);
  }
  if (opts.trace) opts.trace->tokens = x.value();
  return x;
}

Var NakulModel::head(Tape& tape, const Var& tokens, const ForwardOptions& opts) {
  const auto& s = tokens.shape();
  const std::size_t B = s[0], D = s[3];
  Var pooled = ops::mean_groups(tokens, B, D);
  Var h = ops::gelu(bias_add(tape, ops::linear(pooled, tape.param(head_w1)), head_b1));
  h = dropout(h, cfg_.dropout, opts);
  return bias_add(tape, ops::linear(h, tape.param(head_w2)), head_b2);
}

Var NakulModel::forward(Tape& tape, const Tensor& x, const graph::ElectrodeGraph& g, const ForwardOptions& opts) {
  Var tokens = embed(tape, x);
  if (opts.trace) opts.trace->embedding = tokens.value();
  return head(tape, run_blocks(tape, tokens, g, opts), opts);
}

Tensor NakulModel::logits(const Tensor& x, const graph::ElectrodeGraph& g, ModelTrace* trace) {
  Tape tape(false);
  ForwardOptions opts;
  opts.trace = trace;
  return forward(tape, x, g, opts).value();
}

std::vector<std::pair<std::string, Parameter*>> NakulModel::named_parameters() {
  std::vector<std::pair<std::string, Parameter*>> out;
  for (auto* p : {&embed_w, &embed_b, &pos}) out.emplace_back(p->name, p);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    for (auto& [name, p] : blocks_[i].named_parameters()) {
      out.emplace_back("blocks." + std::to_string(i) + "." + name, p);
    }
  }
  for (auto* p : {&head_w1, &head_b1, &head_w2, &head_b2}) out.emplace_back(p->name, p);
  return out;
}

std::vector<Parameter*> NakulModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& [name, p] : named_parameters()) out.push_back(p);
  return out;
}

std::size_t NakulModel::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->value.size();
  return n;
}

void NakulModel::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

}  // namespace nakul
