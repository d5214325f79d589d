// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/dynamic.hpp"

#include <cmath>

#include "nakul/errors.hpp"
#include "nakul/fft.hpp"
#include "nakul/ops.hpp"

namespace nakul::dynamic {

namespace {

void expect_matrix(const Tensor& x, const char* what) {
  if (x.rank() != 2) throw ShapeError(std::string(what) + " expects [T, D], got " + to_string(x.shape()));
}

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(double(fan_in));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

double temporal_variance(const Tensor& x) {
  expect_matrix(x, "temporal_variance");
  double m = 0.0;
  for (double v : x.data()) m += v;
  m /= double(x.size());
  double s = 0.0;
  for (double v : x.data()) s += (v - m) * (v - m);
  return s / double(x.size());
}

double spectral_entropy(const Tensor& x) {
  expect_matrix(x, "spectral_entropy");
  const std::size_t T = x.dim(0), D = x.dim(1), F = rfft_bins(T);
  std::vector<double> re(F * D), im(F * D);
  std::vector<cplx> work;
  for (std::size_t d = 0; d < D; ++d) rfft_line(x.ptr() + d, T, D, re.data() + d, im.data() + d, D, work);
  std::vector<double> norms(F, 0.0);
  double total = 0.0;
  for (std::size_t f = 0; f < F; ++f) {
    double s = 0.0;
    for (std::size_t d = 0; d < D; ++d) s += re[f * D + d] * re[f * D + d] + im[f * D + d] * im[f * D + d];
    norms[f] = std::sqrt(s);
    total += norms[f];
  }
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (double n : norms) {
    const double p = n / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

MetaNetwork::MetaNetwork(std::size_t n_kernels, Rng& rng)
    : w1("w1", uniform_init({kHidden, 2}, 2, rng)),
      w2("w2", uniform_init({n_kernels, kHidden}, kHidden, rng)) {}

std::array<double, 2> normalize_stats(double variance, double entropy, std::size_t bins) {
  return {std::log1p(variance), bins > 1 ? entropy / std::log(double(bins)) : 0.0};
}

Tensor predict_weights(const MetaNetwork& m, double variance, double entropy, std::size_t bins) {
  const auto s = normalize_stats(variance, entropy, bins);
  const std::size_t M = m.kernels();
  std::array<double, MetaNetwork::kHidden> hidden{};
  for (std::size_t j = 0; j < MetaNetwork::kHidden; ++j) {
    const double z = m.w1.value[j * 2] * s[0] + m.w1.value[j * 2 + 1] * s[1];
    hidden[j] = 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0)));
  }
  Tensor out({M});
  double mx = -INFINITY;
  for (std::size_t i = 0; i < M; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < MetaNetwork::kHidden; ++j) z += m.w2.value[i * MetaNetwork::kHidden + j] * hidden[j];
    out[i] = z;
    mx = std::max(mx, z);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < M; ++i) total += (out[i] = std::exp(out[i] - mx));
  for (std::size_t i = 0; i < M; ++i) out[i] /= total;
  return out;
}

KernelBank::KernelBank(std::size_t width, std::vector<std::size_t> kernel_sizes, Rng& rng)
    : sizes(std::move(kernel_sizes)) {
  if (sizes.empty()) throw ConfigError("model.kernel_sizes", "need at least one kernel");
  // Taps follow the impulse response of a stable scalar SSM (A_bar = 0.7,
  // B_bar = C = 1), stored oldest-first so the last tap is lag 0.
  constexpr double a_bar = 0.7, noise = 0.01;
  for (std::size_t m = 0; m < sizes.size(); ++m) {
    const std::size_t K = sizes[m];
    if (K == 0) throw ConfigError("model.kernel_sizes", "kernel sizes must be positive");
    Tensor k({K, width});
    for (std::size_t j = 0; j < K; ++j) {
      const double tap = std::pow(a_bar, double(K - 1 - j));
      for (std::size_t d = 0; d < width; ++d) k[j * width + d] = tap + rng.normal(0.0, noise);
    }
    kernels.emplace_back("kernel" + std::to_string(K), std::move(k));
  }
  w_gate = Parameter("w_gate", uniform_init({width, width}, width, rng));
}

DynamicBranch::DynamicBranch(std::size_t width, std::vector<std::size_t> kernel_sizes, Rng& rng)
    : bank(width, std::move(kernel_sizes), rng), meta(bank.sizes.size(), rng), width_(width) {}

Var DynamicBranch::kernel_weights(Tape& tape, const Var& x) {
  Var s = ops::sequence_stats(x);
  Var h = ops::gelu(ops::linear(s, tape.param(meta.w1)));
  return ops::softmax(ops::linear(h, tape.param(meta.w2)));
}

Var DynamicBranch::forward(Tape& tape, const Var& x, const DynamicOptions& opts) {
  if (x.shape().size() != 3 || x.shape()[2] != width_) {
    throw ShapeError("dynamic branch expects [N, T, " + std::to_string(width_) + "], got " +
                     to_string(x.shape()));
  }
  const std::size_t N = x.shape()[0], M = bank.kernels.size();
  Var weights;
  if (opts.forced_weights) {
    const Tensor& fw = *opts.forced_weights;
    Tensor w({N, M});
    if (fw.shape() == Shape{1, M}) {
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t m = 0; m < M; ++m) w[n * M + m] = fw[m];
    } else if (fw.shape() == w.shape()) {
      w = fw;
    } else {
      throw ShapeError("forced kernel weights have shape " + to_string(fw.shape()));
    }
    weights = tape.constant(std::move(w));
  } else {
    weights = kernel_weights(tape, x);
  }
  if (opts.trace) {
    opts.trace->kernel_weights = weights.value();
    opts.trace->stats = ops::sequence_stats(tape.constant(x.value())).value();
  }
  std::vector<Var> ks;
  for (auto& k : bank.kernels) ks.push_back(tape.param(k));
  Var mixed = ops::depthwise_causal_conv(x, ops::mix_kernels(weights, ks));
  Var gate = ops::sigmoid(ops::linear(x, tape.param(bank.w_gate)));
  return ops::mul(mixed, gate);
}

std::vector<Parameter*> DynamicBranch::parameters() {
  std::vector<Parameter*> out;
  for (auto& k : bank.kernels) out.push_back(&k);
  out.push_back(&bank.w_gate);
  out.push_back(&meta.w1);
  out.push_back(&meta.w2);
  return out;
}

}  // namespace nakul::dynamic
