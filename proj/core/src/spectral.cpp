// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/spectral.hpp"

#include <cmath>
#include <stdexcept>

#include "nakul/errors.hpp"
#include "nakul/fft.hpp"

namespace nakul::spectral {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw std::invalid_argument("inverse_softplus needs a positive value");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

std::vector<double> bin_frequencies(std::size_t T, double rate) {
  std::vector<double> f(rfft_bins(T));
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = double(i) * rate / double(T);
  return f;
}

Tensor band_mask(double mu, double sigma, std::size_t T, double rate) {
  if (T < 2) throw ShapeError("band_mask: T must be at least 2");
  if (!(sigma > 0.0)) throw std::invalid_argument("band_mask: sigma must be positive");
  const auto freqs = bin_frequencies(T, rate);
  Tensor m({freqs.size()});
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    const double z = (freqs[i] - mu) / sigma;
    m[i] = kInvSqrt2Pi / sigma * std::exp(-0.5 * z * z);
  }
  return m;
}

SpectralBranch::SpectralBranch(std::size_t width, const SpectralConfig& cfg, Rng& rng)
    : width_(width), cfg_(cfg) {
  if (cfg.n_bands == 0) throw ConfigError("model.bands", "need at least one band");
  if (!(cfg.sample_rate > 0.0)) throw ConfigError("data.rate", "sample rate must be positive");
  const std::size_t K = cfg.n_bands, D = width;
  Tensor mu({K}), sigma({K});
  for (std::size_t k = 0; k < K; ++k) {
    // Bands beyond the four canonical ones continue the doubling pattern.
    double hz = k < kCanonicalCentersHz.size() ? kCanonicalCentersHz[k]
                                               : kCanonicalCentersHz.back() * std::ldexp(1.0, int(k - 3));
    mu[k] = inverse_softplus(hz * cfg.frequency_scale);
    sigma[k] = inverse_softplus((kCanonicalSigmaHz - kSigmaFloorHz) * cfg.frequency_scale);
  }
  mu_raw = Parameter("mu_raw", std::move(mu));
  sigma_raw = Parameter("sigma_raw", std::move(sigma));

  Tensor wr({K, D, D}), wi({K, D, D}), wg({K, D});
  constexpr double noise = 0.01;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t a = 0; a < D; ++a) {
      for (std::size_t b = 0; b < D; ++b) {
        wr[(k * D + a) * D + b] = (a == b ? 0.5 : 0.0) + rng.normal(0.0, noise);
        wi[(k * D + a) * D + b] = rng.normal(0.0, noise);
      }
    }
  }
  const double bound = 1.0 / std::sqrt(double(D));
  for (auto& v : wg.data()) v = rng.uniform(-bound, bound);
  w_re = Parameter("w_re", std::move(wr));
  w_im = Parameter("w_im", std::move(wi));
  w_gate = Parameter("w_gate", std::move(wg));
}

Var SpectralBranch::mask(Tape& tape, std::size_t T) {
  Var mu = ops::softplus(tape.param(mu_raw));
  Var sigma = ops::positive(tape.param(sigma_raw), sigma_floor());
  const auto freqs = bin_frequencies(T, cfg_.sample_rate);
  return ops::gaussian_mask(mu, sigma, freqs);
}

Var SpectralBranch::band_importance(Tape& tape, const Var& magnitude, const Var& mask) {
  Var z = ops::band_contract(mask, magnitude);
  return ops::sigmoid(ops::band_dot(z, tape.param(w_gate)));
}

Var SpectralBranch::forward(Tape& tape, const Var& x, const SpectralOptions& opts) {
  if (x.shape().size() != 3 || x.shape()[2] != width_) {
    throw ShapeError("spectral branch expects [N, T, " + std::to_string(width_) + "], got " +
                     to_string(x.shape()));
  }
  const std::size_t N = x.shape()[0], T = x.shape()[1];
  Var spectrum = ops::rfft(x);
  Var m = mask(tape, T);
  Var gate;
  if (opts.forced_gate) {
    const Tensor& fg = *opts.forced_gate;
    Tensor g({N, cfg_.n_bands});
    if (fg.shape() == Shape{1, cfg_.n_bands}) {
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < cfg_.n_bands; ++k) g[n * cfg_.n_bands + k] = fg[k];
    } else if (fg.shape() == g.shape()) {
      g = fg;
    } else {
      throw ShapeError("forced gate has shape " + to_string(fg.shape()));
    }
    gate = tape.constant(std::move(g));
  } else {
    gate = band_importance(tape, ops::complex_abs(spectrum), m);
    if (opts.detach_gate) gate = tape.constant(gate.value());
  }
  if (opts.trace) {
    opts.trace->gate = gate.value();
    opts.trace->mask = m.value();
  }
  Var coef = ops::band_coefficients(gate, m);
  Var mixed = ops::band_mix(coef, spectrum, tape.param(w_re), tape.param(w_im));
  return ops::irfft(mixed, T);
}

std::vector<double> SpectralBranch::centers() const {
  std::vector<double> out;
  for (double v : mu_raw.value.data()) out.push_back(softplus(v));
  return out;
}

std::vector<double> SpectralBranch::widths() const {
  std::vector<double> out;
  for (double v : sigma_raw.value.data()) out.push_back(softplus(v) + sigma_floor());
  return out;
}

std::vector<double> SpectralBranch::centers_hz() const {
  auto c = centers();
  for (auto& v : c) v /= cfg_.frequency_scale;
  return c;
}

std::vector<double> SpectralBranch::widths_hz() const {
  auto w = widths();
  for (auto& v : w) v /= cfg_.frequency_scale;
  return w;
}

std::vector<Parameter*> SpectralBranch::parameters() {
  return {&mu_raw, &sigma_raw, &w_re, &w_im, &w_gate};
}

}  // namespace nakul::spectral
