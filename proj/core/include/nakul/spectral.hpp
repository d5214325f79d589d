// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// Learnable Gaussian frequency-band mixing along the time axis.

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "nakul/autograd.hpp"
#include "nakul/ops.hpp"
#include "nakul/rng.hpp"

namespace nakul::spectral {

/// Canonical band centers (theta, alpha, beta, gamma) in Hz and initial width.
inline constexpr std::array<double, 4> kCanonicalCentersHz{4.0, 10.0, 20.0, 40.0};
inline constexpr double kCanonicalSigmaHz = 2.0;
inline constexpr double kSigmaFloorHz = 0.1;

struct SpectralConfig {
  std::size_t n_bands = 4;
  /// Samples per second of the sequence this branch sees.
  double sample_rate = 250.0;
  /// Multiplies every canonical frequency (centers, width and floor) before
  /// it is used in this branch's own units. 1 for raw signals, 1/P after
  /// patching by P samples.
  double frequency_scale = 1.0;
};

/// Gaussian density at the bin frequencies f * rate / T, f = 0..T/2.
Tensor band_mask(double mu, double sigma, std::size_t T, double rate);

/// Frequency of each one-sided bin in Hz (branch units).
std::vector<double> bin_frequencies(std::size_t T, double rate);

/// What the branch computed, for inspection and tests.
struct SpectralTrace {
  Tensor gate;  // [N, K] band importance
  Tensor mask;  // [K, F]
};

struct SpectralOptions {
  /// Use the gate values as constants (no gradient through the importance path).
  bool detach_gate = false;
  /// Replace the computed gate with these values, shape [N, K] or [1, K].
  const Tensor* forced_gate = nullptr;
  SpectralTrace* trace = nullptr;
};

class SpectralBranch {
 public:
  SpectralBranch(std::size_t width, const SpectralConfig& cfg, Rng& rng);

  /// x [N, T, D] -> [N, T, D].
  Var forward(Tape& tape, const Var& x, const SpectralOptions& opts = {});

  /// Band importance sigmoid(w_gate_k . Z_k) from a magnitude spectrum
  /// [N, F, D]; Z_k = sum_f M_k(f) |X[f]|. Returns [N, K].
  Var band_importance(Tape& tape, const Var& magnitude, const Var& mask);
  Var mask(Tape& tape, std::size_t T);

  std::vector<double> centers() const;  // branch units
  std::vector<double> widths() const;   // branch units
  /// Centers and widths expressed back on the canonical (input-signal) scale.
  std::vector<double> centers_hz() const;
  std::vector<double> widths_hz() const;

  std::size_t bands() const noexcept { return cfg_.n_bands; }
  std::size_t width() const noexcept { return width_; }
  const SpectralConfig& config() const noexcept { return cfg_; }
  double sigma_floor() const noexcept { return kSigmaFloorHz * cfg_.frequency_scale; }

  std::vector<Parameter*> parameters();

  Parameter mu_raw;     // [K], mu = softplus(mu_raw)
  Parameter sigma_raw;  // [K], sigma = softplus(sigma_raw) + floor
  Parameter w_re;       // [K, D, D]
  Parameter w_im;       // [K, D, D]
  Parameter w_gate;     // [K, D]

 private:
  std::size_t width_;
  SpectralConfig cfg_;
};

/// Inverse of softplus, for initializing reparameterized values.
double inverse_softplus(double y);

}  // namespace nakul::spectral
