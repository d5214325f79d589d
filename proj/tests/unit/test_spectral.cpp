// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "nakul/fft.hpp"
#include "nakul/ops.hpp"
#include "nakul/spectral.hpp"
#include "oracles.hpp"

using namespace nakul;
using namespace nakul::spectral;
using nakul::test::random_tensor;

namespace {

Tensor tone(std::size_t N, std::size_t T, std::size_t D, double hz, double rate) {
  Tensor x({N, T, D});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t d = 0; d < D; ++d)
        x[(n * T + t) * D + d] = std::sin(2 * std::numbers::pi * hz * double(t) / rate + 0.3 * double(d));
  return x;
}

double max_abs(const Tensor& t) {
  double m = 0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

Tensor run(SpectralBranch& b, const Tensor& x, const SpectralOptions& opts = {}) {
  Tape tape(false);
  return b.forward(tape, tape.constant(x), opts).value();
}

}  // namespace

TEST(BandMask, PeakAndOneSigma) {
  const Tensor m = band_mask(10.0, 2.0, 250, 250.0);  // 1 Hz bins
  EXPECT_NEAR(m[10], 1.0 / (2.0 * std::sqrt(2 * std::numbers::pi)), 1e-15);
  EXPECT_NEAR(m[10], 0.199471, 1e-6);
  EXPECT_NEAR(m[12], m[10] * std::exp(-0.5), 1e-15);
  EXPECT_NEAR(m[12], 0.120985, 1e-6);
}

TEST(BandMask, SymmetricAboutCenter) {
  const Tensor m = band_mask(30.0, 3.5, 500, 250.0);  // 0.5 Hz bins, 30 Hz at bin 60
  for (std::size_t d = 1; d < 40; ++d) EXPECT_DOUBLE_EQ(m[60 + d], m[60 - d]);
}

TEST(BandMask, DefaultCentersPeakAtTheirBins) {
  Rng rng(1);
  SpectralBranch b(4, SpectralConfig{4, 250.0, 1.0}, rng);
  Tape tape(false);
  const Tensor m = b.mask(tape, 250).value();
  const std::size_t F = 126;
  for (std::size_t k = 0; k < 4; ++k) {
    const double* row = m.ptr() + k * F;
    const auto peak = std::max_element(row, row + F) - row;
    EXPECT_EQ(double(peak), kCanonicalCentersHz[k]);
  }
}

TEST(SpectralBranch, InitialBandsOnCanonicalScale) {
  Rng rng(2);
  SpectralBranch b(4, SpectralConfig{4, 5.0, 1.0 / 50}, rng);
  const auto c = b.centers_hz(), w = b.widths_hz(), cu = b.centers();
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(c[k], kCanonicalCentersHz[k], 1e-12);
    EXPECT_NEAR(w[k], kCanonicalSigmaHz, 1e-12);
    EXPECT_NEAR(cu[k], kCanonicalCentersHz[k] / 50, 1e-12);
    EXPECT_LT(cu[k], 2.5);  // below the patch-level Nyquist
  }
  EXPECT_NEAR(b.sigma_floor(), kSigmaFloorHz / 50, 1e-15);
}

TEST(SpectralBranch, ZeroInputGivesHalfGate) {
  Rng rng(3);
  SpectralBranch b(3, SpectralConfig{}, rng);
  SpectralTrace trace;
  const Tensor y = run(b, Tensor({2, 32, 3}), {false, nullptr, &trace});
  for (double a : trace.gate.data()) EXPECT_EQ(a, 0.5);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(SpectralBranch, ToneAtCenterRaisesThatBandsGate) {
  Rng rng(4);
  const std::size_t D = 4, T = 1000;
  SpectralBranch b(D, SpectralConfig{4, 250.0, 1.0}, rng);
  b.w_gate.value.fill(1e-3);
  SpectralTrace trace;
  run(b, tone(1, T, D, 10.0, 250.0), {false, nullptr, &trace});
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_GT(trace.gate[k], 0.0);
    EXPECT_LT(trace.gate[k], 1.0);
    if (k != 1) EXPECT_GT(trace.gate[1], trace.gate[k]);
  }
}

TEST(SpectralBranch, ScalarPassthroughWithConstantCoefficients) {
  // W_r = I, W_i = 0, one band, coefficient a*c at every bin.
  Rng rng(5);
  const std::size_t N = 2, T = 30, D = 3, F = T / 2 + 1;
  const Tensor x = random_tensor({N, T, D}, rng);
  Tensor wr({1, D, D});
  for (std::size_t d = 0; d < D; ++d) wr[d * D + d] = 1.0;
  const double a = 0.7, c = 1.9;
  Tape t(false);
  Var y = ops::irfft(ops::band_mix(t.constant(Tensor({N, 1, F}, a * c)), ops::rfft(t.constant(x)), t.constant(wr),
                                   t.constant(Tensor({1, D, D}))),
                     T);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.value()[i], a * c * x[i], 1e-12);
}

TEST(SpectralBranch, FarToneIsSuppressed) {
  Rng rng(6);
  const std::size_t D = 4, T = 1000;
  SpectralBranch b(D, SpectralConfig{4, 250.0, 1.0}, rng);
  const Tensor x = tone(1, T, D, 100.0, 250.0);  // 30 sigma above the top band
  EXPECT_LT(max_abs(run(b, x)), 1e-6 * max_abs(x));
}

TEST(SpectralBranch, LinearWhenGateIsFrozen) {
  Rng rng(7);
  SpectralBranch b(3, SpectralConfig{4, 5.0, 0.02}, rng);
  const Tensor x = random_tensor({2, 20, 3}, rng);
  const Tensor gate = random_tensor({2, 4}, rng);
  Tensor ax = x;
  ax *= -2.5;
  Tensor y = run(b, x, {false, &gate, nullptr});
  const Tensor ay = run(b, ax, {false, &gate, nullptr});
  y *= -2.5;
  EXPECT_LT(max_abs_diff(y, ay), 1e-12);
}

TEST(SpectralBranch, DetachedGateStillMatchesForward) {
  Rng rng(8);
  SpectralBranch b(3, SpectralConfig{4, 5.0, 0.02}, rng);
  const Tensor x = random_tensor({2, 20, 3}, rng);
  EXPECT_EQ(run(b, x), run(b, x, {true, nullptr, nullptr}));
}

TEST(SpectralBranch, GlobalReceptiveField) {
  Rng rng(9);
  const std::size_t T = 64;
  SpectralBranch b(2, SpectralConfig{4, 5.0, 0.02}, rng);
  const Tensor x = random_tensor({1, T, 2}, rng);
  Tensor xp = x;
  xp[0] += 1.0;
  const Tensor y = run(b, x), yp = run(b, xp);
  EXPECT_GT(std::abs(y[(T - 1) * 2] - yp[(T - 1) * 2]) + std::abs(y[(T - 1) * 2 + 1] - yp[(T - 1) * 2 + 1]), 1e-8);
}

TEST(SpectralBranch, GradientsMatchFiniteDifferences) {
  Rng rng(10);
  SpectralBranch b(3, SpectralConfig{4, 5.0, 0.02}, rng);
  const Tensor x = random_tensor({2, 20, 3}, rng);
  const Tensor w = random_tensor({2, 20, 3}, rng);
  auto loss = [&](Tape& t) { return ops::sum(ops::mul(b.forward(t, t.constant(x)), t.constant(w))); };
  EXPECT_LT(test::max_fd_error(b.parameters(), loss), 1e-3);
  auto plain_sum = [&](Tape& t) { return ops::sum(b.forward(t, t.constant(x))); };
  EXPECT_LT(test::max_fd_error(b.parameters(), plain_sum), 1e-3);
}

TEST(SpectralBranch, TimeGrowsNearLinearithmically) {
  retain_freed_memory();  // as the CLI does; page faults otherwise dominate at large T
  Rng rng(11);
  const std::size_t D = 16;
  SpectralBranch b(D, SpectralConfig{4, 250.0, 1.0}, rng);
  auto median_ms = [&](std::size_t T) {
    const Tensor x = random_tensor({1, T, D}, rng);
    std::vector<double> ms;
    run(b, x);
    for (int r = 0; r < 9; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      run(b, x);
      ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(ms.begin(), ms.begin() + 4, ms.end());
    return ms[4];
  };
  const double ratio = median_ms(4096) / median_ms(512);
  RecordProperty("ratio", std::to_string(ratio));
  EXPECT_LT(ratio, 10.0);
}
