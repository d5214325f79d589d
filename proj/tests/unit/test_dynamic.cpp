// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nakul/dynamic.hpp"
#include "nakul/ops.hpp"
#include "oracles.hpp"

using namespace nakul;
using namespace nakul::dynamic;
using nakul::test::random_tensor;

namespace {

Tensor run(DynamicBranch& b, const Tensor& x, const DynamicOptions& opts = {}) {
  Tape tape(false);
  return b.forward(tape, tape.constant(x), opts).value();
}

Tensor weights_of(DynamicBranch& b, const Tensor& x) {
  Tape tape(false);
  return b.kernel_weights(tape, tape.constant(x)).value();
}

}  // namespace

TEST(Statistics, Variance) {
  EXPECT_EQ(temporal_variance(Tensor({5, 2}, 3.0)), 0.0);
  Tensor alt({6, 1});
  for (std::size_t t = 0; t < 6; ++t) alt[t] = t % 2 ? -1.0 : 1.0;
  EXPECT_DOUBLE_EQ(temporal_variance(alt), 1.0);
  Rng rng(1);
  Tensor x = random_tensor({10, 3}, rng);
  const double v = temporal_variance(x);
  x *= 3.0;
  EXPECT_NEAR(temporal_variance(x), 9.0 * v, 1e-12);
}

TEST(Statistics, EntropyOfImpulseIsLogBins) {
  Tensor x({16, 3});
  for (std::size_t d = 0; d < 3; ++d) x[d] = 1.0;
  EXPECT_NEAR(spectral_entropy(x), std::log(9.0), 1e-12);
}

TEST(Statistics, EntropyOfToneIsNearZero) {
  const std::size_t T = 1024;
  Tensor x({T, 2});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < 2; ++d) x[t * 2 + d] = std::cos(2 * std::numbers::pi * 37 * double(t) / double(T) + d);
  EXPECT_LT(spectral_entropy(x), 1e-9);
}

TEST(Statistics, SilentInputHasZeroEntropy) { EXPECT_EQ(spectral_entropy(Tensor({8, 2})), 0.0); }

TEST(Statistics, NoiseIsMoreEntropicThanTone) {
  const std::size_t T = 256;
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Tensor noise = random_tensor({T, 2}, rng), tone({T, 2});
    const double f = 5 + double(rng.integer(0, 100)), phase = rng.uniform(0, 6.28);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t d = 0; d < 2; ++d) tone[t * 2 + d] = std::sin(2 * std::numbers::pi * f * double(t) / double(T) + phase);
    wins += spectral_entropy(noise) > spectral_entropy(tone);
  }
  EXPECT_EQ(wins, 100);
}

TEST(MetaNetwork, ZeroWeightsGiveUniform) {
  Rng rng(2);
  MetaNetwork m(4, rng);
  m.w1.value.fill(0.0);
  m.w2.value.fill(0.0);
  const Tensor a = predict_weights(m, 2.0, 1.0, 20);
  for (double v : a.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(MetaNetwork, OutputIsOnSimplex) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    MetaNetwork m(4, rng);
    for (auto& v : m.w2.value.data()) v *= 20.0;
    const Tensor a = predict_weights(m, rng.uniform(0, 50), rng.uniform(0, 5), 1 + rng.integer(1, 600));
    double s = 0;
    for (double v : a.data()) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(MetaNetwork, ShiftingLogitsLeavesWeightsUnchanged) {
  // Adding c to column j of W2 adds c * hidden_j to every logit.
  Rng rng(4);
  MetaNetwork m(4, rng);
  const Tensor before = predict_weights(m, 1.5, 2.0, 21);
  const auto s = normalize_stats(1.5, 2.0, 21);
  std::size_t j = 0;
  for (; j < MetaNetwork::kHidden; ++j) {
    const double z = m.w1.value[j * 2] * s[0] + m.w1.value[j * 2 + 1] * s[1];
    if (std::abs(z) > 0.05) break;
  }
  ASSERT_LT(j, MetaNetwork::kHidden);
  for (std::size_t i = 0; i < 4; ++i) m.w2.value[i * MetaNetwork::kHidden + j] += 3.0;
  const Tensor after = predict_weights(m, 1.5, 2.0, 21);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(after[i], before[i], 1e-12);
}

TEST(MetaNetwork, NormalizedStatistics) {
  const auto s = normalize_stats(std::expm1(2.0), std::log(17.0), 17);
  EXPECT_NEAR(s[0], 2.0, 1e-15);
  EXPECT_NEAR(s[1], 1.0, 1e-15);
}

TEST(DynamicBranch, BatchWeightsMatchPredictWeights) {
  Rng rng(5);
  DynamicBranch b(3, kDefaultKernelSizes, rng);
  const Tensor x = random_tensor({2, 20, 3}, rng, 1.7);
  const Tensor w = weights_of(b, x);
  for (std::size_t n = 0; n < 2; ++n) {
    Tensor xn({20, 3}, std::vector<double>(x.ptr() + n * 60, x.ptr() + (n + 1) * 60));
    const Tensor ref = predict_weights(b.meta, temporal_variance(xn), spectral_entropy(xn), 11);
    for (std::size_t m = 0; m < 4; ++m) EXPECT_NEAR(w[n * 4 + m], ref[m], 1e-12);
  }
}

TEST(DynamicBranch, DefaultKernelInitFollowsScalarSsm) {
  Rng rng(6);
  DynamicBranch b(2, kDefaultKernelSizes, rng);
  ASSERT_EQ(b.bank.sizes, (std::vector<std::size_t>{3, 5, 7, 11}));
  for (std::size_t m = 0; m < 4; ++m) {
    const std::size_t K = b.bank.sizes[m];
    for (std::size_t j = 0; j < K; ++j)
      EXPECT_NEAR(b.bank.kernels[m].value[j * 2], std::pow(0.7, double(K - 1 - j)), 0.06);
  }
}

TEST(DynamicBranch, IdentityKernelsAndOpenGatePassInputThrough) {
  Rng rng(7);
  const std::size_t D = 3;
  DynamicBranch b(D, kDefaultKernelSizes, rng);
  for (auto& k : b.bank.kernels) {
    k.value.fill(0.0);
    const std::size_t K = k.value.dim(0);
    for (std::size_t d = 0; d < D; ++d) k.value[(K - 1) * D + d] = 1.0;
  }
  b.bank.w_gate.value.fill(0.0);
  for (std::size_t d = 0; d < D; ++d) b.bank.w_gate.value[d * D + d] = 50.0;
  Tensor x({2, 16, D});
  for (auto& v : x.data()) v = rng.uniform(0.5, 1.5);
  const Tensor y = run(b, x);
  EXPECT_LT(max_abs_diff(y, x), 1e-3);
}

TEST(DynamicBranch, ZeroInputGivesZeroOutput) {
  Rng rng(8);
  DynamicBranch b(3, kDefaultKernelSizes, rng);
  const Tensor y = run(b, Tensor({2, 10, 3}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(DynamicBranch, OneHotWeightsSelectSingleKernel) {
  Rng rng(9);
  DynamicBranch b(3, kDefaultKernelSizes, rng);
  const Tensor x = random_tensor({1, 14, 3}, rng);
  for (std::size_t m = 0; m < 4; ++m) {
    Tensor onehot({1, 4});
    onehot[m] = 1.0;
    const Tensor y = run(b, x, {&onehot, nullptr});
    // Single kernel by hand: causal conv then sigmoid(x W^T) gate.
    const auto& k = b.bank.kernels[m].value;
    const std::size_t K = k.dim(0);
    for (std::size_t t = 0; t < 14; ++t)
      for (std::size_t d = 0; d < 3; ++d) {
        double conv = 0;
        for (std::size_t j = 0; j < K; ++j) {
          const std::ptrdiff_t src = std::ptrdiff_t(t) - std::ptrdiff_t(K - 1) + std::ptrdiff_t(j);
          if (src >= 0) conv += k[j * 3 + d] * x[std::size_t(src) * 3 + d];
        }
        double z = 0;
        for (std::size_t e = 0; e < 3; ++e) z += x[t * 3 + e] * b.bank.w_gate.value[d * 3 + e];
        EXPECT_NEAR(y[t * 3 + d], conv / (1 + std::exp(-z)), 1e-12);
      }
  }
}

TEST(DynamicBranch, WeightsAreProbabilities) {
  Rng rng(10);
  DynamicBranch b(4, kDefaultKernelSizes, rng);
  DynamicTrace trace;
  run(b, random_tensor({5, 20, 4}, rng, 3.0), {nullptr, &trace});
  for (std::size_t n = 0; n < 5; ++n) {
    double s = 0;
    for (std::size_t m = 0; m < 4; ++m) {
      EXPECT_GE(trace.kernel_weights[n * 4 + m], 0.0);
      s += trace.kernel_weights[n * 4 + m];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(DynamicBranch, TimeReversalKeepsWeights) {
  Rng rng(11);
  DynamicBranch b(3, kDefaultKernelSizes, rng);
  const Tensor x = random_tensor({1, 25, 3}, rng);
  Tensor r({1, 25, 3});
  for (std::size_t t = 0; t < 25; ++t)
    for (std::size_t d = 0; d < 3; ++d) r[t * 3 + d] = x[(24 - t) * 3 + d];
  const Tensor a = weights_of(b, x), ar = weights_of(b, r);
  for (std::size_t m = 0; m < 4; ++m) EXPECT_NEAR(a[m], ar[m], 1e-12);
  EXPECT_EQ(std::max_element(a.ptr(), a.ptr() + 4) - a.ptr(), std::max_element(ar.ptr(), ar.ptr() + 4) - ar.ptr());
}

TEST(DynamicBranch, EachKernelIsCausal) {
  Rng rng(12);
  DynamicBranch b(3, kDefaultKernelSizes, rng);
  const Tensor x = random_tensor({1, 20, 3}, rng);
  for (std::size_t m = 0; m < 4; ++m) {
    Tensor onehot({1, 4});
    onehot[m] = 1.0;
    Tensor xp = x;
    for (std::size_t d = 0; d < 3; ++d) xp[12 * 3 + d] += 5.0;
    const Tensor y = run(b, x, {&onehot, nullptr}), yp = run(b, xp, {&onehot, nullptr});
    for (std::size_t i = 0; i < 12 * 3; ++i) EXPECT_EQ(y[i], yp[i]);
  }
}

TEST(DynamicBranch, DepthwiseConvCommutesWithFeaturePermutation) {
  Rng rng(13);
  const std::size_t T = 12, J = 5, D = 4;
  const std::size_t perm[D] = {2, 0, 3, 1};
  const Tensor x = random_tensor({1, T, D}, rng), k = random_tensor({1, J, D}, rng);
  Tensor xp({1, T, D}), kp({1, J, D});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d) xp[t * D + d] = x[t * D + perm[d]];
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t d = 0; d < D; ++d) kp[j * D + d] = k[j * D + perm[d]];
  Tape tape(false);
  const Tensor y = ops::depthwise_causal_conv(tape.constant(x), tape.constant(k)).value();
  const Tensor yp = ops::depthwise_causal_conv(tape.constant(xp), tape.constant(kp)).value();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d) EXPECT_EQ(yp[t * D + d], y[t * D + perm[d]]);
}

TEST(DynamicBranch, GradientsMatchFiniteDifferences) {
  Rng rng(14);
  DynamicBranch b(3, kDefaultKernelSizes, rng);
  const Tensor x = random_tensor({2, 16, 3}, rng);
  const Tensor w = random_tensor({2, 16, 3}, rng);
  auto loss = [&](Tape& t) { return ops::sum(ops::mul(b.forward(t, t.constant(x)), t.constant(w))); };
  EXPECT_LT(test::max_fd_error(b.parameters(), loss), 1e-3);
}
