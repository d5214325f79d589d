// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nakul/ops.hpp"
#include "nakul/ssm.hpp"
#include "oracles.hpp"

using namespace nakul;
using namespace nakul::ssm;

namespace {

SsmParams scalar(double a, double b, double c = 1.0, double d = 0.0) {
  SsmParams p;
  p.A = Eigen::MatrixXd::Constant(1, 1, a);
  p.B = Eigen::VectorXd::Constant(1, b);
  p.C = Eigen::RowVectorXd::Constant(1, c);
  p.D_skip = d;
  return p;
}

DiscreteSsm scalar_discrete(double a_bar, double b_bar, double c) {
  DiscreteSsm d;
  d.A_bar = Eigen::MatrixXd::Constant(1, 1, a_bar);
  d.B_bar = Eigen::VectorXd::Constant(1, b_bar);
  d.C = Eigen::RowVectorXd::Constant(1, c);
  d.delta = 1.0;
  return d;
}

// Random stable A = Q diag(-lambda) Q^-1 style: a negative definite symmetric
// part keeps every eigenvalue in the left half plane.
SsmParams random_stable(std::size_t n, Rng& rng) {
  Eigen::MatrixXd M(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) M(i, j) = rng.normal();
  Eigen::MatrixXd S(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) S(i, j) = rng.normal();
  SsmParams p;
  p.A = -(M * M.transpose()) / double(n) - 0.1 * Eigen::MatrixXd::Identity(n, n) + (S - S.transpose()) * 0.5;
  p.B = Eigen::VectorXd::NullaryExpr(n, [&] { return rng.normal(); });
  p.C = Eigen::RowVectorXd::NullaryExpr(n, [&] { return rng.normal(); });
  p.D_skip = rng.normal();
  return p;
}

Tensor random_line(std::size_t L, Rng& rng) {
  Tensor x({L});
  for (auto& v : x.data()) v = rng.normal();
  return x;
}

}  // namespace

TEST(Discretize, ZeroAIsExactLimit) {
  const DiscreteSsm d = discretize(scalar(0.0, 1.0), 0.1);
  EXPECT_EQ(d.A_bar(0, 0), 1.0);
  EXPECT_EQ(d.B_bar(0), 0.1);
}

TEST(Discretize, ScalarClosedForm) {
  const DiscreteSsm d = discretize(scalar(-1.0, 1.0), 0.1);
  EXPECT_NEAR(d.A_bar(0, 0), std::exp(-0.1), 1e-15);
  EXPECT_NEAR(d.B_bar(0), 1.0 - std::exp(-0.1), 1e-15);
  EXPECT_NEAR(d.A_bar(0, 0), 0.904837, 1e-6);
  EXPECT_NEAR(d.B_bar(0), 0.095163, 1e-6);
}

TEST(Discretize, DiagonalIsElementwise) {
  for (double delta : {1e-6, 0.01, 0.1, 1.0, 5.0}) {
    SsmParams p = default_params(2);
    const DiscreteSsm d = discretize(p, delta);
    EXPECT_NEAR(d.A_bar(0, 0), std::exp(-delta), 1e-12);
    EXPECT_NEAR(d.A_bar(1, 1), std::exp(-2 * delta), 1e-12);
    EXPECT_EQ(d.A_bar(0, 1), 0.0);
    EXPECT_EQ(d.A_bar(1, 0), 0.0);
    EXPECT_NEAR(d.B_bar(0), -std::expm1(-delta), 1e-12);
    EXPECT_NEAR(d.B_bar(1), -std::expm1(-2 * delta) / 2, 1e-12);
  }
}

TEST(Discretize, RejectsNonPositiveStep) {
  EXPECT_THROW(discretize(default_params(2), 0.0), std::invalid_argument);
  EXPECT_THROW(discretize(default_params(2), -1.0), std::invalid_argument);
}

TEST(Discretize, StableSystemContracts) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const SsmParams p = random_stable(1 + trial % 4, rng);
    const DiscreteSsm d = discretize(p, rng.uniform(0.01, 2.0));
    const double radius = d.A_bar.eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_LE(radius, 1.0 + 1e-12);
  }
}

TEST(MatrixExp, MatchesSeriesOnSmallMatrix) {
  Eigen::MatrixXd m(2, 2);
  m << 0.1, 0.3, -0.2, 0.05;
  Eigen::MatrixXd series = Eigen::MatrixXd::Identity(2, 2), term = Eigen::MatrixXd::Identity(2, 2);
  for (int k = 1; k < 30; ++k) {
    term = term * m / double(k);
    series += term;
  }
  EXPECT_LT((matrix_exp(m) - series).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(MatrixExp, LargeNormUsesSquaring) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = -30.0;
  m(1, 1) = 3.0;
  const Eigen::MatrixXd e = matrix_exp(m);
  EXPECT_NEAR(e(0, 0) / std::exp(-30.0), 1.0, 1e-12);
  EXPECT_NEAR(e(1, 1) / std::exp(3.0), 1.0, 1e-12);
}

TEST(Kernel, GeometricPowers) {
  const Tensor k = materialize_kernel(scalar_discrete(0.5, 1.0, 1.0), 3);
  EXPECT_EQ(k[0], 1.0);
  EXPECT_EQ(k[1], 0.5);
  EXPECT_EQ(k[2], 0.25);
}

TEST(Kernel, ZeroTransitionAndZeroOutput) {
  const Tensor k0 = materialize_kernel(scalar_discrete(0.0, 2.0, 3.0), 4);
  EXPECT_EQ(k0[0], 6.0);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(k0[i], 0.0);
  const Tensor kc = materialize_kernel(scalar_discrete(0.7, 2.0, 0.0), 4);
  for (double v : kc.data()) EXPECT_EQ(v, 0.0);
}

TEST(Kernel, ScalarDecayIsGeometric) {
  const DiscreteSsm d = discretize(scalar(-0.3, 1.2, -0.8), 0.5);
  const Tensor k = materialize_kernel(d, 20);
  for (std::size_t i = 0; i + 1 < 20; ++i) {
    EXPECT_NEAR(std::abs(k[i + 1]), std::abs(d.A_bar(0, 0)) * std::abs(k[i]), 1e-15);
    EXPECT_LE(std::abs(k[i + 1]), std::abs(k[i]));
  }
}

TEST(Convolve, IdentityAndDelay) {
  const Tensor x({3}, {1.0, 2.0, 3.0});
  EXPECT_EQ(causal_convolve(Tensor({1}, {1.0}), x), x);
  const Tensor y = causal_convolve(Tensor({2}, {0.0, 1.0}), x);
  EXPECT_EQ(y, Tensor({3}, {0.0, 1.0, 2.0}));
}

TEST(Convolve, MatchesDirectSum) {
  Rng rng(2);
  for (std::size_t k : {1u, 3u, 11u, 40u}) {
    const Tensor K = random_line(k, rng), x = random_line(37, rng);
    const Tensor y = causal_convolve(K, x);
    const auto ref = test::direct_causal_conv(K.storage(), x.storage());
    for (std::size_t t = 0; t < 37; ++t) EXPECT_NEAR(y[t], ref[t], 1e-12);
  }
}

TEST(Scan, ImpulseGivesKernelAndZeroGivesZero) {
  Rng rng(3);
  const DiscreteSsm d = discretize(random_stable(3, rng), 0.2);
  Tensor impulse({16});
  impulse[0] = 1.0;
  DiscreteSsm no_skip = d;
  no_skip.D_skip = 0.0;
  const Tensor y = recurrent_scan(no_skip, impulse), k = materialize_kernel(no_skip, 16);
  for (std::size_t t = 0; t < 16; ++t) EXPECT_NEAR(y[t], k[t], 1e-14);
  const Tensor silent = recurrent_scan(d, Tensor({16}));
  for (double v : silent.data()) EXPECT_EQ(v, 0.0);
}

TEST(Scan, EqualsConvolutionOfKernel) {
  Rng rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + trial % 4, L = 32;
    const DiscreteSsm d = discretize(random_stable(n, rng), rng.uniform(0.05, 1.0));
    const Tensor x = random_line(L, rng);
    const Tensor y = recurrent_scan(d, x);
    const Tensor conv = causal_convolve(materialize_kernel(d, L), x);
    for (std::size_t t = 0; t < L; ++t) ASSERT_NEAR(y[t], conv[t] + d.D_skip * x[t], 1e-10);
  }
}

TEST(Selective, ZeroWeightsLeaveOnlySkip) {
  Rng rng(5);
  SelectiveParams sp = SelectiveParams::zeros(4, 3);
  SsmParams base = default_params(4);
  base.D_skip = 0.7;
  Tensor x({6, 3});
  for (auto& v : x.data()) v = rng.normal();
  const Tensor y = selective_scan(sp, base, x);
  for (std::size_t t = 0; t < 6; ++t) {
    const double mean = (x[t * 3] + x[t * 3 + 1] + x[t * 3 + 2]) / 3;
    EXPECT_NEAR(y[t], 0.7 * mean, 1e-15);
  }
}

TEST(Selective, ZeroWeightsInvariantToFeaturePermutation) {
  Rng rng(6);
  SelectiveParams sp = SelectiveParams::zeros(4, 5);
  SsmParams base = default_params(4);
  base.D_skip = -1.3;
  Tensor x({8, 5}), xp({8, 5});
  for (auto& v : x.data()) v = rng.normal();
  const std::size_t perm[5] = {3, 0, 4, 1, 2};
  for (std::size_t t = 0; t < 8; ++t)
    for (std::size_t d = 0; d < 5; ++d) xp[t * 5 + d] = x[t * 5 + perm[d]];
  const Tensor a = selective_scan(sp, base, x), b = selective_scan(sp, base, xp);
  for (std::size_t t = 0; t < 8; ++t) EXPECT_NEAR(a[t], b[t], 1e-15);
}

TEST(Selective, ConstantInputReducesToTimeInvariantScan) {
  // Every row of x equal: delta, B_t and C_t are constant, so the selective
  // recurrence is the LTI scan with those values and input mean(x_t).
  Rng rng(7);
  const std::size_t N = 3, D = 4, L = 12;
  SelectiveParams sp = SelectiveParams::random(N, D, rng);
  SsmParams base = default_params(N);
  base.D_skip = 0.4;
  std::vector<double> row(D);
  for (auto& v : row) v = rng.normal();
  Tensor x({L, D});
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t d = 0; d < D; ++d) x[t * D + d] = row[d];

  double wdx = 0;
  for (std::size_t d = 0; d < D; ++d) wdx += sp.w_delta.value[d] * row[d];
  const double delta = std::log1p(std::exp(wdx));
  SsmParams lti = base;
  for (std::size_t n = 0; n < N; ++n) {
    double b = 0, c = 0;
    for (std::size_t d = 0; d < D; ++d) {
      b += sp.w_b.value[n * D + d] * row[d];
      c += sp.w_c.value[n * D + d] * row[d];
    }
    lti.B(n) = b;
    lti.C(n) = c;
  }
  const double mean = std::accumulate(row.begin(), row.end(), 0.0) / double(D);
  const Tensor ref = recurrent_scan(discretize(lti, delta), Tensor({L}, mean));
  const Tensor y = selective_scan(sp, base, x);
  for (std::size_t t = 0; t < L; ++t) EXPECT_NEAR(y[t], ref[t], 1e-10);
}

TEST(Selective, StepIsAlwaysPositive) {
  Rng rng(8);
  SelectiveParams sp = SelectiveParams::random(2, 3, rng);
  for (auto& v : sp.w_delta.value.data()) v *= 100.0;
  Tensor x({10, 3});
  for (auto& v : x.data()) v = rng.normal();
  const Tensor y = selective_scan(sp, default_params(2), x);
  EXPECT_TRUE(y.all_finite());
}

TEST(Selective, GradientsMatchFiniteDifferences) {
  Rng rng(9);
  SelectiveParams sp = SelectiveParams::random(3, 4, rng);
  const SsmParams base = default_params(3);
  Tensor x({10, 4});
  for (auto& v : x.data()) v = rng.normal();
  auto loss = [&](Tape& t) { return ops::sum(selective_scan(sp, base, t.constant(x))); };
  EXPECT_LT(test::max_fd_error({&sp.w_delta, &sp.w_b, &sp.w_c}, loss), 1e-3);
  EXPECT_LT(test::max_fd_error_input(x, [&](Tape&, const Var& v) { return ops::sum(selective_scan(sp, base, v)); }), 1e-3);
}
