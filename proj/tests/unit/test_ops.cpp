// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "nakul/errors.hpp"
#include "nakul/ops.hpp"
#include "oracles.hpp"

using namespace nakul;
using nakul::test::max_fd_error;
using nakul::test::max_fd_error_input;
using nakul::test::random_parameter;
using nakul::test::random_tensor;

namespace {

Tensor eval(const std::function<Var(Tape&)>& f) {
  Tape tape(false);
  return f(tape).value();
}

// Weighted sum with fixed random weights so every output entry matters.
Var project(Tape& t, const Var& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return ops::sum(ops::mul(y, t.constant(random_tensor(y.shape(), rng))));
}

}  // namespace

TEST(Ops, SoftmaxOfZerosIsUniform) {
  const Tensor y = eval([](Tape& t) { return ops::softmax(t.constant(Tensor({3}, 0.0))); });
  for (double v : y.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Ops, SoftplusAtZeroIsLn2) {
  const Tensor y = eval([](Tape& t) { return ops::softplus(t.constant(Tensor({1}, 0.0))); });
  EXPECT_NEAR(y[0], std::log(2.0), 1e-15);
}

TEST(Ops, SoftplusStaysFiniteForLargeInputs) {
  const Tensor y = eval([](Tape& t) { return ops::softplus(t.constant(Tensor({2}, {800.0, -800.0}))); });
  EXPECT_DOUBLE_EQ(y[0], 800.0);
  EXPECT_GE(y[1], 0.0);
  EXPECT_LT(y[1], 1e-300);
}

TEST(Ops, LayerNormOfConstantIsZeroBeforeAffine) {
  const Tensor y = eval([](Tape& t) {
    return ops::layer_norm(t.constant(Tensor({2, 4}, 3.0)), t.constant(Tensor({4}, 1.0)),
                           t.constant(Tensor({4}, 0.0)));
  });
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Ops, GeluMatchesErfForm) {
  const Tensor y = eval([](Tape& t) { return ops::gelu(t.constant(Tensor({3}, {-1.0, 0.0, 2.0}))); });
  for (std::size_t i = 0; i < 3; ++i) {
    const double x = std::vector<double>{-1.0, 0.0, 2.0}[i];
    EXPECT_NEAR(y[i], 0.5 * x * (1 + std::erf(x / std::numbers::sqrt2)), 1e-15);
  }
}

TEST(Ops, MatmulMatchesDirectSum) {
  Rng rng(1);
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  const Tensor c = eval([&](Tape& t) { return ops::matmul(t.constant(a), t.constant(b)); });
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += a[i * 4 + k] * b[k * 2 + j];
      EXPECT_NEAR(c[i * 2 + j], s, 1e-14);
    }
}

TEST(Ops, ShapeMismatchThrows) {
  Tape t(false);
  EXPECT_THROW(ops::add(t.constant(Tensor({2})), t.constant(Tensor({3}))), ShapeError);
  EXPECT_THROW(ops::matmul(t.constant(Tensor({2, 3})), t.constant(Tensor({2, 3}))), ShapeError);
  EXPECT_THROW(ops::irfft(t.constant(Tensor({2, 1, 4, 1})), 10), ShapeError);
}

TEST(Ops, SmoothedCrossEntropyUniformLogits) {
  const std::vector<int> labels{2};
  const Tensor l = eval([&](Tape& t) { return ops::smoothed_cross_entropy(t.constant(Tensor({1, 4}, 0.0)), labels, 0.0); });
  EXPECT_NEAR(l[0], std::log(4.0), 1e-15);
}

TEST(Ops, SmoothedCrossEntropyMatchesDirectSum) {
  Rng rng(2);
  const Tensor logits = random_tensor({4, 3}, rng, 2.0);
  const std::vector<int> labels{0, 2, 1, 2};
  const double eps = 0.1;
  double expected = 0;
  for (std::size_t b = 0; b < 4; ++b) {
    double m = -INFINITY;
    for (std::size_t c = 0; c < 3; ++c) m = std::max(m, logits[b * 3 + c]);
    double z = 0;
    for (std::size_t c = 0; c < 3; ++c) z += std::exp(logits[b * 3 + c] - m);
    for (std::size_t c = 0; c < 3; ++c) {
      const double q = (int(c) == labels[b] ? 1 - eps : 0.0) + eps / 3;
      expected -= q * (logits[b * 3 + c] - m - std::log(z));
    }
  }
  expected /= 4;
  const Tensor l = eval([&](Tape& t) { return ops::smoothed_cross_entropy(t.constant(logits), labels, eps); });
  EXPECT_NEAR(l[0], expected, 1e-12);
}

TEST(Ops, SmoothedCrossEntropyPositiveWithSmoothing) {
  const std::vector<int> labels{0};
  const Tensor l = eval([&](Tape& t) {
    return ops::smoothed_cross_entropy(t.constant(Tensor({1, 3}, {40.0, -40.0, -40.0})), labels, 0.1);
  });
  EXPECT_GT(l[0], 0.0);
}

TEST(Ops, SmoothedCrossEntropyRejectsBadLabel) {
  const std::vector<int> labels{3};
  Tape t(false);
  EXPECT_THROW(ops::smoothed_cross_entropy(t.constant(Tensor({1, 3})), labels, 0.1), std::out_of_range);
}

TEST(Ops, DepthwiseConvMatchesDirectSum) {
  Rng rng(4);
  const std::size_t T = 9, J = 4, D = 2;
  const Tensor x = random_tensor({1, T, D}, rng), k = random_tensor({1, J, D}, rng);
  const Tensor y = eval([&](Tape& t) { return ops::depthwise_causal_conv(t.constant(x), t.constant(k)); });
  for (std::size_t d = 0; d < D; ++d) {
    // Causal layout stores the lag-0 tap last; the oracle wants it first.
    std::vector<double> K(J), xs(T);
    for (std::size_t j = 0; j < J; ++j) K[j] = k[(J - 1 - j) * D + d];
    for (std::size_t t = 0; t < T; ++t) xs[t] = x[t * D + d];
    const auto ref = test::direct_causal_conv(K, xs);
    for (std::size_t t = 0; t < T; ++t) EXPECT_NEAR(y[t * D + d], ref[t], 1e-12);
  }
}

TEST(Ops, TopkAttentionRowsHaveExactSupport) {
  Rng rng(5);
  const std::size_t N = 2, C = 6, D = 4, H = 2;
  for (std::size_t k : {1u, 3u, 6u, 9u}) {
    Tensor probs;
    Tape t(false);
    ops::topk_attention(t.constant(random_tensor({N, C, D}, rng)), t.constant(random_tensor({N, C, D}, rng)),
                        t.constant(random_tensor({N, C, D}, rng)), t.constant(random_tensor({N, C, H * C}, rng)),
                        t.constant(Tensor({1}, 1.0)), H, k, {&probs, nullptr});
    ASSERT_EQ(probs.shape(), (Shape{N, H, C, C}));
    for (std::size_t r = 0; r < N * H * C; ++r) {
      double s = 0;
      std::size_t nz = 0;
      for (std::size_t j = 0; j < C; ++j) {
        const double p = probs[r * C + j];
        EXPECT_GE(p, 0.0);
        s += p;
        nz += p > 0;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
      EXPECT_EQ(nz, std::min(k, C));
    }
  }
}

TEST(Ops, TopkTiesKeepLowerColumn) {
  // All scores equal: k = 2 keeps columns 0 and 1 of every row.
  const std::size_t C = 4;
  Tensor probs;
  Tape t(false);
  ops::topk_attention(t.constant(Tensor({1, C, 2}, 0.0)), t.constant(Tensor({1, C, 2}, 0.0)),
                      t.constant(Tensor({1, C, 2}, 1.0)), t.constant(Tensor({1, C, C}, 0.0)),
                      t.constant(Tensor({1}, 1.0)), 1, 2, {&probs, nullptr});
  for (std::size_t i = 0; i < C; ++i) {
    EXPECT_DOUBLE_EQ(probs[i * C + 0], 0.5);
    EXPECT_DOUBLE_EQ(probs[i * C + 1], 0.5);
    EXPECT_EQ(probs[i * C + 2], 0.0);
    EXPECT_EQ(probs[i * C + 3], 0.0);
  }
}

// Finite-difference checks, one per primitive.

TEST(OpsGradient, Elementwise) {
  Rng rng(10);
  Tensor x = random_tensor({3, 4}, rng);
  Tensor other = random_tensor({3, 4}, rng);
  Tensor row = random_tensor({4}, rng);
  auto check = [&](auto f) { EXPECT_LT(max_fd_error_input(x, [&](Tape& t, const Var& v) { return project(t, f(t, v)); }), 1e-3); };
  check([&](Tape& t, const Var& v) { return ops::add(v, t.constant(other)); });
  check([&](Tape& t, const Var& v) { return ops::sub(t.constant(other), v); });
  check([&](Tape& t, const Var& v) { return ops::mul(v, ops::mul(v, t.constant(other))); });
  check([&](Tape&, const Var& v) { return ops::scale(v, -1.7); });
  check([&](Tape&, const Var& v) { return ops::mul_const(v, other); });
  check([&](Tape& t, const Var& v) { return ops::add_trailing(v, t.constant(row)); });
  check([&](Tape&, const Var& v) { return ops::gelu(v); });
  check([&](Tape&, const Var& v) { return ops::sigmoid(v); });
  check([&](Tape&, const Var& v) { return ops::softplus(v); });
  check([&](Tape&, const Var& v) { return ops::positive(v, 0.1); });
  check([&](Tape&, const Var& v) { return ops::softmax(v); });
  check([&](Tape&, const Var& v) { return ops::reshape(v, {4, 3}); });
  check([&](Tape&, const Var& v) { return ops::mean_groups(v, 1, 2); });
  check([&](Tape&, const Var& v) { return ops::scale(ops::mean(v), 1.0); });
}

TEST(OpsGradient, BroadcastOperand) {
  Rng rng(11);
  Tensor row = random_tensor({4}, rng);
  const Tensor x = random_tensor({3, 4}, rng);
  EXPECT_LT(max_fd_error_input(row, [&](Tape& t, const Var& v) { return project(t, ops::add_trailing(t.constant(x), v)); }), 1e-3);
}

TEST(OpsGradient, LayerNorm) {
  Rng rng(12);
  Tensor x = random_tensor({3, 5}, rng);
  Parameter g = random_parameter("g", {5}, rng), b = random_parameter("b", {5}, rng);
  auto f = [&](Tape& t, const Var& v) { return project(t, ops::layer_norm(v, t.param(g), t.param(b))); };
  EXPECT_LT(max_fd_error_input(x, f), 1e-3);
  EXPECT_LT(max_fd_error({&g, &b}, [&](Tape& t) { return f(t, t.constant(x)); }), 1e-3);
}

TEST(OpsGradient, Contractions) {
  Rng rng(13);
  Parameter a = random_parameter("a", {3, 4}, rng), b = random_parameter("b", {4, 2}, rng);
  EXPECT_LT(max_fd_error({&a, &b}, [&](Tape& t) { return project(t, ops::matmul(t.param(a), t.param(b))); }), 1e-3);
  Parameter w = random_parameter("w", {5, 4}, rng);
  Tensor x = random_tensor({2, 3, 4}, rng);
  EXPECT_LT(max_fd_error({&w}, [&](Tape& t) { return project(t, ops::linear(t.constant(x), t.param(w))); }), 1e-3);
  EXPECT_LT(max_fd_error_input(x, [&](Tape& t, const Var& v) { return project(t, ops::linear(v, t.param(w))); }), 1e-3);
}

TEST(OpsGradient, WeightedSumAndSwap) {
  Rng rng(14);
  Parameter w = random_parameter("w", {3}, rng);
  const Tensor y0 = random_tensor({2, 2}, rng), y1 = random_tensor({2, 2}, rng), y2 = random_tensor({2, 2}, rng);
  EXPECT_LT(max_fd_error({&w}, [&](Tape& t) {
              return project(t, ops::weighted_sum(ops::softmax(t.param(w)), {t.constant(y0), t.constant(y1), t.constant(y2)}));
            }), 1e-3);
  Tensor x = random_tensor({2, 3, 4, 2}, rng);
  EXPECT_LT(max_fd_error_input(x, [&](Tape& t, const Var& v) { return project(t, ops::swap_axes12(v)); }), 1e-3);
}

TEST(OpsGradient, FourierPair) {
  Rng rng(15);
  for (std::size_t T : {7u, 20u, 96u}) {
    Tensor x = random_tensor({2, T, 3}, rng);
    EXPECT_LT(max_fd_error_input(x, [&](Tape& t, const Var& v) { return project(t, ops::rfft(v)); }), 1e-3) << T;
    Tensor s = random_tensor({2, 2, T / 2 + 1, 3}, rng);
    EXPECT_LT(max_fd_error_input(s, [&](Tape& t, const Var& v) { return project(t, ops::irfft(v, T)); }), 1e-3) << T;
    EXPECT_LT(max_fd_error_input(s, [&](Tape& t, const Var& v) { return project(t, ops::complex_abs(v)); }), 1e-3) << T;
  }
}

TEST(OpsGradient, BandPrimitives) {
  Rng rng(16);
  const std::size_t N = 2, K = 3, F = 6, D = 3;
  std::vector<double> freqs(F);
  for (std::size_t f = 0; f < F; ++f) freqs[f] = 0.5 * double(f);
  Parameter mu("mu", Tensor({K}, {0.5, 1.2, 2.0})), sigma("sigma", Tensor({K}, {0.4, 0.7, 0.5}));
  EXPECT_LT(max_fd_error({&mu, &sigma}, [&](Tape& t) { return project(t, ops::gaussian_mask(t.param(mu), t.param(sigma), freqs)); }), 1e-3);

  Parameter mask = random_parameter("mask", {K, F}, rng), mag = random_parameter("mag", {N, F, D}, rng);
  EXPECT_LT(max_fd_error({&mask, &mag}, [&](Tape& t) { return project(t, ops::band_contract(t.param(mask), t.param(mag))); }), 1e-3);

  Parameter z = random_parameter("z", {N, K, D}, rng), w = random_parameter("w", {K, D}, rng);
  EXPECT_LT(max_fd_error({&z, &w}, [&](Tape& t) { return project(t, ops::band_dot(t.param(z), t.param(w))); }), 1e-3);

  Parameter gate = random_parameter("gate", {N, K}, rng);
  EXPECT_LT(max_fd_error({&gate, &mask}, [&](Tape& t) { return project(t, ops::band_coefficients(t.param(gate), t.param(mask))); }), 1e-3);

  Parameter coef = random_parameter("coef", {N, K, F}, rng), spec = random_parameter("spec", {2, N, F, D}, rng);
  Parameter wr = random_parameter("wr", {K, D, D}, rng), wi = random_parameter("wi", {K, D, D}, rng);
  EXPECT_LT(max_fd_error({&coef, &spec, &wr, &wi}, [&](Tape& t) {
              return project(t, ops::band_mix(t.param(coef), t.param(spec), t.param(wr), t.param(wi)));
            }), 1e-3);
}

TEST(OpsGradient, TemporalPrimitives) {
  Rng rng(17);
  Tensor x = random_tensor({2, 12, 3}, rng);
  EXPECT_LT(max_fd_error_input(x, [&](Tape& t, const Var& v) { return project(t, ops::sequence_stats(v)); }), 1e-3);

  Parameter w = random_parameter("w", {2, 2}, rng);
  Parameter k3 = random_parameter("k3", {3, 3}, rng), k5 = random_parameter("k5", {5, 3}, rng);
  EXPECT_LT(max_fd_error({&w, &k3, &k5}, [&](Tape& t) {
              return project(t, ops::mix_kernels(ops::softmax(t.param(w)), {t.param(k3), t.param(k5)}));
            }), 1e-3);

  Parameter kern = random_parameter("kern", {2, 5, 3}, rng);
  EXPECT_LT(max_fd_error({&kern}, [&](Tape& t) { return project(t, ops::depthwise_causal_conv(t.constant(x), t.param(kern))); }), 1e-3);
  EXPECT_LT(max_fd_error_input(x, [&](Tape& t, const Var& v) { return project(t, ops::depthwise_causal_conv(v, t.param(kern))); }), 1e-3);
}

TEST(OpsGradient, GraphPrimitives) {
  Rng rng(18);
  const std::size_t N = 2, C = 5, D = 4, H = 2;
  Tensor adj = random_tensor({C, C}, rng);
  Tensor h = random_tensor({N, C, D}, rng);
  EXPECT_LT(max_fd_error_input(h, [&](Tape& t, const Var& v) { return project(t, ops::graph_aggregate(adj, v)); }), 1e-3);

  Parameter q = random_parameter("q", {N, C, D}, rng), k = random_parameter("k", {N, C, D}, rng);
  Parameter v = random_parameter("v", {N, C, D}, rng), b = random_parameter("b", {N, C, H * C}, rng);
  Parameter beta("beta", Tensor({1}, 0.8));
  for (std::size_t k_top : {2u, 5u}) {
    EXPECT_LT(max_fd_error({&q, &k, &v, &b, &beta}, [&](Tape& t) {
                return project(t, ops::topk_attention(t.param(q), t.param(k), t.param(v), t.param(b), t.param(beta), H, k_top));
              }), 1e-3) << k_top;
  }
}

TEST(OpsGradient, SmoothedCrossEntropy) {
  Rng rng(19);
  Parameter logits = random_parameter("logits", {4, 3}, rng);
  const std::vector<int> labels{0, 1, 2, 1};
  EXPECT_LT(max_fd_error({&logits}, [&](Tape& t) { return ops::smoothed_cross_entropy(t.param(logits), labels, 0.1); }), 1e-3);
}
