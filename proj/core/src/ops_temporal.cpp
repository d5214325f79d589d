// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include <algorithm>
#include <cmath>

#include "nakul/fft.hpp"
#include "nakul/ops.hpp"
#include "ops_internal.hpp"

namespace nakul::ops {

using namespace detail;

Var sequence_stats(const Var& x) {
  expect_rank(x, 3, "sequence_stats");
  const std::size_t N = x.shape()[0], T = x.shape()[1], D = x.shape()[2];
  const std::size_t F = rfft_bins(T);
  const double log_f = std::log(double(F));
  Tape& tape = tape_of(x);
  const Tensor& xv = x.value();

  Tensor out({N, 2});
  std::vector<double> means(N), vars(N), entropies(N), totals(N);
  Tensor re({N, F, D}), im({N, F, D}), norms({N, F});
  for (std::size_t n = 0; n < N; ++n) {
    const double* xn = xv.ptr() + n * T * D;
    double m = 0.0;
    for (std::size_t i = 0; i < T * D; ++i) m += xn[i];
    m /= double(T * D);
    double v = 0.0;
    for (std::size_t i = 0; i < T * D; ++i) v += (xn[i] - m) * (xn[i] - m);
    v /= double(T * D);
    means[n] = m;
    vars[n] = v;
    out[n * 2] = std::log1p(v);

    rfft_batch(xn, 1, T, D, re.ptr() + n * F * D, im.ptr() + n * F * D);
    double total = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      double s = 0.0;
      for (std::size_t d = 0; d < D; ++d) {
        const std::size_t i = (n * F + f) * D + d;
        s += re[i] * re[i] + im[i] * im[i];
      }
      norms[n * F + f] = std::sqrt(s);
      total += norms[n * F + f];
    }
    double h = 0.0;
    if (total > 0.0) {
      for (std::size_t f = 0; f < F; ++f) {
        const double p = norms[n * F + f] / total;
        if (p > 0.0) h -= p * std::log(p);
      }
    }
    totals[n] = total;
    entropies[n] = h;
    out[n * 2 + 1] = F > 1 ? h / log_f : 0.0;
  }

  return tape.record(
      std::move(out), {x},
      [&tape, x, N, T, D, F, log_f, means = std::move(means), vars = std::move(vars),
       entropies = std::move(entropies), totals = std::move(totals), re = std::move(re),
       im = std::move(im), norms = std::move(norms)](const Tensor& g) {
        Tensor& gx = tape.grad(x);
        const Tensor& xv = x.value();
        std::vector<double> gre(F * D), gim(F * D);
        for (std::size_t n = 0; n < N; ++n) {
          const double* xn = xv.ptr() + n * T * D;
          double* gn = gx.ptr() + n * T * D;
          const double gvar = g[n * 2] / (1.0 + vars[n]);
          for (std::size_t i = 0; i < T * D; ++i) {
            gn[i] += gvar * 2.0 * (xn[i] - means[n]) / double(T * D);
          }
          if (F <= 1 || totals[n] == 0.0) continue;
          const double gh = g[n * 2 + 1] / log_f;
          // dH/dn_f = -(log p_f + H) / S
          std::vector<double> gnorm(F, 0.0);
          for (std::size_t f = 0; f < F; ++f) {
            const double nf = norms[n * F + f];
            if (nf == 0.0) continue;
            gnorm[f] = -gh * (std::log(nf / totals[n]) + entropies[n]) / totals[n];
          }
          // Chain through |X_f| = norm over d of (re, im), then the DFT adjoint.
          for (std::size_t f = 0; f < F; ++f) {
            const double nf = norms[n * F + f];
            for (std::size_t d = 0; d < D; ++d) {
              const std::size_t i = (n * F + f) * D + d;
              gre[f * D + d] = nf == 0.0 ? 0.0 : gnorm[f] * re[i] / nf;
              gim[f * D + d] = nf == 0.0 ? 0.0 : gnorm[f] * im[i] / nf;
            }
          }
          rfft_adjoint_batch(gre.data(), gim.data(), 1, T, D, gn);
        }
      });
}

Var mix_kernels(const Var& weights, const std::vector<Var>& kernels) {
  expect_rank(weights, 2, "mix_kernels");
  const std::size_t N = weights.shape()[0], M = weights.shape()[1];
  if (kernels.size() != M) {
    throw ShapeError("mix_kernels: " + std::to_string(M) + " weights for " +
                     std::to_string(kernels.size()) + " kernels");
  }
  std::size_t J = 0;
  const std::size_t D = kernels.front().shape().back();
  for (const Var& k : kernels) {
    expect_rank(k, 2, "mix_kernels");
    if (k.shape()[1] != D) throw ShapeError("mix_kernels: kernels disagree on feature width");
    J = std::max(J, k.shape()[0]);
  }
  Tape& tape = tape_of(weights);
  Tensor out({N, J, D});
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t m = 0; m < M; ++m) {
      const double w = weights.value()[n * M + m];
      const Tensor& km = kernels[m].value();
      const std::size_t off = J - km.dim(0);
      for (std::size_t j = 0; j < km.dim(0); ++j)
        for (std::size_t d = 0; d < D; ++d) out[(n * J + off + j) * D + d] += w * km[j * D + d];
    }
  }
  std::vector<Var> inputs = kernels;
  inputs.push_back(weights);
  return tape.record(std::move(out), inputs, [&tape, weights, kernels, N, M, J, D](const Tensor& g) {
    std::vector<double*> gks(M, nullptr);
    for (std::size_t m = 0; m < M; ++m)
      if (kernels[m].requires_grad()) gks[m] = tape.grad(kernels[m]).ptr();
    double* gws = weights.requires_grad() ? tape.grad(weights).ptr() : nullptr;
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t m = 0; m < M; ++m) {
        const Tensor& km = kernels[m].value();
        const std::size_t off = J - km.dim(0);
        const double w = weights.value()[n * M + m];
        double gw = 0.0;
        for (std::size_t j = 0; j < km.dim(0); ++j)
          for (std::size_t d = 0; d < D; ++d) {
            const double gv = g[(n * J + off + j) * D + d];
            gw += gv * km[j * D + d];
            if (gks[m]) gks[m][j * D + d] += w * gv;
          }
        if (gws) gws[n * M + m] += gw;
      }
    }
  });
}

Var depthwise_causal_conv(const Var& x, const Var& kernel) {
  expect_rank(x, 3, "depthwise_causal_conv");
  expect_rank(kernel, 3, "depthwise_causal_conv");
  const std::size_t N = x.shape()[0], T = x.shape()[1], D = x.shape()[2];
  const std::size_t J = kernel.shape()[1];
  if (kernel.shape()[0] != N || kernel.shape()[2] != D) {
    throw ShapeError("depthwise_causal_conv: x " + to_string(x.shape()) + " vs kernel " +
                     to_string(kernel.shape()));
  }
  Tape& tape = tape_of(x);
  Tensor y({N, T, D});
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < J; ++j) {
        const std::size_t lag = J - 1 - j;
        if (lag > t) continue;
        const double* xs = xv.ptr() + (n * T + t - lag) * D;
        const double* ks = kv.ptr() + (n * J + j) * D;
        double* ys = y.ptr() + (n * T + t) * D;
        for (std::size_t d = 0; d < D; ++d) ys[d] += ks[d] * xs[d];
      }
  mac_counter() += N * T * J * D;
  return tape.record(std::move(y), {x, kernel}, [&tape, x, kernel, N, T, D, J](const Tensor& g) {
    const Tensor& xv = x.value();
    const Tensor& kv = kernel.value();
    double* gX = x.requires_grad() ? tape.grad(x).ptr() : nullptr;
    double* gK = kernel.requires_grad() ? tape.grad(kernel).ptr() : nullptr;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < J; ++j) {
          const std::size_t lag = J - 1 - j;
          if (lag > t) continue;
          const std::size_t xi = (n * T + t - lag) * D;
          const std::size_t ki = (n * J + j) * D;
          const double* gs = g.ptr() + (n * T + t) * D;
          if (gX) {
            double* gx = gX + xi;
            for (std::size_t d = 0; d < D; ++d) gx[d] += gs[d] * kv[ki + d];
          }
          if (gK) {
            double* gk = gK + ki;
            for (std::size_t d = 0; d < D; ++d) gk[d] += gs[d] * xv[xi + d];
          }
        }
  });
}

}  // namespace nakul::ops
