// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include <cmath>
#include <numbers>

#include "nakul/fft.hpp"
#include "nakul/ops.hpp"
#include "ops_internal.hpp"

namespace nakul::ops {

using namespace detail;

Var rfft(const Var& x) {
  expect_rank(x, 3, "rfft");
  const std::size_t N = x.shape()[0], T = x.shape()[1], D = x.shape()[2];
  const std::size_t F = rfft_bins(T);
  Tape& tape = tape_of(x);
  Tensor y({2, N, F, D});
  const std::size_t plane = N * F * D;
  rfft_batch(x.value().ptr(), N, T, D, y.ptr(), y.ptr() + plane);
  return tape.record(std::move(y), {x}, [&tape, x, N, T, D, plane](const Tensor& g) {
    rfft_adjoint_batch(g.ptr(), g.ptr() + plane, N, T, D, tape.grad(x).ptr());
  });
}

Var irfft(const Var& spectrum, std::size_t T) {
  expect_rank(spectrum, 4, "irfft");
  const Shape& s = spectrum.shape();
  if (s[0] != 2) throw ShapeError("irfft: expected packed [2, N, F, D], got " + to_string(s));
  const std::size_t N = s[1], F = s[2], D = s[3];
  if (F != rfft_bins(T)) {
    throw ShapeError("irfft: " + std::to_string(F) + " bins do not match T=" + std::to_string(T));
  }
  Tape& tape = tape_of(spectrum);
  const std::size_t plane = N * F * D;
  Tensor y({N, T, D});
  irfft_batch(spectrum.value().ptr(), spectrum.value().ptr() + plane, N, T, D, y.ptr());
  return tape.record(std::move(y), {spectrum}, [&tape, spectrum, N, T, D, F, plane](const Tensor& g) {
    // Adjoint of the Hermitian inverse: (c_f / T) rfft(g), c_f = 1 at DC and Nyquist, else 2.
    std::vector<double> re(plane), im(plane);
    rfft_batch(g.ptr(), N, T, D, re.data(), im.data());
    Tensor& gs = tape.grad(spectrum);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t f = 0; f < F; ++f) {
        const bool edge = f == 0 || (T % 2 == 0 && f == T / 2);
        const double c = (edge ? 1.0 : 2.0) / double(T);
        for (std::size_t d = 0; d < D; ++d) {
          const std::size_t i = (n * F + f) * D + d;
          gs[i] += c * re[i];
          gs[plane + i] += c * im[i];
        }
      }
    }
  });
}

Var complex_abs(const Var& spectrum) {
  expect_rank(spectrum, 4, "complex_abs");
  const Shape& s = spectrum.shape();
  if (s[0] != 2) throw ShapeError("complex_abs: expected packed spectrum, got " + to_string(s));
  Tape& tape = tape_of(spectrum);
  const std::size_t plane = s[1] * s[2] * s[3];
  Tensor y({s[1], s[2], s[3]});
  const Tensor& X = spectrum.value();
  for (std::size_t i = 0; i < plane; ++i) y[i] = std::hypot(X[i], X[plane + i]);
  Tensor saved = y;
  return tape.record(std::move(y), {spectrum}, [&tape, spectrum, plane, saved = std::move(saved)](const Tensor& g) {
    Tensor& gs = tape.grad(spectrum);
    const Tensor& X = spectrum.value();
    for (std::size_t i = 0; i < plane; ++i) {
      if (saved[i] == 0.0) continue;
      gs[i] += g[i] * X[i] / saved[i];
      gs[plane + i] += g[i] * X[plane + i] / saved[i];
    }
  });
}

Var gaussian_mask(const Var& mu, const Var& sigma, std::span<const double> bin_freqs) {
  expect_rank(mu, 1, "gaussian_mask");
  expect_same(mu, sigma, "gaussian_mask");
  const std::size_t K = mu.shape()[0], F = bin_freqs.size();
  if (F == 0) throw ShapeError("gaussian_mask: no frequency bins");
  Tape& tape = tape_of(mu);
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  Tensor m({K, F});
  for (std::size_t k = 0; k < K; ++k) {
    const double mk = mu.value()[k], sk = sigma.value()[k];
    for (std::size_t f = 0; f < F; ++f) {
      const double z = (bin_freqs[f] - mk) / sk;
      m[k * F + f] = inv_sqrt_2pi / sk * std::exp(-0.5 * z * z);
    }
  }
  std::vector<double> freqs(bin_freqs.begin(), bin_freqs.end());
  Tensor saved = m;
  return tape.record(std::move(m), {mu, sigma},
                     [&tape, mu, sigma, freqs = std::move(freqs), saved = std::move(saved), K, F](const Tensor& g) {
                       for (std::size_t k = 0; k < K; ++k) {
                         const double mk = mu.value()[k], sk = sigma.value()[k];
                         double gmu = 0.0, gsig = 0.0;
                         for (std::size_t f = 0; f < F; ++f) {
                           const double diff = freqs[f] - mk;
                           const double gm = g[k * F + f] * saved[k * F + f];
                           gmu += gm * diff / (sk * sk);
                           gsig += gm * (diff * diff / (sk * sk * sk) - 1.0 / sk);
                         }
                         if (mu.requires_grad()) tape.grad(mu)[k] += gmu;
                         if (sigma.requires_grad()) tape.grad(sigma)[k] += gsig;
                       }
                     });
}

Var band_contract(const Var& mask, const Var& magnitude) {
  expect_rank(mask, 2, "band_contract");
  expect_rank(magnitude, 3, "band_contract");
  const std::size_t K = mask.shape()[0], F = mask.shape()[1];
  const std::size_t N = magnitude.shape()[0], D = magnitude.shape()[2];
  if (magnitude.shape()[1] != F) {
    throw ShapeError("band_contract: mask " + to_string(mask.shape()) + " vs magnitude " +
                     to_string(magnitude.shape()));
  }
  Tape& tape = tape_of(mask);
  Tensor z({N, K, D});
  CMapMat M(mask.value().ptr(), K, F);
  for (std::size_t n = 0; n < N; ++n) {
    MapMat(z.ptr() + n * K * D, K, D).noalias() = M * CMapMat(magnitude.value().ptr() + n * F * D, F, D);
  }
  mac_counter() += N * K * F * D;
  return tape.record(std::move(z), {mask, magnitude}, [&tape, mask, magnitude, N, K, F, D](const Tensor& g) {
    CMapMat M(mask.value().ptr(), K, F);
    for (std::size_t n = 0; n < N; ++n) {
      CMapMat G(g.ptr() + n * K * D, K, D);
      if (mask.requires_grad()) {
        MapMat(tape.grad(mask).ptr(), K, F).noalias() +=
            G * CMapMat(magnitude.value().ptr() + n * F * D, F, D).transpose();
      }
      if (magnitude.requires_grad()) {
        MapMat(tape.grad(magnitude).ptr() + n * F * D, F, D).noalias() += M.transpose() * G;
      }
    }
  });
}

Var band_dot(const Var& z, const Var& w) {
  expect_rank(z, 3, "band_dot");
  expect_rank(w, 2, "band_dot");
  const std::size_t N = z.shape()[0], K = z.shape()[1], D = z.shape()[2];
  if (w.shape() != Shape{K, D}) {
    throw ShapeError("band_dot: z " + to_string(z.shape()) + " vs w " + to_string(w.shape()));
  }
  Tape& tape = tape_of(z);
  Tensor y({N, K});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k) {
      double s = 0.0;
      for (std::size_t d = 0; d < D; ++d) s += z.value()[(n * K + k) * D + d] * w.value()[k * D + d];
      y[n * K + k] = s;
    }
  return tape.record(std::move(y), {z, w}, [&tape, z, w, N, K, D](const Tensor& g) {
    double* gz = z.requires_grad() ? tape.grad(z).ptr() : nullptr;
    double* gw = w.requires_grad() ? tape.grad(w).ptr() : nullptr;
    const double* zv = z.value().ptr();
    const double* wv = w.value().ptr();
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t k = 0; k < K; ++k) {
        const double gk = g[n * K + k];
        const std::size_t zi = (n * K + k) * D;
        for (std::size_t d = 0; d < D; ++d) {
          if (gz) gz[zi + d] += gk * wv[k * D + d];
          if (gw) gw[k * D + d] += gk * zv[zi + d];
        }
      }
  });
}

Var band_coefficients(const Var& gate, const Var& mask) {
  expect_rank(gate, 2, "band_coefficients");
  expect_rank(mask, 2, "band_coefficients");
  const std::size_t N = gate.shape()[0], K = gate.shape()[1], F = mask.shape()[1];
  if (mask.shape()[0] != K) {
    throw ShapeError("band_coefficients: gate " + to_string(gate.shape()) + " vs mask " +
                     to_string(mask.shape()));
  }
  Tape& tape = tape_of(gate);
  Tensor c({N, K, F});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t f = 0; f < F; ++f)
        c[(n * K + k) * F + f] = gate.value()[n * K + k] * mask.value()[k * F + f];
  return tape.record(std::move(c), {gate, mask}, [&tape, gate, mask, N, K, F](const Tensor& g) {
    double* gg = gate.requires_grad() ? tape.grad(gate).ptr() : nullptr;
    double* gm = mask.requires_grad() ? tape.grad(mask).ptr() : nullptr;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t f = 0; f < F; ++f) {
          const double gv = g[(n * K + k) * F + f];
          if (gg) gg[n * K + k] += gv * mask.value()[k * F + f];
          if (gm) gm[k * F + f] += gv * gate.value()[n * K + k];
        }
  });
}

Var band_mix(const Var& coef, const Var& spectrum, const Var& w_re, const Var& w_im) {
  expect_rank(coef, 3, "band_mix");
  expect_rank(spectrum, 4, "band_mix");
  expect_rank(w_re, 3, "band_mix");
  expect_same(w_re, w_im, "band_mix");
  const std::size_t N = coef.shape()[0], K = coef.shape()[1], F = coef.shape()[2];
  const Shape& s = spectrum.shape();
  const std::size_t D = s[3];
  if (s[0] != 2 || s[1] != N || s[2] != F || w_re.shape() != Shape{K, D, D}) {
    throw ShapeError("band_mix: coef " + to_string(coef.shape()) + ", spectrum " + to_string(s) +
                     ", weights " + to_string(w_re.shape()));
  }
  Tape& tape = tape_of(coef);
  const std::size_t rows = N * F;
  const std::size_t plane = rows * D;
  const Tensor& X = spectrum.value();
  CMapMat Xr(X.ptr(), rows, D), Xi(X.ptr() + plane, rows, D);

  Tensor y({2, N, F, D});
  MapMat Yr(y.ptr(), rows, D), Yi(y.ptr() + plane, rows, D);
  RowMat Ur(rows, D), Ui(rows, D);
  auto scaled = [&](std::size_t k) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t f = 0; f < F; ++f) {
        const double c = coef.value()[(n * K + k) * F + f];
        const std::size_t r = n * F + f;
        Ur.row(r) = c * Xr.row(r);
        Ui.row(r) = c * Xi.row(r);
      }
  };
  for (std::size_t k = 0; k < K; ++k) {
    scaled(k);
    CMapMat Wr(w_re.value().ptr() + k * D * D, D, D), Wi(w_im.value().ptr() + k * D * D, D, D);
    Yr.noalias() += Ur * Wr.transpose();
    Yr.noalias() -= Ui * Wi.transpose();
    Yi.noalias() += Ui * Wr.transpose();
    Yi.noalias() += Ur * Wi.transpose();
  }
  mac_counter() += 4 * K * rows * D * D;

  return tape.record(std::move(y), {coef, spectrum, w_re, w_im},
                     [&tape, coef, spectrum, w_re, w_im, N, K, F, D, rows, plane](const Tensor& g) {
    const Tensor& X = spectrum.value();
    CMapMat Xr(X.ptr(), rows, D), Xi(X.ptr() + plane, rows, D);
    CMapMat Gr(g.ptr(), rows, D), Gi(g.ptr() + plane, rows, D);
    RowMat Ur(rows, D), Ui(rows, D), gUr(rows, D), gUi(rows, D);
    for (std::size_t k = 0; k < K; ++k) {
      CMapMat Wr(w_re.value().ptr() + k * D * D, D, D), Wi(w_im.value().ptr() + k * D * D, D, D);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t n = r / F, f = r % F;
        const double c = coef.value()[(n * K + k) * F + f];
        Ur.row(r) = c * Xr.row(r);
        Ui.row(r) = c * Xi.row(r);
      }
      if (w_re.requires_grad()) {
        MapMat gWr(tape.grad(w_re).ptr() + k * D * D, D, D);
        gWr.noalias() += Gr.transpose() * Ur;
        gWr.noalias() += Gi.transpose() * Ui;
      }
      if (w_im.requires_grad()) {
        MapMat gWi(tape.grad(w_im).ptr() + k * D * D, D, D);
        gWi.noalias() -= Gr.transpose() * Ui;
        gWi.noalias() += Gi.transpose() * Ur;
      }
      if (!coef.requires_grad() && !spectrum.requires_grad()) continue;
      gUr.noalias() = Gr * Wr;
      gUr.noalias() += Gi * Wi;
      gUi.noalias() = Gi * Wr;
      gUi.noalias() -= Gr * Wi;
      double* gc = coef.requires_grad() ? tape.grad(coef).ptr() : nullptr;
      double* gs = spectrum.requires_grad() ? tape.grad(spectrum).ptr() : nullptr;
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t n = r / F, f = r % F;
        const std::size_t ci = (n * K + k) * F + f;
        if (gc) gc[ci] += gUr.row(r).dot(Xr.row(r)) + gUi.row(r).dot(Xi.row(r));
        if (gs) {
          const double c = coef.value()[ci];
          MapMat(gs + r * D, 1, D) += c * gUr.row(r);
          MapMat(gs + plane + r * D, 1, D) += c * gUi.row(r);
        }
      }
    }
  });
}

}  // namespace nakul::ops
