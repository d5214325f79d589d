// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/fft.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "nakul/errors.hpp"

namespace nakul {

namespace {

bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

FftPlan::FftPlan(std::size_t n) : n_(n), pow2_(is_pow2(n)) {
  if (n == 0) throw ShapeError("FFT length must be positive");
  if (pow2_) {
    twiddle_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      twiddle_[k] = std::polar(1.0, -2.0 * std::numbers::pi * double(k) / double(n));
    }
    bitrev_.resize(n);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1) << (bits - 1 - b);
      bitrev_[i] = r;
    }
    return;
  }
  m_ = next_pow2(2 * n - 1);
  chirp_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    // j^2 mod 2n keeps the angle argument small and exact.
    const auto q = static_cast<double>((j * j) % (2 * n));
    chirp_[j] = std::polar(1.0, -std::numbers::pi * q / double(n));
  }
  inner_ = std::make_unique<FftPlan>(m_);
  chirp_spectrum_.assign(m_, cplx{});
  chirp_spectrum_[0] = std::conj(chirp_[0]);
  for (std::size_t j = 1; j < n; ++j) {
    chirp_spectrum_[j] = std::conj(chirp_[j]);
    chirp_spectrum_[m_ - j] = std::conj(chirp_[j]);
  }
  inner_->forward(chirp_spectrum_.data());
}

FftPlan::~FftPlan() = default;

const FftPlan& FftPlan::get(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::unique_ptr<FftPlan>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlan>(n);
  return *slot;
}

void FftPlan::forward(cplx* data) const {
  if (pow2_) {
    radix2(data, false);
  } else {
    bluestein(data, false);
  }
}

void FftPlan::inverse(cplx* data) const {
  if (pow2_) {
    radix2(data, true);
  } else {
    bluestein(data, true);
  }
}

void FftPlan::radix2(cplx* a, bool inverse) const {
  const std::size_t n = n_;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
  }
  const double sign = inverse ? -1.0 : 1.0;
  std::size_t stages = 0;
  for (std::size_t len = 2; len <= n; len <<= 1, ++stages) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        // Written out by hand: std::complex multiply takes a slow NaN-checking path.
        const double wr = twiddle_[k * step].real(), wi = sign * twiddle_[k * step].imag();
        const cplx u = a[start + k];
        const cplx b = a[start + k + half];
        const double vr = b.real() * wr - b.imag() * wi;
        const double vi = b.real() * wi + b.imag() * wr;
        a[start + k] = cplx(u.real() + vr, u.imag() + vi);
        a[start + k + half] = cplx(u.real() - vr, u.imag() - vi);
      }
    }
  }
  // One complex multiply (4 real multiply-adds) per butterfly.
  mac_counter() += 4 * (n / 2) * stages;
}

void FftPlan::transform_lanes(double* re, double* im, std::size_t lanes, bool inverse) const {
  const std::size_t n = n_;
  if (!pow2_) {
    std::vector<cplx> line(n);
    for (std::size_t l = 0; l < lanes; ++l) {
      for (std::size_t t = 0; t < n; ++t) line[t] = cplx(re[t * lanes + l], im[t * lanes + l]);
      bluestein(line.data(), inverse);
      for (std::size_t t = 0; t < n; ++t) {
        re[t * lanes + l] = line[t].real();
        im[t * lanes + l] = line[t].imag();
      }
    }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = bitrev_[i];
    if (i < j) {
      std::swap_ranges(re + i * lanes, re + (i + 1) * lanes, re + j * lanes);
      std::swap_ranges(im + i * lanes, im + (i + 1) * lanes, im + j * lanes);
    }
  }
  const double sign = inverse ? -1.0 : 1.0;
  std::size_t stages = 0;
  for (std::size_t len = 2; len <= n; len <<= 1, ++stages) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const double wr = twiddle_[k * step].real(), wi = sign * twiddle_[k * step].imag();
        double* ur = re + (start + k) * lanes;
        double* ui = im + (start + k) * lanes;
        double* br = re + (start + k + half) * lanes;
        double* bi = im + (start + k + half) * lanes;
        for (std::size_t l = 0; l < lanes; ++l) {
          const double vr = br[l] * wr - bi[l] * wi;
          const double vi = br[l] * wi + bi[l] * wr;
          br[l] = ur[l] - vr;
          bi[l] = ui[l] - vi;
          ur[l] += vr;
          ui[l] += vi;
        }
      }
    }
  }
  mac_counter() += 4 * (n / 2) * stages * lanes;
}

void FftPlan::bluestein(cplx* data, bool inverse) const {
  const std::size_t n = n_;
  std::vector<cplx> buf(m_, cplx{});
  for (std::size_t j = 0; j < n; ++j) {
    const cplx x = inverse ? std::conj(data[j]) : data[j];
    buf[j] = x * chirp_[j];
  }
  inner_->forward(buf.data());
  for (std::size_t k = 0; k < m_; ++k) {
    const cplx a = buf[k], b = chirp_spectrum_[k];
    buf[k] = cplx(a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real());
  }
  inner_->inverse(buf.data());
  const double scale = 1.0 / double(m_);
  for (std::size_t k = 0; k < n; ++k) {
    const cplx y = buf[k] * scale * chirp_[k];
    data[k] = inverse ? std::conj(y) : y;
  }
  mac_counter() += 4 * (2 * n + m_);
}

void rfft_line(const double* x, std::size_t T, std::size_t stride, double* re, double* im,
               std::size_t out_stride, std::vector<cplx>& work) {
  work.resize(T);
  for (std::size_t t = 0; t < T; ++t) work[t] = cplx(x[t * stride], 0.0);
  FftPlan::get(T).forward(work.data());
  const std::size_t F = rfft_bins(T);
  for (std::size_t f = 0; f < F; ++f) {
    re[f * out_stride] = work[f].real();
    im[f * out_stride] = work[f].imag();
  }
}

void irfft_line(const double* re, const double* im, std::size_t T, std::size_t in_stride,
                double* x, std::size_t stride, std::vector<cplx>& work) {
  work.assign(T, cplx{});
  const std::size_t F = rfft_bins(T);
  for (std::size_t f = 0; f < F; ++f) work[f] = cplx(re[f * in_stride], im[f * in_stride]);
  for (std::size_t f = 1; f < F; ++f) {
    if (T - f != f) work[T - f] = std::conj(work[f]);
  }
  FftPlan::get(T).inverse(work.data());
  const double inv = 1.0 / double(T);
  for (std::size_t t = 0; t < T; ++t) x[t * stride] = work[t].real() * inv;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

// Real and imaginary parts of the one-sided DFT matrix [F, T] and of the
// matrix [T, F] that inverts it for Hermitian spectra.
struct DenseDft {
  RowMat fwd_re, fwd_im, inv_re, inv_im;

  explicit DenseDft(std::size_t T) {
    const std::size_t F = rfft_bins(T);
    fwd_re.resize(F, T);
    fwd_im.resize(F, T);
    inv_re.resize(T, F);
    inv_im.resize(T, F);
    for (std::size_t f = 0; f < F; ++f) {
      const bool edge = f == 0 || 2 * f == T;
      const double c = (edge ? 1.0 : 2.0) / double(T);
      for (std::size_t t = 0; t < T; ++t) {
        // f t mod T keeps the angle exact for large products.
        const double a = 2.0 * std::numbers::pi * double((f * t) % T) / double(T);
        const double cs = std::cos(a), sn = std::sin(a);
        fwd_re(f, t) = cs;
        fwd_im(f, t) = -sn;
        inv_re(t, f) = c * cs;
        inv_im(t, f) = edge ? 0.0 : -c * sn;
      }
    }
  }

  static const DenseDft& get(std::size_t T) {
    thread_local std::unordered_map<std::size_t, std::unique_ptr<DenseDft>> cache;
    auto& slot = cache[T];
    if (!slot) slot = std::make_unique<DenseDft>(T);
    return *slot;
  }
};

}  // namespace

void rfft_batch(const double* x, std::size_t N, std::size_t T, std::size_t D, double* re, double* im) {
  const std::size_t F = rfft_bins(T);
  if (T <= kDenseDftMaxLength) {
    const DenseDft& m = DenseDft::get(T);
    for (std::size_t n = 0; n < N; ++n) {
      CMap xn(x + n * T * D, T, D);
      Map(re + n * F * D, F, D).noalias() = m.fwd_re * xn;
      Map(im + n * F * D, F, D).noalias() = m.fwd_im * xn;
    }
    mac_counter() += 2 * N * F * T * D;
    return;
  }
  const FftPlan& plan = FftPlan::get(T);
  std::vector<double> wr(T * D), wi(T * D);
  for (std::size_t n = 0; n < N; ++n) {
    std::copy(x + n * T * D, x + (n + 1) * T * D, wr.begin());
    std::fill(wi.begin(), wi.end(), 0.0);
    plan.transform_lanes(wr.data(), wi.data(), D, false);
    std::copy(wr.begin(), wr.begin() + F * D, re + n * F * D);
    std::copy(wi.begin(), wi.begin() + F * D, im + n * F * D);
  }
}

void irfft_batch(const double* re, const double* im, std::size_t N, std::size_t T, std::size_t D,
                 double* x) {
  const std::size_t F = rfft_bins(T);
  if (T <= kDenseDftMaxLength) {
    const DenseDft& m = DenseDft::get(T);
    for (std::size_t n = 0; n < N; ++n) {
      Map xn(x + n * T * D, T, D);
      xn.noalias() = m.inv_re * CMap(re + n * F * D, F, D);
      xn.noalias() += m.inv_im * CMap(im + n * F * D, F, D);
    }
    mac_counter() += 2 * N * F * T * D;
    return;
  }
  const FftPlan& plan = FftPlan::get(T);
  std::vector<double> wr(T * D), wi(T * D);
  const double inv = 1.0 / double(T);
  for (std::size_t n = 0; n < N; ++n) {
    // Hermitian extension; the imaginary parts at DC and Nyquist are dropped.
    std::copy(re + n * F * D, re + (n + 1) * F * D, wr.begin());
    std::copy(im + n * F * D, im + (n + 1) * F * D, wi.begin());
    std::fill(wi.begin(), wi.begin() + D, 0.0);
    if (T % 2 == 0) std::fill(wi.begin() + (T / 2) * D, wi.begin() + (T / 2 + 1) * D, 0.0);
    for (std::size_t f = 1; f < F; ++f) {
      if (T - f == f) continue;
      for (std::size_t d = 0; d < D; ++d) {
        wr[(T - f) * D + d] = wr[f * D + d];
        wi[(T - f) * D + d] = -wi[f * D + d];
      }
    }
    plan.transform_lanes(wr.data(), wi.data(), D, true);
    double* xn = x + n * T * D;
    for (std::size_t i = 0; i < T * D; ++i) xn[i] = wr[i] * inv;
  }
}

void rfft_adjoint_batch(const double* gre, const double* gim, std::size_t N, std::size_t T,
                        std::size_t D, double* gx) {
  const std::size_t F = rfft_bins(T);
  if (T <= kDenseDftMaxLength) {
    const DenseDft& m = DenseDft::get(T);
    for (std::size_t n = 0; n < N; ++n) {
      Map g(gx + n * T * D, T, D);
      g.noalias() += m.fwd_re.transpose() * CMap(gre + n * F * D, F, D);
      g.noalias() += m.fwd_im.transpose() * CMap(gim + n * F * D, F, D);
    }
    mac_counter() += 2 * N * F * T * D;
    return;
  }
  const FftPlan& plan = FftPlan::get(T);
  std::vector<double> wr(T * D), wi(T * D);
  for (std::size_t n = 0; n < N; ++n) {
    std::fill(wr.begin(), wr.end(), 0.0);
    std::fill(wi.begin(), wi.end(), 0.0);
    std::copy(gre + n * F * D, gre + (n + 1) * F * D, wr.begin());
    std::copy(gim + n * F * D, gim + (n + 1) * F * D, wi.begin());
    plan.transform_lanes(wr.data(), wi.data(), D, true);
    double* g = gx + n * T * D;
    for (std::size_t i = 0; i < T * D; ++i) g[i] += wr[i];
  }
}

ComplexTensor fft_real(const Tensor& x) {
  if (x.empty()) throw ShapeError("fft_real on empty tensor");
  const std::size_t T = x.shape().back();
  const std::size_t F = rfft_bins(T);
  const std::size_t lines = x.size() / T;
  Shape out_shape = x.shape();
  out_shape.back() = F;
  ComplexTensor out(out_shape);
  std::vector<cplx> work;
  for (std::size_t l = 0; l < lines; ++l) {
    rfft_line(x.ptr() + l * T, T, 1, out.re.data() + l * F, out.im.data() + l * F, 1, work);
  }
  return out;
}

Tensor ifft_real(const ComplexTensor& spectrum, std::size_t T) {
  if (spectrum.shape.empty() || T == 0) throw ShapeError("ifft_real needs T >= 1");
  const std::size_t F = spectrum.shape.back();
  if (F != rfft_bins(T)) {
    throw ShapeError("ifft_real: " + std::to_string(F) + " bins do not match T=" +
                     std::to_string(T));
  }
  const std::size_t lines = spectrum.size() / F;
  Shape out_shape = spectrum.shape;
  out_shape.back() = T;
  Tensor out(out_shape);
  std::vector<cplx> work;
  for (std::size_t l = 0; l < lines; ++l) {
    irfft_line(spectrum.re.data() + l * F, spectrum.im.data() + l * F, T, 1,
               out.ptr() + l * T, 1, work);
  }
  return out;
}

}  // namespace nakul
