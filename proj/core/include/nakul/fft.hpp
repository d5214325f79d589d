// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

#include "nakul/tensor.hpp"

namespace nakul {

using cplx = std::complex<double>;

/// Complex DFT of a fixed length. Powers of two use an iterative radix-2
/// kernel; other lengths go through Bluestein's chirp-z transform.
/// Both directions are unnormalized.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);
  ~FftPlan();
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  /// Cached plan for length n (per thread).
  static const FftPlan& get(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  void forward(cplx* data) const;
  void inverse(cplx* data) const;
  /// Transforms `lanes` independent sequences stored as split real and
  /// imaginary [n, lanes] row-major arrays, in place.
  void transform_lanes(double* re, double* im, std::size_t lanes, bool inverse) const;

 private:
  void radix2(cplx* data, bool inverse) const;
  void bluestein(cplx* data, bool inverse) const;

  std::size_t n_;
  bool pow2_;
  std::vector<cplx> twiddle_;        // exp(-2 pi i k / n), k < n/2
  std::vector<std::size_t> bitrev_;
  std::size_t m_ = 0;                // padded Bluestein length
  std::vector<cplx> chirp_;          // exp(-i pi j^2 / n)
  std::vector<cplx> chirp_spectrum_; // FFT_m of conj(chirp), wrapped
  std::unique_ptr<FftPlan> inner_;
};

/// One-sided spectrum of a real signal with `stride`-spaced samples.
/// Writes T/2+1 bins to re/im with spacing `out_stride`.
void rfft_line(const double* x, std::size_t T, std::size_t stride, double* re, double* im,
               std::size_t out_stride, std::vector<cplx>& work);

/// Inverse of rfft_line, including the 1/T factor. Imaginary parts of the DC
/// bin (and the Nyquist bin for even T) do not affect the result.
void irfft_line(const double* re, const double* im, std::size_t T, std::size_t in_stride,
                double* x, std::size_t stride, std::vector<cplx>& work);

inline std::size_t rfft_bins(std::size_t T) { return T / 2 + 1; }

/// Lines up to this length are transformed by dense DFT matrix products,
/// which beat the FFT's per-line overhead at these sizes.
inline constexpr std::size_t kDenseDftMaxLength = 64;

/// Batched transforms along the middle axis of row-major [N, T, D] data.
/// Spectra are separate real and imaginary [N, T/2+1, D] arrays.
void rfft_batch(const double* x, std::size_t N, std::size_t T, std::size_t D, double* re, double* im);
/// Overwrites x with the inverse transform (1/T included).
void irfft_batch(const double* re, const double* im, std::size_t N, std::size_t T, std::size_t D,
                 double* x);
/// Adds the adjoint of rfft_batch applied to (gre, gim) into gx:
/// gx[t] += sum_f gre[f] cos(2 pi f t / T) - gim[f] sin(2 pi f t / T).
void rfft_adjoint_batch(const double* gre, const double* gim, std::size_t N, std::size_t T,
                        std::size_t D, double* gx);

/// One-sided DFT along the last axis: [..., T] -> [..., T/2+1].
ComplexTensor fft_real(const Tensor& x);

/// Inverse of fft_real: [..., T/2+1] -> [..., T]. Throws ShapeError when the
/// bin count does not equal T/2+1.
Tensor ifft_real(const ComplexTensor& spectrum, std::size_t T);

}  // namespace nakul
