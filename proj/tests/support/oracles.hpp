// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// Reference implementations the tests compare against. None of these call
// into the library's FFT, autodiff or convolution code.

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "nakul/autograd.hpp"
#include "nakul/rng.hpp"
#include "nakul/tensor.hpp"

namespace nakul::test {

struct NaiveSpectrum {
  std::vector<double> re, im;
};

/// O(T^2) one-sided DFT, X[f] = sum_t x[t] exp(-2 pi i f t / T), f <= T/2.
NaiveSpectrum naive_dft(const std::vector<double>& x);

/// O(T^2) inverse of the one-sided spectrum of a real signal (1/T included).
std::vector<double> naive_idft(const NaiveSpectrum& s, std::size_t T);

/// y[t] = sum_{j <= min(t, k-1)} K[j] x[t - j].
std::vector<double> direct_causal_conv(const std::vector<double>& K, const std::vector<double>& x);

/// Central difference (f(p + h) - f(p - h)) / 2h for entry i of p.
double central_difference(Parameter& p, std::size_t i, double h, const std::function<double()>& f);

/// Compares tape gradients of every entry of every parameter against central
/// differences; returns the largest |a - n| / max(|a|, |n|, floor).
double max_fd_error(const std::vector<Parameter*>& params, const std::function<Var(Tape&)>& loss,
                    double h = 1e-4, double floor = 1e-6, std::size_t max_entries = 40);

/// Same as above for a differentiable input (a tape leaf).
double max_fd_error_input(Tensor& x, const std::function<Var(Tape&, const Var&)>& loss, double h = 1e-4,
                          double floor = 1e-6, std::size_t max_entries = 40);

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0);
Parameter random_parameter(const char* name, Shape shape, Rng& rng, double scale = 1.0);

/// Eigen-free dense symmetric eigenvalues by cyclic Jacobi rotations.
std::vector<double> jacobi_eigenvalues(const Tensor& symmetric, int sweeps = 100);

}  // namespace nakul::test
