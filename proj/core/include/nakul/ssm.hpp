// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// Linear time-invariant state space models and their selective variant.
// Continuous system h' = A h + B x, y = C h + D x with scalar input and output.

#pragma once

#include <Eigen/Dense>
#include <cstddef>

#include "nakul/autograd.hpp"
#include "nakul/rng.hpp"
#include "nakul/tensor.hpp"

namespace nakul::ssm {

struct SsmParams {
  Eigen::MatrixXd A;     // N x N
  Eigen::VectorXd B;     // N
  Eigen::RowVectorXd C;  // N
  double D_skip = 0.0;

  std::size_t state_dim() const { return static_cast<std::size_t>(A.rows()); }
};

struct DiscreteSsm {
  Eigen::MatrixXd A_bar;
  Eigen::VectorXd B_bar;
  Eigen::RowVectorXd C;
  double D_skip = 0.0;
  double delta = 0.0;
};

/// A = diag(-1, -2, ..., -N), B and C all ones, no skip.
SsmParams default_params(std::size_t state_dim);

/// exp(M) by scaling and squaring with a [6/6] Pade approximant.
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& m);

/// Zero-order hold transition for step `delta`: returns exp(delta A) and
/// G = delta * phi1(delta A), so that B_bar = G B. phi1(z) = (e^z - 1) / z is
/// summed as a Taylor series when |delta A| is small; larger arguments use the
/// block exponential exp([[dA, dI], [0, 0]]). No matrix is ever inverted.
struct ZohFactors {
  Eigen::MatrixXd transition;
  Eigen::MatrixXd input_gain;
};
ZohFactors zoh_factors(const Eigen::MatrixXd& A, double delta);

/// Throws std::invalid_argument for delta <= 0 and std::runtime_error for a
/// non-finite result.
DiscreteSsm discretize(const SsmParams& p, double delta);

/// K[k] = C A_bar^k B_bar for k < L.
Tensor materialize_kernel(const DiscreteSsm& d, std::size_t L);

/// y_k = C h_k + D x_k, h_k = A_bar h_{k-1} + B_bar x_k, h_{-1} = 0. x is [L].
Tensor recurrent_scan(const DiscreteSsm& d, const Tensor& x);

/// Causal, same-length convolution y_t = sum_{j <= min(t, k-1)} K_j x_{t-j}.
Tensor causal_convolve(const Tensor& kernel, const Tensor& x);

/// Input-dependent projections for the selective scan (feature width D).
struct SelectiveParams {
  Parameter w_delta;  // [1, D]
  Parameter w_b;      // [N, D]
  Parameter w_c;      // [N, D]

  static SelectiveParams zeros(std::size_t state_dim, std::size_t width);
  static SelectiveParams random(std::size_t state_dim, std::size_t width, Rng& rng);
};

/// Selective recurrence over x [L, D]:
///   delta_t = softplus(W_delta x_t), B_t = W_B x_t, C_t = W_C x_t,
///   u_t = mean(x_t),
///   h_t = exp(delta_t A) h_{t-1} + delta_t phi1(delta_t A) B_t u_t,
///   y_t = C_t h_t + D u_t.
/// Returns y as [L]. Differentiable in x and the three projections.
Var selective_scan(SelectiveParams& sp, const SsmParams& base, const Var& x);

/// Convenience forward-only evaluation.
Tensor selective_scan(SelectiveParams& sp, const SsmParams& base, const Tensor& x);

}  // namespace nakul::ssm
