// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// Differentiable primitives. Every function records one node on the tape of
// its inputs; shapes are checked eagerly and mismatches throw ShapeError.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nakul/autograd.hpp"

namespace nakul::ops {

// Elementwise and reductions ------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// Elementwise product with a constant (dropout and drop-path masks).
Var mul_const(const Var& a, const Tensor& m);
/// b's shape must equal the trailing axes of a; b is broadcast over the rest.
Var add_trailing(const Var& a, const Var& b);

Var gelu(const Var& a);  // exact, erf-based
Var sigmoid(const Var& a);
Var softplus(const Var& a);
/// softplus(a) + floor, a positivity reparameterization with a lower bound.
Var positive(const Var& a, double floor);

Var softmax(const Var& a);  // over the last axis
/// Layer normalization over the last axis with learnable scale and shift.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

Var sum(const Var& a);
Var mean(const Var& a);
/// x viewed as [outer, groups, inner]; averages over the middle axis.
Var mean_groups(const Var& x, std::size_t outer, std::size_t inner);
/// Weighted sum sum_i w[i] * ys[i]; w has shape [ys.size()].
Var weighted_sum(const Var& w, const std::vector<Var>& ys);

// Layout --------------------------------------------------------------------

Var reshape(const Var& a, Shape shape);
/// [A, B, C, D] -> [A, C, B, D].
Var swap_axes12(const Var& a);

// Contractions --------------------------------------------------------------

/// [n, k] x [k, m] -> [n, m].
Var matmul(const Var& a, const Var& b);
/// x [..., in] times W [out, in] transposed -> [..., out].
Var linear(const Var& x, const Var& w);

// Spectral primitives (time axis is the middle axis of [N, T, D]) ------------

/// [N, T, D] -> packed [2, N, T/2+1, D] (real plane, then imaginary plane).
Var rfft(const Var& x);
/// packed [2, N, T/2+1, D] -> [N, T, D].
Var irfft(const Var& spectrum, std::size_t T);
/// packed [2, N, F, D] -> |X| as [N, F, D]. Subgradient 0 at the origin.
Var complex_abs(const Var& spectrum);
/// Gaussian density of each bin frequency under each band:
/// mu, sigma [K] (positive) -> [K, F].
Var gaussian_mask(const Var& mu, const Var& sigma, std::span<const double> bin_freqs);
/// mask [K, F], magnitude [N, F, D] -> [N, K, D] with Z[n,k,:] = sum_f mask[k,f] mag[n,f,:].
Var band_contract(const Var& mask, const Var& magnitude);
/// z [N, K, D], w [K, D] -> [N, K] with out[n,k] = <z[n,k,:], w[k,:]>.
Var band_dot(const Var& z, const Var& w);
/// gate [N, K], mask [K, F] -> [N, K, F] products gate[n,k] * mask[k,f].
Var band_coefficients(const Var& gate, const Var& mask);
/// Complex per-band mixing:
/// out[n,f] = sum_k coef[n,k,f] * (Wr_k + i Wi_k) X[n,f]
/// with X packed [2, N, F, D] and Wr, Wi [K, D, D]. Returns packed [2, N, F, D].
Var band_mix(const Var& coef, const Var& spectrum, const Var& w_re, const Var& w_im);

// Temporal primitives --------------------------------------------------------

/// Per-sequence meta-network features of x [N, T, D]:
/// [log(1 + variance), entropy / log(F)] -> [N, 2].
Var sequence_stats(const Var& x);
/// Mixture of depthwise kernels. weights [N, M]; kernels[m] is [K_m, D] in
/// causal layout (last tap multiplies the current sample). Result is
/// [N, Kmax, D], each kernel left-padded to Kmax taps.
Var mix_kernels(const Var& weights, const std::vector<Var>& kernels);
/// Causal depthwise convolution of x [N, T, D] with per-sequence kernels
/// [N, J, D]: y[t] = sum_j k[j] * x[t - (J-1) + j], zero history.
Var depthwise_causal_conv(const Var& x, const Var& kernel);

// Graph primitives -----------------------------------------------------------

/// adjacency [C, C] (constant) applied to h [N, C, D] along the C axis.
Var graph_aggregate(const Tensor& adjacency, const Var& h);

struct AttentionProbe {
  /// Filled with attention probabilities [N, H, C, C] when non-null.
  Tensor* probabilities = nullptr;
  /// Filled with pre-mask scores [N, H, C, C] when non-null.
  Tensor* scores = nullptr;
};

/// Multi-head attention over the C axis with additive spatial bias and
/// per-row top-k masking. q, k, v [N, C, D]; bias [N, C, H*C] indexed
/// (i, h*C + j); beta scalar. Excluded scores get -inf before the softmax;
/// ties keep the lower column index. Output is concatenated heads [N, C, D].
Var topk_attention(const Var& q, const Var& k, const Var& v, const Var& bias, const Var& beta,
                   std::size_t heads, std::size_t k_top, AttentionProbe probe = {});

/// While in scope on this thread, every topk_attention call either appends
/// its kept set to `masks` (kRecord) or takes the next recorded set instead of
/// ranking scores (kReplay). Replay keeps finite differences on the piece the
/// recorded backward pass differentiated. Not reentrant.
class TopkSupportPin {
 public:
  enum class Mode { kRecord, kReplay };
  TopkSupportPin(std::vector<std::vector<unsigned char>>& masks, Mode mode);
  ~TopkSupportPin();
  TopkSupportPin(const TopkSupportPin&) = delete;
  TopkSupportPin& operator=(const TopkSupportPin&) = delete;

  std::vector<std::vector<unsigned char>>* masks;
  Mode mode;
  std::size_t cursor = 0;
};

// Loss -----------------------------------------------------------------------

/// Mean over the batch of -sum_c q_c log softmax(logits)_c with
/// q = (1 - eps) onehot + eps / n. Throws std::out_of_range on a bad label.
Var smoothed_cross_entropy(const Var& logits, std::span<const int> labels, double eps);

}  // namespace nakul::ops
