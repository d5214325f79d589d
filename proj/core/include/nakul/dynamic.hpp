// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// Multi-scale depthwise temporal kernels mixed by a statistics-driven
// meta-network, with a sigmoid output gate.

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "nakul/autograd.hpp"
#include "nakul/rng.hpp"

namespace nakul::dynamic {

/// Mean squared deviation of all entries of x [T, D] from their global mean.
double temporal_variance(const Tensor& x);

/// Shannon entropy (nats) of the per-bin spectral norm distribution of
/// x [T, D]; norms pool the D features by Euclidean norm. 0 for silent input.
double spectral_entropy(const Tensor& x);

struct MetaNetwork {
  Parameter w1;  // [16, 2]
  Parameter w2;  // [M, 16]

  static constexpr std::size_t kHidden = 16;
  MetaNetwork() = default;
  MetaNetwork(std::size_t n_kernels, Rng& rng);
  std::size_t kernels() const { return w2.value.dim(0); }
};

/// Meta-network input features from raw statistics:
/// [log(1 + variance), entropy / log(bins)].
std::array<double, 2> normalize_stats(double variance, double entropy, std::size_t bins);

/// softmax(W2 gelu(W1 s)) for the normalized statistics s.
Tensor predict_weights(const MetaNetwork& m, double variance, double entropy, std::size_t bins);

struct KernelBank {
  std::vector<std::size_t> sizes;
  std::vector<Parameter> kernels;  // [K_m, D] causal layout: last tap is lag 0
  Parameter w_gate;                // [D, D]

  KernelBank() = default;
  KernelBank(std::size_t width, std::vector<std::size_t> kernel_sizes, Rng& rng);
};

struct DynamicTrace {
  Tensor kernel_weights;  // [N, M]
  Tensor stats;           // [N, 2] normalized meta-network inputs
};

struct DynamicOptions {
  /// Replace the meta-network output with these weights, [N, M] or [1, M].
  const Tensor* forced_weights = nullptr;
  DynamicTrace* trace = nullptr;
};

class DynamicBranch {
 public:
  DynamicBranch(std::size_t width, std::vector<std::size_t> kernel_sizes, Rng& rng);

  /// x [N, T, D] -> [N, T, D].
  Var forward(Tape& tape, const Var& x, const DynamicOptions& opts = {});
  /// Meta-network mixture weights [N, M] for x [N, T, D].
  Var kernel_weights(Tape& tape, const Var& x);

  std::size_t width() const noexcept { return width_; }
  std::vector<Parameter*> parameters();

  KernelBank bank;
  MetaNetwork meta;

 private:
  std::size_t width_;
};

/// Default kernel tap counts.
inline const std::vector<std::size_t> kDefaultKernelSizes{3, 5, 7, 11};

}  // namespace nakul::dynamic
