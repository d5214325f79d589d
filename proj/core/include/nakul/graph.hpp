// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// Electrode graph construction and graph-biased top-k attention over channels.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "nakul/autograd.hpp"
#include "nakul/ops.hpp"
#include "nakul/rng.hpp"

namespace nakul::graph {

struct ElectrodeGraph {
  Tensor positions;       // [C, 3] meters
  Tensor adjacency;       // [C, C] 0/1 with self-loops
  Tensor norm_adjacency;  // [C, C] D^-1/2 A D^-1/2

  std::size_t channels() const { return adjacency.empty() ? 0 : adjacency.dim(0); }
};

inline constexpr double kDefaultRadius = 0.05;
inline constexpr double kDefaultLayoutRadius = 0.09;

/// A_ij = 1 iff |p_i - p_j| <= radius or i == j.
ElectrodeGraph build_graph(const Tensor& positions, double radius = kDefaultRadius);

/// D^-1/2 A D^-1/2 with D the row degrees. Throws on a zero-degree row.
Tensor normalize_adjacency(const Tensor& adjacency);

/// Removes each undirected non-self edge independently with probability p
/// and renormalizes.
ElectrodeGraph drop_edges(const ElectrodeGraph& g, double p, Rng& rng);

/// C points evenly spaced on a circle in the z = 0 plane.
Tensor circle_layout(std::size_t channels, double radius = kDefaultLayoutRadius);

struct Positions {
  std::vector<std::string> names;
  Tensor coords;  // [C, 3]
};

/// Parses `name x y z` lines; blank lines and lines starting with '#' are skipped.
Positions parse_positions(std::istream& in);
Positions load_positions(const std::string& path);

struct AttentionOptions {
  ops::AttentionProbe probe;
  /// Filled with the spatial biases [N, H, C, C] when non-null.
  Tensor* biases = nullptr;
};

class SpatialAttention {
 public:
  SpatialAttention(std::size_t width, std::size_t channels, std::size_t heads, std::size_t k_top,
                   Rng& rng);

  /// gelu(A_hat H W), H [N, C, D].
  Var graph_conv(Tape& tape, const ElectrodeGraph& g, const Var& h);
  /// H_tilde [N, C, D] -> [N, C, H*C]; entry (i, h*C + j) is head h's bias i -> j.
  Var spatial_biases(Tape& tape, const Var& h_tilde);
  /// x [N, C, D] -> [N, C, D].
  Var forward(Tape& tape, const ElectrodeGraph& g, const Var& x, const AttentionOptions& opts = {});

  std::size_t heads() const noexcept { return heads_; }
  std::size_t k_top() const noexcept { return k_top_; }
  std::size_t channels() const noexcept { return channels_; }
  std::vector<Parameter*> parameters();

  Parameter w_q, w_k, w_v, w_o;  // [D, D]
  Parameter w_graph;             // [D, D]
  Parameter w_bias;              // [H*C, D]
  Parameter beta_raw;            // [1], beta = softplus(beta_raw)

 private:
  std::size_t width_, channels_, heads_, k_top_;
};

/// Rearranges [N, C, H*C] biases into [N, H, C, C].
Tensor biases_by_head(const Tensor& biases, std::size_t heads);

}  // namespace nakul::graph
