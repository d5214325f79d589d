// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// The NAKUL block (spectral, dynamic and graph branches fused and followed by
// an FFN) and the patch-embedding classifier built from it.
//
// Tokens use a [B, C, T_p, D] layout: the spectral and dynamic branches mix
// along T_p for each channel, the graph branch mixes along C for each patch.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nakul/dynamic.hpp"
#include "nakul/graph.hpp"
#include "nakul/spectral.hpp"

namespace nakul {

struct ModelConfig {
  // data
  std::size_t channels = 8;
  std::size_t length = 1000;
  std::size_t classes = 4;
  double rate = 250.0;
  // architecture
  std::size_t patch = 50;
  std::size_t dim = 128;
  std::size_t blocks = 6;
  std::size_t heads = 8;
  std::size_t bands = 4;
  std::size_t k_top = 16;
  std::size_t state_dim = 4;
  std::size_t ffn_hidden = 512;
  std::size_t head_hidden = 64;
  std::vector<std::size_t> kernel_sizes = dynamic::kDefaultKernelSizes;
  double fusion_scale = 0.5;
  // regularization (training only)
  double dropout = 0.1;
  double drop_path = 0.1;
  double drop_edge = 0.2;
  /// Fixed fusion weights (spectral, dynamic, graph) replacing the learned
  /// softmax; branches with weight 0 are skipped.
  std::optional<std::array<double, 3>> forced_fusion;

  std::size_t patches() const { return (length + patch - 1) / patch; }
  /// Throws ConfigError naming the offending key.
  void validate() const;
};

enum class Branch : int { kSpectral = 0, kDynamic = 1, kGraph = 2 };

struct BlockTrace {
  Tensor fusion_weights;  // [3]
  spectral::SpectralTrace spectral;
  dynamic::DynamicTrace dynamic;
  Tensor attention;  // [B*T_p, H, C, C] when requested
  // Branch outputs before fusion, [B, C, T_p, D]; empty for skipped branches.
  Tensor y_spec, y_dyn, y_graph;
};

struct ModelTrace {
  bool keep_attention = false;
  bool keep_branch_outputs = false;
  Tensor embedding;  // [B, C, T_p, D]
  Tensor tokens;     // after the last block
  std::vector<BlockTrace> blocks;
};

struct ForwardOptions {
  bool training = false;
  /// Dropout, stochastic depth and DropEdge draws; required when training.
  Rng* rng = nullptr;
  ModelTrace* trace = nullptr;
};

class NakulBlock {
 public:
  NakulBlock(const ModelConfig& cfg, std::size_t index, Rng& rng);

  /// x [B, C, T_p, D] -> same shape.
  Var forward(Tape& tape, const Var& x, const graph::ElectrodeGraph& g, const ForwardOptions& opts,
              BlockTrace* trace);

  std::vector<std::pair<std::string, Parameter*>> named_parameters();
  /// Softmax of the fusion logits, or the forced weights.
  std::array<double, 3> fusion_weights() const;

  spectral::SpectralBranch spectral;
  dynamic::DynamicBranch dynamic;
  graph::SpatialAttention attention;
  Parameter fusion_logits;  // [3]
  Parameter w_proj;         // [D, D]
  Parameter ln_mix_g, ln_mix_b, ln_fuse_g, ln_fuse_b, ln_ffn_g, ln_ffn_b;  // [D]
  Parameter ffn_w1, ffn_b1, ffn_w2, ffn_b2;

 private:
  ModelConfig cfg_;
  std::size_t index_;
};

class NakulModel {
 public:
  explicit NakulModel(ModelConfig cfg, std::uint64_t seed = 0);
  NakulModel(const NakulModel&) = delete;
  NakulModel& operator=(const NakulModel&) = delete;

  /// x [B, C, T] -> tokens [B, C, T_p, D]. The last patch is zero-padded.
  Var embed(Tape& tape, const Tensor& x);
  /// Runs all blocks on tokens [B, C, T_p, D].
  Var run_blocks(Tape& tape, const Var& tokens, const graph::ElectrodeGraph& g,
                 const ForwardOptions& opts = {});
  /// Mean over (C, T_p) then the MLP head -> logits [B, classes].
  Var head(Tape& tape, const Var& tokens, const ForwardOptions& opts = {});
  /// x [B, C, T] -> logits [B, classes].
  Var forward(Tape& tape, const Tensor& x, const graph::ElectrodeGraph& g, const ForwardOptions& opts = {});

  /// Inference logits without recording gradients.
  Tensor logits(const Tensor& x, const graph::ElectrodeGraph& g, ModelTrace* trace = nullptr);

  const ModelConfig& config() const noexcept { return cfg_; }
  std::vector<NakulBlock>& blocks() noexcept { return blocks_; }

  /// Stable, fully qualified names in a fixed order.
  std::vector<std::pair<std::string, Parameter*>> named_parameters();
  std::vector<Parameter*> parameters();
  std::size_t parameter_count();
  void zero_grad();

  Parameter embed_w;  // [D, P]
  Parameter embed_b;  // [D]
  Parameter pos;      // [C, T_p, D]
  Parameter head_w1, head_b1, head_w2, head_b2;

 private:
  ModelConfig cfg_;
  std::vector<NakulBlock> blocks_;
};

}  // namespace nakul
