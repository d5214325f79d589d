// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// Analytic multiply-add counts for one forward pass.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nakul/model.hpp"

namespace nakul {

struct FlopReport {
  std::uint64_t embedding = 0;
  std::uint64_t fft = 0;              // rfft/irfft lines, 4 (T/2) log2 T each
  std::uint64_t spectral_mixing = 0;  // band aggregation and complex band mixing
  std::uint64_t ssm_branches = 0;     // depthwise kernels and output gate
  std::uint64_t meta_net = 0;
  std::uint64_t graph_conv = 0;
  std::uint64_t attention = 0;        // projections, biases, scores and values
  std::uint64_t projection_ffn = 0;
  std::uint64_t head = 0;

  std::uint64_t total() const;
  std::vector<std::pair<std::string, std::uint64_t>> components() const;
};

/// Multiply-adds of model_forward on a batch of `batch` inputs with the
/// configured channel count and length.
FlopReport count_flops(const ModelConfig& cfg, std::size_t batch);

/// Real multiply-adds of one length-T real FFT line under the radix-2 model.
std::uint64_t fft_line_macs(std::size_t T);

}  // namespace nakul
