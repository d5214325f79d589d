// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/flops.hpp"

#include <algorithm>
#include <cmath>

#include "nakul/fft.hpp"

namespace nakul {

std::uint64_t FlopReport::total() const {
  std::uint64_t t = 0;
  for (const auto& [name, v] : components()) t += v;
  return t;
}

std::vector<std::pair<std::string, std::uint64_t>> FlopReport::components() const {
  return {{"embedding", embedding},   {"fft", fft},
          {"spectral_mixing", spectral_mixing}, {"ssm_branches", ssm_branches},
          {"meta_net", meta_net},     {"graph_conv", graph_conv},
          {"attention", attention},   {"projection_ffn", projection_ffn},
          {"head", head}};
}

std::uint64_t fft_line_macs(std::size_t T) {
  if (T < 2) return 0;
  return static_cast<std::uint64_t>(std::llround(4.0 * double(T / 2) * std::log2(double(T))));
}

FlopReport count_flops(const ModelConfig& cfg, std::size_t batch) {
  using u64 = std::uint64_t;
  const u64 B = batch, C = cfg.channels, Tp = cfg.patches(), D = cfg.dim, P = cfg.patch;
  const u64 F = rfft_bins(Tp), K = cfg.bands, H = cfg.heads, dk = D / H;
  const u64 kk = std::min<u64>(cfg.k_top, C), M = cfg.kernel_sizes.size();
  const u64 J = *std::max_element(cfg.kernel_sizes.begin(), cfg.kernel_sizes.end());
  const u64 seqs = B * C, tokens = B * C * Tp, groups = B * Tp;

  FlopReport r;
  r.embedding = tokens * P * D;
  std::array<bool, 3> on{true, true, true};
  if (cfg.forced_fusion) {
    for (int i = 0; i < 3; ++i) on[i] = (*cfg.forced_fusion)[i] != 0.0;
  }
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    if (on[0]) {
      r.fft += 2 * seqs * D * fft_line_macs(Tp);  // forward and inverse
      r.spectral_mixing += seqs * K * F * D + 4 * K * seqs * F * D * D;
    }
    if (on[1]) {
      r.fft += seqs * D * fft_line_macs(Tp);  // spectral entropy statistic
      r.ssm_branches += seqs * Tp * J * D + tokens * D * D;
      r.meta_net += seqs * (16 * 2 + M * 16);
    }
    if (on[2]) {
      r.graph_conv += tokens * D * D + groups * C * C * D;
      r.attention += 4 * tokens * D * D + tokens * (H * C) * D + groups * H * C * C * dk + groups * H * C * kk * dk;
    }
    r.projection_ffn += tokens * D * D + 2 * tokens * D * cfg.ffn_hidden;
  }
  r.head = B * (D * cfg.head_hidden + cfg.head_hidden * cfg.classes);
  return r;
}

}  // namespace nakul
