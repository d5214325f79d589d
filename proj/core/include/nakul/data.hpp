// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// Labelled multichannel trials, the planted-band synthetic generator and
// stratified splitting.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nakul/tensor.hpp"

namespace nakul {

struct Sample {
  std::string name;
  Tensor signal;  // [C, T]
  int label = 0;
};

struct Dataset {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::size_t classes = 0;
  double rate = 0.0;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  /// Stacks the selected trials into [B, C, T].
  Tensor batch(const std::vector<std::size_t>& indices) const;
  std::vector<int> labels(const std::vector<std::size_t>& indices) const;
};

struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t channels = 8;
  std::size_t length = 1000;
  double rate = 250.0;
  /// Tone frequencies (Hz) planted for each class.
  std::vector<std::vector<double>> class_bands{{6.0}, {12.0}, {24.0}, {34.0}};
  /// Channels carrying each class's tones.
  std::vector<std::vector<std::size_t>> active_channels{{0, 1, 2, 3}, {0, 1, 2, 3}, {0, 1, 2, 3}, {0, 1, 2, 3}};
  double noise_sigma = 0.2;
  std::size_t trials_per_class = 200;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Class-balanced trials ordered 0, 1, ..., n-1, 0, 1, ... Each trial sums
/// unit-amplitude sinusoids with independent random phases at the class
/// frequencies on the class's active channels, plus N(0, noise_sigma) noise
/// on every channel.
Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Holds out round(val_fraction * n_c) trials of every class.
Split stratified_split(const Dataset& data, double val_fraction, std::uint64_t seed);

}  // namespace nakul
