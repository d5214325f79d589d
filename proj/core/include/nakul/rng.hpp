// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nakul {

/// Deterministic pseudo-random source. All randomness in the library comes
/// from instances of this class; none of it touches global state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Independent stream derived from (seed, name). Streams with different
  /// names never share state, so adding a consumer on one stream does not
  /// shift the values seen by another.
  static Rng stream(std::uint64_t seed, std::string_view name);

  double uniform(double lo = 0.0, double hi = 1.0);
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p);
  /// Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi);
  std::uint64_t next() { return engine_(); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace nakul
