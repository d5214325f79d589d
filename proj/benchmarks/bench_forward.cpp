// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// Forward-pass scaling in the patch count, plus the FFT pair and the spectral
// branch on their own.

#include <benchmark/benchmark.h>

#include "nakul/config.hpp"
#include "nakul/fft.hpp"
#include "nakul/model.hpp"
#include "nakul/spectral.hpp"

using namespace nakul;

namespace {

RunConfig bench_config() {
  RunConfig rc;
  rc.model.dim = 32;
  rc.model.blocks = 2;
  rc.model.ffn_hidden = 128;
  rc.model.heads = 4;
  rc.finalize();
  return rc;
}

Tensor random_input(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor x(std::move(s));
  for (auto& v : x.data()) v = rng.normal();
  return x;
}

void BM_ModelForward(benchmark::State& state) {
  const RunConfig rc = bench_config();
  ModelConfig mc = rc.model;
  mc.length = std::size_t(state.range(0)) * mc.patch;
  NakulModel model(mc, 0);
  const auto g = make_graph(rc);
  const Tensor x = random_input({1, mc.channels, mc.length}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(model.logits(x, g));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ModelForward)->RangeMultiplier(2)->Range(128, 2048)->Unit(benchmark::kMillisecond)->Complexity();

void BM_RfftPair(benchmark::State& state) {
  const auto T = std::size_t(state.range(0));
  const std::size_t D = 32;
  const Tensor x = random_input({T, D}, 2);
  std::vector<double> re(rfft_bins(T) * D), im(re.size()), y(T * D);
  for (auto _ : state) {
    rfft_batch(x.ptr(), 1, T, D, re.data(), im.data());
    irfft_batch(re.data(), im.data(), 1, T, D, y.data());
    benchmark::DoNotOptimize(y.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RfftPair)->RangeMultiplier(2)->Range(64, 4096)->Complexity(benchmark::oNLogN);

void BM_SpectralBranch(benchmark::State& state) {
  const auto T = std::size_t(state.range(0));
  spectral::SpectralConfig cfg;
  cfg.sample_rate = 5.0;
  cfg.frequency_scale = 1.0 / 50.0;
  Rng rng(3);
  spectral::SpectralBranch branch(32, cfg, rng);
  const Tensor x = random_input({8, T, 32}, 4);
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(branch.forward(tape, tape.constant(x)).value());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SpectralBranch)->RangeMultiplier(2)->Range(128, 2048)->Unit(benchmark::kMillisecond)->Complexity();

}  // namespace

int main(int argc, char** argv) {
  retain_freed_memory();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
