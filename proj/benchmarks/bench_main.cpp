#include <benchmark/benchmark.h>

#include <vector>

#include "spectrapad/ensemble.hpp"
#include "spectrapad/metrics.hpp"
#include "spectrapad/rng.hpp"
#include "spectrapad/vit_encoder.hpp"

using namespace spectrapad;

static void BM_EncoderForward(benchmark::State& state) {
  ViTConfig vc;  // default encoder: 32x32, d=64, depth 4
  const ViTParams p = ViTParams::create(vc, BandSet::all(), 1);
  Rng rng(2);
  ModelInput in;
  in.side = vc.image_side;
  for (int i = 0; i < 3 * vc.image_side * vc.image_side; ++i) in.data.push_back(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(encode(patch_embed(in, p), p, SpectralBand::k850));
}
BENCHMARK(BM_EncoderForward)->Unit(benchmark::kMicrosecond);

static void BM_Fuse(benchmark::State& state) {
  Rng rng(3);
  PerBand<std::optional<double>> acc{};
  BandProbs probs{};
  for (std::size_t k = 0; k < kNumBands; ++k) {
    acc[k] = rng.uniform();
    const double a = rng.uniform();
    probs[k] = Prob2{1.0 - a, a};
  }
  const EnsembleWeights w = band_weights(acc);
  for (auto _ : state) benchmark::DoNotOptimize(fuse(probs, w, BandSet::all()));
}
BENCHMARK(BM_Fuse);

static void BM_DEer(benchmark::State& state) {
  Rng rng(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> bona(n), attack(n);
  for (auto& s : bona) s = rng.uniform(0.3, 1.0);
  for (auto& s : attack) s = rng.uniform(0.0, 0.7);
  for (auto _ : state) benchmark::DoNotOptimize(d_eer(bona, attack));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DEer)->Range(64, 8192)->Complexity();
BENCHMARK_MAIN();
