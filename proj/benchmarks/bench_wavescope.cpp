#include <benchmark/benchmark.h>

#include "wavescope/cae.hpp"
#include "wavescope/ocsvm.hpp"
#include "wavescope/rng.hpp"
#include "wavescope/scalogram.hpp"
#include "wavescope/subspace.hpp"
#include "wavescope/wavegen.hpp"

using namespace wavescope;

namespace {

TimeSeriesRecord desk_record(std::uint64_t seed) {
  const GenerationConfig cfg;
  return synth_baseline(cfg.packets, cfg.noise_snr_db, cfg.sample_rate, cfg.duration, seed);
}

Eigen::MatrixXd gaussians(int n, int d, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = rng.next_gaussian();
  return X;
}

void CwtDeskRecord(benchmark::State& state) {
  const TimeSeriesRecord rec = desk_record(1);
  const WaveletParams wp =
      WaveletParams::defaults_for(rec.sample_rate, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto cm = cwt(rec, wp);
    benchmark::DoNotOptimize(cm.values.data());
  }
}
BENCHMARK(CwtDeskRecord)->Arg(16)->Arg(64);

void ScalogramToImage(benchmark::State& state) {
  const TimeSeriesRecord rec = desk_record(2);
  const CoefficientMatrix cm = cwt(rec, WaveletParams::defaults_for(rec.sample_rate));
  for (auto _ : state) {
    auto img = to_image(cm, 64, 64, 1);
    benchmark::DoNotOptimize(img.pixels.data());
  }
}
BENCHMARK(ScalogramToImage);

void PcaFitFlattenedImages(benchmark::State& state) {
  const Eigen::MatrixXd X = gaussians(static_cast<int>(state.range(0)), 4096, 3);
  for (auto _ : state) {
    auto model = pca_fit(X, 3);
    benchmark::DoNotOptimize(model.eigenvalues.data());
  }
}
BENCHMARK(PcaFitFlattenedImages)->Arg(100)->Arg(400);

void FastIcaFit(benchmark::State& state) {
  const Eigen::MatrixXd X = gaussians(static_cast<int>(state.range(0)), 4096, 4);
  for (auto _ : state) {
    auto model = fastica_fit(X, 3, 1e-4, 50, 1);
    benchmark::DoNotOptimize(model.unmixing.data());
  }
}
BENCHMARK(FastIcaFit)->Arg(200);

void OcsvmFit(benchmark::State& state) {
  const Eigen::MatrixXd X = gaussians(static_cast<int>(state.range(0)), 3, 5);
  const KernelSpec kernel{default_rbf_gamma(X)};
  for (auto _ : state) {
    auto model = ocsvm_fit(X, 0.1, kernel);
    benchmark::DoNotOptimize(model.alphas.data());
  }
}
BENCHMARK(OcsvmFit)->Arg(200)->Arg(800);

void CaeTrainStep(benchmark::State& state) {
  CaeModel model = build_cae(desk_preset(), 7);
  OptimizerState opt = make_adam(model);
  Tensor4 batch(static_cast<int>(state.range(0)), 64, 64, 1);
  SplitMix64 rng(11);
  for (auto& x : batch.v) x = rng.next_double();
  for (auto _ : state) {
    benchmark::DoNotOptimize(backward_and_step(model, batch, opt));
  }
}
BENCHMARK(CaeTrainStep)->Arg(8)->Arg(32);

void CaeInference(benchmark::State& state) {
  const CaeModel model = build_cae(desk_preset(), 9);
  Tensor4 batch(32, 64, 64, 1);
  SplitMix64 rng(13);
  for (auto& x : batch.v) x = rng.next_double();
  for (auto _ : state) {
    auto out = forward_infer(model, batch);
    benchmark::DoNotOptimize(out.reconstruction.v.data());
  }
}
BENCHMARK(CaeInference);

} // namespace

BENCHMARK_MAIN();
