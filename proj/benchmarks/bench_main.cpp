#include <benchmark/benchmark.h>

#include <random>

#include "keymotion/denoiser.hpp"
#include "keymotion/diffusion.hpp"
#include "keymotion/implicit.hpp"

namespace keymotion {
namespace {

DenoiserModel KeyjointModel() {
  DenoiserArchitecture arch;  // default keyjoint-stage shape
  DenoiserModel model(arch, 1);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 0.05);
  for (Eigen::Index i = 0; i < model.parameter_count(); ++i) model.mutable_parameters()[i] += g(rng);
  return model;
}

Matrix RandomInputs(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  return Matrix::NullaryExpr(rows, cols, [&] { return g(rng); });
}

void BM_DenoiserForward(benchmark::State& state) {
  const DenoiserModel model = KeyjointModel();
  const int batch = static_cast<int>(state.range(0));
  const Matrix inputs = RandomInputs(60 * batch, 38, 3);
  const std::vector<Conditioning> cond(static_cast<std::size_t>(batch), Conditioning{25, 0, 1.0});
  for (auto _ : state) {
    DenoiserTape tape(model, inputs, 60, cond);
    benchmark::DoNotOptimize(tape.output().data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenoiserForward)->Arg(1)->Arg(2)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_DenoiserForwardBackward(benchmark::State& state) {
  const DenoiserModel model = KeyjointModel();
  const int batch = static_cast<int>(state.range(0));
  const Matrix inputs = RandomInputs(60 * batch, 38, 3);
  const Matrix grad = RandomInputs(60 * batch, 19, 4);
  const std::vector<Conditioning> cond(static_cast<std::size_t>(batch), Conditioning{25, 0, 1.0});
  Vector param_grad = Vector::Zero(model.parameter_count());
  for (auto _ : state) {
    DenoiserTape tape(model, inputs, 60, cond);
    benchmark::DoNotOptimize(tape.Backward(grad, &param_grad, false).data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenoiserForwardBackward)->Arg(32)->Unit(benchmark::kMillisecond);

// Argument 0 is the 50-step DDPM chain, otherwise the DDIM step count.
void BM_SampleKeyjoints(benchmark::State& state) {
  const DenoiserModel model = KeyjointModel();
  const NoiseSchedule schedule = BuildSchedule(50, 1e-4, 0.2);
  SampleRequest request;
  request.label = 0;
  request.sampler = state.range(0) == 0 ? SamplerSpec::Ddpm() : SamplerSpec::Ddim(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Sample(model, request, schedule).data());
}
BENCHMARK(BM_SampleKeyjoints)->Arg(0)->Arg(10)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_DdimChainBackward(benchmark::State& state) {
  const DenoiserModel model = KeyjointModel();
  const NoiseSchedule schedule = BuildSchedule(50, 1e-4, 0.2);
  const auto predict = MakeDifferentiablePredictor(model, StageKind::kKeyjoint, 0, 2.0, 1.0);
  const Matrix latent = InitialNoise(60, 19, 5);
  const Matrix grad = RandomInputs(60, 19, 6);
  for (auto _ : state) {
    DdimChain chain(predict, latent, schedule, 10);
    benchmark::DoNotOptimize(chain.Backward(grad).data());
  }
}
BENCHMARK(BM_DdimChainBackward)->Unit(benchmark::kMillisecond);

void BM_AlignmentLoss(benchmark::State& state) {
  TargetPath path;
  path.keyjoint = 0;
  path.t0 = 0;
  path.t1 = 59;
  path.points = Matrix(100, 3);
  for (int i = 0; i < 100; ++i) {
    const double u = 1.5707963267948966 * i / 99.0;
    path.points.row(i) << 1.5 * (1 - std::cos(u)), 0.9, 1.5 * std::sin(u);
  }
  Matrix c = RandomInputs(60, 19, 7) * 0.1;
  for (int n = 0; n < 60; ++n) c(n, 2) += 0.04 * n;
  for (auto _ : state) benchmark::DoNotOptimize(AlignmentLoss(c, path, 1.0).loss);
}
BENCHMARK(BM_AlignmentLoss)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace keymotion

BENCHMARK_MAIN();
