#include <benchmark/benchmark.h>

#include <cmath>

#include "rkhs/concentration.hpp"
#include "rkhs/leastsq.hpp"
#include "rkhs/sampling_density.hpp"
#include "rkhs/worst_case.hpp"

using namespace rkhs;

namespace {

SpectralKernelModel fourier(std::size_t N) {
  return {Basis(BasisKind::Fourier), EigenvalueRule::polynomial(1.0), 0.0, Truncation{N, INFINITY}};
}

void BM_DrawNodes(benchmark::State& state) {
  const SpectralKernelModel model(Basis(BasisKind::Cosine), EigenvalueRule::sobolev(1.0));
  const SamplingDensity rho(model, DensityKind::Spectral, 8);
  std::uint64_t stream = 0;
  for (auto _ : state) benchmark::DoNotOptimize(draw_nodes(rho, static_cast<std::size_t>(state.range(0)), 1, stream++));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DrawNodes)->Arg(1000)->Arg(10000);

void BM_AssembleDesign(benchmark::State& state) {
  const auto model = fourier(256);
  const SamplingDensity rho(model, DensityKind::Plain);
  const NodeSet X = draw_nodes(rho, static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_design(model, rho, X, static_cast<std::size_t>(state.range(1))));
}
BENCHMARK(BM_AssembleDesign)->Args({1000, 5})->Args({2000, 40})->Args({10000, 100});

void BM_Recover(benchmark::State& state) {
  const auto model = fourier(256);
  const SamplingDensity rho(model, DensityKind::Plain);
  const std::size_t n = 2000;
  const NodeSet X = draw_nodes(rho, n, 1);
  const DesignSystem ds = assemble_design(model, rho, X, static_cast<std::size_t>(state.range(0)));
  const VectorXc f = VectorXc::Ones(static_cast<Eigen::Index>(n));
  SolveOptions opts;
  opts.solver = state.range(1) ? Solver::LSQR : Solver::QR;
  for (auto _ : state) benchmark::DoNotOptimize(recover(ds, f, opts));
}
BENCHMARK(BM_Recover)->Args({40, 0})->Args({40, 1})->Args({200, 0})->Args({200, 1});

void BM_WceRecovery(benchmark::State& state) {
  const auto N = static_cast<std::size_t>(state.range(0));
  const auto model = fourier(N);
  const SamplingDensity rho(model, DensityKind::Spectral, 5);
  const NodeSet X = draw_nodes(rho, 1000, 1);
  const DesignSystem ds = assemble_design(model, rho, X, 5);
  const auto method = state.range(1) ? WceMethod::Secular : WceMethod::Dense;
  for (auto _ : state) benchmark::DoNotOptimize(exact_wce_recovery(model, ds, X, N, method));
}
BENCHMARK(BM_WceRecovery)->Args({128, 0})->Args({128, 1})->Args({1024, 1})->Args({4096, 1});

void BM_WceDiscretization(benchmark::State& state) {
  const SpectralKernelModel model(Basis(BasisKind::Cosine), EigenvalueRule::sobolev(1.0), 0.0,
                                  Truncation{static_cast<std::size_t>(state.range(0)), INFINITY});
  const SamplingDensity rho(model, DensityKind::Plain);
  const NodeSet X = draw_nodes(rho, 5000, 1);
  for (auto _ : state) benchmark::DoNotOptimize(exact_wce_discretization(model, X, model.truncation().index, false));
}
BENCHMARK(BM_WceDiscretization)->Arg(64)->Arg(256);

void BM_DeviationTrial(benchmark::State& state) {
  TailExperiment e;
  e.family = VectorFamily::TwoPoint;
  e.radius = 0.7;
  e.n = static_cast<std::size_t>(state.range(0));
  std::uint64_t trial = 0;
  for (auto _ : state) benchmark::DoNotOptimize(deviation_trial(e, trial++));
}
BENCHMARK(BM_DeviationTrial)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
