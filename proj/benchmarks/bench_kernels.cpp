#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "semicorr/noise.hpp"
#include "semicorr/phase_space.hpp"
#include "semicorr/rays.hpp"
#include "semicorr/scattering.hpp"
#include "semicorr/semiclassical.hpp"
#include "semicorr/surface_waves.hpp"
#include "semicorr/wave_sim.hpp"

using namespace semicorr;

// Leapfrog step, homogeneous spectral operator; range(0) = N, range(1) = batch.
static void BM_WaveStep(benchmark::State& state) {
  const Grid g{1, static_cast<int>(state.range(0)), 1.0};
  const Medium m = Medium::homogeneous(1, 1.0, 0.5, 1.0);
  WaveSolver s(m, g, cfl_time_step(m, g, 0.25), static_cast<int>(state.range(1)));
  Eigen::MatrixXd f = Eigen::MatrixXd::Random(g.n, state.range(1));
  for (auto _ : state) {
    s.step(f);
    benchmark::DoNotOptimize(s.u().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_WaveStep)->Args({128, 1})->Args({128, 32})->Args({512, 32});

// Variable-speed operator pays three transforms per column.
static void BM_WaveStepHeterogeneous(benchmark::State& state) {
  const Grid g{1, static_cast<int>(state.range(0)), 1.0};
  Eigen::VectorXd n(g.n), a = Eigen::VectorXd::Constant(g.n, 0.5);
  for (int i = 0; i < g.n; ++i) n(i) = 1 + 0.2 * std::cos(2 * M_PI * i / g.n);
  const Medium m = Medium::from_grid(g, n, a);
  WaveSolver s(m, g, cfl_time_step(m, g, 0.25), 32);
  Eigen::MatrixXd f = Eigen::MatrixXd::Random(g.n, 32);
  for (auto _ : state) {
    s.step(f);
    benchmark::DoNotOptimize(s.u().data());
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_WaveStepHeterogeneous)->Arg(128)->Arg(512);

// One time level of forcing for 32 realizations; range(1) = -log10(rank tolerance).
static void BM_NoiseSample(benchmark::State& state) {
  const PhaseSpaceContext ctx(1, static_cast<int>(state.range(0)), 1.0, 0.02);
  const NoiseModel nm(ctx, PowerSpectrum::half_domain(1.0, 0.05, 0.45, 0.02, 1.0, 0.5, 1.0), 1, 1e-3,
                      std::pow(10.0, -static_cast<double>(state.range(1))));
  nm.factor();
  Eigen::MatrixXd out(ctx.n(), 32);
  long t = 0;
  for (auto _ : state) {
    nm.sample_sources(t++, 0, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["rank"] = static_cast<double>(nm.rank());
}
BENCHMARK(BM_NoiseSample)->Args({512, 13})->Args({512, 6});

static void BM_Wigner(benchmark::State& state) {
  const PhaseSpaceContext ctx(1, static_cast<int>(state.range(0)), 1.0, 0.02);
  GridFunction u(ctx);
  u.values = Eigen::VectorXcd::Random(ctx.n());
  for (auto _ : state) benchmark::DoNotOptimize(wigner(u).values.data());
}
BENCHMARK(BM_Wigner)->Arg(64)->Arg(256);

static void BM_RayFlow(benchmark::State& state) {
  const Medium m = Medium::gaussian_lens(2, 1.0, 0.3, 0.5, Eigen::Vector2d(0.5, 0.5), 0.0);
  const PhasePoint z{{0.1, 0.4}, {1.0, 0.2}};
  for (auto _ : state) benchmark::DoNotOptimize(flow(m, z, 2.0, 1e-3).samples.size());
}
BENCHMARK(BM_RayFlow);

static void BM_PiBar(benchmark::State& state) {
  const PhaseSpaceContext ctx(1, static_cast<int>(state.range(0)), 1.0, 0.02);
  const Medium m = Medium::homogeneous(1, 1.0, 5.0, 1.0);
  const NoiseModel nm(ctx, PowerSpectrum::half_domain(1.0, 0.05, 0.45, 0.02, 1.0, 0.5, 1.0), 1, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(pi_bar(m, nm).pi_bar.values.data());
}
BENCHMARK(BM_PiBar)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_SturmLiouville(benchmark::State& state) {
  const DepthProfile p = DepthProfile::layered({1.0, 4.0}, {0.5}, 1.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(sturm_liouville_modes(p, 3.0, 4, static_cast<int>(state.range(0))).values.data());
}
BENCHMARK(BM_SturmLiouville)->Arg(256)->Arg(1024);

// Assembly plus sparse LU of the PML Helmholtz operator, one solve.
static void BM_HelmholtzFactorSolve(benchmark::State& state) {
  const auto setup = HelmholtzSetup::disk(1.0, 0.7, 0.5, Eigen::Vector2d::Zero(), 4.0, 6.0,
                                          static_cast<int>(state.range(0)), 1.6);
  for (auto _ : state) {
    const HelmholtzSolver solver(setup);
    benchmark::DoNotOptimize(solve_scattering(solver, {1.0, 0.0}).far_field.data());
  }
}
BENCHMARK(BM_HelmholtzFactorSolve)->Arg(96)->Arg(192)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
