#include <benchmark/benchmark.h>

#include <random>

#include "sslab/evolve.hpp"
#include "sslab/modulation.hpp"

using namespace sslab;

static void BM_BuildGrid(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(build_grid(n, 3.0));
}
BENCHMARK(BM_BuildGrid)->Arg(64)->Arg(128)->Arg(256);

static void BM_ApplyL(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const GridPtr g = build_grid(n, 3.0);
  const CVec f = kappa_values(*g, 0.3).cast<cplx>();
  for (auto _ : st) benchmark::DoNotOptimize(apply_L(*g, f));
}
BENCHMARK(BM_ApplyL)->Arg(64)->Arg(128)->Arg(256);

static void BM_RK4Step(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const GridPtr g = build_grid(n, 3.0);
  SelfSimilarSystem sys(g);
  const StateField init = explicit_degenerate_solution(0.2, 1e-3, g, 0.0);
  CVec w = init.first, v = init.second;
  const double ds = cfl_bound(*g);
  for (auto _ : st) {
    sys.step(w, v, ds);
    benchmark::DoNotOptimize(w.data());
  }
}
BENCHMARK(BM_RK4Step)->Arg(64)->Arg(128);

static void BM_Modulate(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const GridPtr g = build_grid(n, 3.0);
  const BasisPtr b = build_eigenbasis(g, 30);
  std::mt19937_64 rng(1);
  StateField pert = random_smooth_state(*b, rng);
  pert = (1e-3 / norms(pert).H) * pert;
  const StateField v = StateField(g, kappa_values(*g, 0.3).cast<cplx>(), CVec::Zero(n)) + pert;
  for (auto _ : st) benchmark::DoNotOptimize(modulate(v, 0.3, 0.0));
}
BENCHMARK(BM_Modulate)->Arg(64)->Arg(128);

BENCHMARK_MAIN();
