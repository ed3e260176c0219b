#include <benchmark/benchmark.h>

#include <kylelab/bsde.hpp>
#include <kylelab/fbsde.hpp>
#include <kylelab/hamiltonian.hpp>
#include <kylelab/rng.hpp>
#include <kylelab/simulate.hpp>

using namespace kylelab;

namespace {

MarketModel canonical(double T = 0.25) {
  MarketModel m;
  m.num_types = 2;
  m.values = {1, -1};
  m.prior = {0.5, 0.5};
  m.horizon = T;
  return m;
}

CostSpec table() {
  CostSpec c;
  c.variant = CostVariant::Tabulated;
  c.table_theta = {-1, -0.5, 0, 0.5, 1};
  c.table_cost = {0.5, 0.125, 0, 0.125, 0.5};
  return c;
}

void BM_HamiltonianSqrt(benchmark::State& st) {
  const Hamiltonian H(canonical());
  double z = -3;
  for (auto _ : st) {
    benchmark::DoNotOptimize(H.eval(z));
    z = z > 3 ? -3 : z + 1e-3;
  }
}
BENCHMARK(BM_HamiltonianSqrt);

void BM_HamiltonianTabulated(benchmark::State& st) {
  const Hamiltonian H(table(), 1.0);
  double z = -3;
  for (auto _ : st) {
    benchmark::DoNotOptimize(H.eval(z));
    z = z > 3 ? -3 : z + 1e-3;
  }
}
BENCHMARK(BM_HamiltonianTabulated);

void BM_SubstreamNormal(benchmark::State& st) {
  Substream s(42, 0, 0);
  for (auto _ : st) benchmark::DoNotOptimize(s.normal());
}
BENCHMARK(BM_SubstreamNormal);

void BM_GenPaths(benchmark::State& st) {
  const int paths = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(gen_paths(paths, 64, 1.0, 42).dB.data());
  st.SetItemsProcessed(st.iterations() * paths * 64);
}
BENCHMARK(BM_GenPaths)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_FilterExact(benchmark::State& st) {
  const MarketModel m = canonical(1.0);
  const PathBundle b = gen_paths(static_cast<int>(st.range(0)), 64, 1.0, 42);
  const StrategyFn s = constant_strategy({1, -1});
  for (auto _ : st) benchmark::DoNotOptimize(filter_exact(m, s, b).P.data());
  st.SetItemsProcessed(st.iterations() * b.num_paths * 64);
}
BENCHMARK(BM_FilterExact)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_FilterSde(benchmark::State& st) {
  const MarketModel m = canonical(1.0);
  const PathBundle b = gen_paths(static_cast<int>(st.range(0)), 64, 1.0, 42);
  const StrategyFn s = constant_strategy({1, -1});
  for (auto _ : st) benchmark::DoNotOptimize(filter_sde(m, s, b).P.data());
  st.SetItemsProcessed(st.iterations() * b.num_paths * 64);
}
BENCHMARK(BM_FilterSde)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_GridBsde(benchmark::State& st) {
  const MarketModel m = canonical();
  const Hamiltonian H(m);
  GridSolveOptions o;
  o.num_steps = 64;
  o.interior_per_dim = static_cast<int>(st.range(0));
  o.threads = 1;
  for (auto _ : st) benchmark::DoNotOptimize(bsde_solve_grid(m, H, market_price(m), o).u.data());
}
BENCHMARK(BM_GridBsde)->Arg(51)->Arg(201)->Unit(benchmark::kMillisecond);

void BM_SolveCanonical(benchmark::State& st) {
  const MarketModel m = canonical();
  Discretization d;
  d.num_steps = 64;
  d.simplex_grid = 201;
  FbsdeOptions o;
  o.sample_paths = 0;
  o.threads = 1;
  for (auto _ : st) benchmark::DoNotOptimize(solve_fbsde(m, d, {}, o).Y0.data());
}
BENCHMARK(BM_SolveCanonical)->Unit(benchmark::kMillisecond);

void BM_RegressBsde(benchmark::State& st) {
  const MarketModel m = canonical();
  const Hamiltonian H(m);
  const PathBundle b = gen_paths(static_cast<int>(st.range(0)), 32, m.horizon, 42);
  const FilterPaths f = filter_exact(m, constant_strategy({0.7, -0.7}), b);
  for (auto _ : st) benchmark::DoNotOptimize(bsde_solve_regress(m, H, f, b, 3, 1).Y0.data());
}
BENCHMARK(BM_RegressBsde)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
