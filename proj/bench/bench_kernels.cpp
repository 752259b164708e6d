#include <benchmark/benchmark.h>

#include <cmath>

#include "potkit/envelope.hpp"
#include "potkit/solve.hpp"

namespace {

using namespace potkit;

// Obstacle min(u, 1/2) for the unit-disk atom potential.
void run_reduite(benchmark::State& state, bool parallel) {
  const Domain disk = Domain::ball(Point{0.0, 0.0}, 1.0);
  const auto grid = make_grid(disk, std::ldexp(1.0, -static_cast<int>(state.range(0))));
  const auto dop = assemble(OperatorSpec::laplacian(), grid);
  const auto u = integral_solution(OperatorSpec::laplacian(), disk, MeasureData::dirac(Point{0.0, 0.0})).on_grid(grid);
  GridField g = cap_infinite(u).values;
  for (auto& v : g.values()) v = std::min(v, 0.5);
  ReduiteOptions opt;
  opt.parallel = parallel;
  opt.polish = false;
  opt.tol = 1e-8;
  for (auto _ : state) {
    const auto r = reduite(dop, g, opt);
    benchmark::DoNotOptimize(r.envelope.values().data());
  }
  state.counters["nodes"] = static_cast<double>(g.size());
}

void BM_ReduiteSerial(benchmark::State& state) { run_reduite(state, false); }
void BM_ReduiteColored(benchmark::State& state) { run_reduite(state, true); }

}  // namespace

BENCHMARK(BM_ReduiteSerial)->DenseRange(5, 7)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReduiteColored)->DenseRange(5, 7)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
