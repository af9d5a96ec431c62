// Serial reference kernel against the OpenMP kernel on preset scenarios.
//   build/bench/bench_simulator --benchmark_filter=fig3b

#include <benchmark/benchmark.h>

#include <omp.h>

#include "purcellsim/config.hpp"
#include "purcellsim/simulator.hpp"

using namespace purcellsim;

namespace {

SimScenario scenario(const char* name, std::uint64_t cycles) {
  RunConfig c = preset(name);
  c.cycles = cycles;
  return build_scenario(c);
}

void run(benchmark::State& state, const char* name, std::uint64_t cycles, Execution mode) {
  const SimScenario sc = scenario(name, cycles);
  const int threads = mode == Execution::serial ? 1 : int(state.range(0));
  std::size_t events = 0;
  for (auto _ : state) {
    const TimeTagStream s = run_scenario(sc, mode, threads);
    events = s.events.size();
    benchmark::DoNotOptimize(events);
  }
  state.counters["ions"] = double(sc.ions.size());
  state.counters["events"] = double(events);
  state.counters["cycles/s"] = benchmark::Counter(double(cycles) * double(state.iterations()), benchmark::Counter::kIsRate);
}

// Many ions: the ensemble regime.
void BM_fig3b_serial(benchmark::State& s) { run(s, "fig3b", 20000, Execution::serial); }
void BM_fig3b_parallel(benchmark::State& s) { run(s, "fig3b", 20000, Execution::parallel); }
// Few ions, long run: the g2 regime.
void BM_fig3d_serial(benchmark::State& s) { run(s, "fig3d", 2000000, Execution::serial); }
void BM_fig3d_parallel(benchmark::State& s) { run(s, "fig3d", 2000000, Execution::parallel); }

void thread_counts(benchmark::internal::Benchmark* b) {
  for (int t = 1; t <= omp_get_max_threads(); t *= 2) b->Arg(t);
  if (omp_get_max_threads() > 1) b->Arg(omp_get_max_threads());
}

}  // namespace

BENCHMARK(BM_fig3b_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fig3b_parallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_fig3d_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fig3d_parallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
