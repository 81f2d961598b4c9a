// Serial vs OpenMP campaign throughput. On a single core the two should match;
// with more cores the parallel variant scales with the number of runs.
#include "dqnmpc/harness.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

using namespace dqnmpc;

namespace {

ExecPolicy policy(const benchmark::State& st) { return st.range(0) == 0 ? ExecPolicy::serial : ExecPolicy::parallel; }

void label(benchmark::State& st) {
  st.SetLabel(st.range(0) == 0 ? "serial" : "omp x" + std::to_string(omp_get_max_threads()));
}

void BM_regulation_campaign(benchmark::State& st) {
  ExperimentConfig cfg;
  cfg.n_samples = 4;
  cfg.sim_duration = 1.0;
  for (auto _ : st) benchmark::DoNotOptimize(run_regulation_all(cfg, policy(st)));
  st.SetItemsProcessed(st.iterations() * 2 * cfg.n_samples);
  label(st);
}

void BM_tracking_campaign(benchmark::State& st) {
  ExperimentConfig cfg;
  cfg.trajectory.duration = 0.5;
  cfg.tracking_runs = 1;
  for (auto _ : st) benchmark::DoNotOptimize(run_tracking_all(cfg, policy(st)));
  st.SetItemsProcessed(st.iterations() * 2 * static_cast<long>(cfg.scenarios.size()));
  label(st);
}

void BM_iteration_study(benchmark::State& st) {
  ExperimentConfig cfg;
  cfg.n_iteration_study = 4;
  const auto poses = sample_large_errors(cfg);
  const auto c = st.range(1) == 0 ? ControllerKind::dq : ControllerKind::baseline;
  for (auto _ : st) benchmark::DoNotOptimize(iteration_study(cfg, c, poses, policy(st)));
  st.SetItemsProcessed(st.iterations() * cfg.n_iteration_study);
  label(st);
}

}  // namespace

BENCHMARK(BM_regulation_campaign)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_tracking_campaign)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_iteration_study)->Args({0, 0})->Args({1, 0})->Args({0, 1})->Args({1, 1})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
