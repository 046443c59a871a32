// Apache License, Version 2.0, refer to LICENSE.txt

#include <benchmark/benchmark.h>

#include "cam/gibbs_sampler.hpp"
#include "cam/scenarios.hpp"
#include "cam/slice_sampler.hpp"
#include "cam/summary.hpp"

namespace {

// Range argument selects the data: 2 for scenario 2 (r = 5), 3 for scenario 3 (n3 = 30).
cam::Dataset bench_data(long which) {
  return which == 2 ? cam::gen_scenario2(5, 1).data : cam::gen_scenario3(30, 1).data;
}

void BM_SliceSweep(benchmark::State& st) {
  const cam::Dataset d = bench_data(st.range(0));
  cam::SliceSampler s(d, cam::default_hyperparameters(d), cam::SliceConfig{}, cam::RngStream(1));
  for (int t = 0; t < 200; ++t) s.sweep();
  for (auto _ : st) s.sweep();
  st.counters["obs"] = static_cast<double>(d.num_observations());
  st.counters["K_active"] = s.state().K_active;
  st.counters["L_active"] = s.state().L_active;
}
BENCHMARK(BM_SliceSweep)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_GibbsSweep(benchmark::State& st) {
  const cam::Dataset d = bench_data(st.range(0));
  cam::GibbsConfig cfg;
  cam::GibbsSampler g(d, cam::default_hyperparameters(d), cfg, cam::RngStream(1));
  for (int t = 0; t < 200; ++t) g.sweep();
  for (auto _ : st) g.sweep();
  st.counters["obs"] = static_cast<double>(d.num_observations());
}
BENCHMARK(BM_GibbsSweep)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_Coclustering(benchmark::State& st) {
  const cam::Dataset d = bench_data(2);
  cam::SliceConfig cfg;
  cfg.iters = 1000;
  cfg.burnin = 100;
  const cam::DrawStore store = cam::run_chain(d, cam::default_hyperparameters(d), cfg);
  for (auto _ : st) {
    benchmark::DoNotOptimize(cam::coclustering(store, cam::ClusterLevel::observational).matrix.data());
  }
}
BENCHMARK(BM_Coclustering)->Unit(benchmark::kMillisecond);

void BM_ViSearch(benchmark::State& st) {
  const cam::Dataset d = bench_data(2);
  cam::SliceConfig cfg;
  cfg.iters = 1000;
  cfg.burnin = 100;
  const cam::DrawStore store = cam::run_chain(d, cam::default_hyperparameters(d), cfg);
  const auto ccm = cam::coclustering(store, cam::ClusterLevel::observational).matrix;
  const auto cands = cam::sampled_partitions(store, cam::ClusterLevel::observational);
  cam::ViSearchOptions opt;
  opt.max_sampled = 200;
  for (auto _ : st) benchmark::DoNotOptimize(cam::minimize_expected_vi(ccm, cands, opt).loss);
}
BENCHMARK(BM_ViSearch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
