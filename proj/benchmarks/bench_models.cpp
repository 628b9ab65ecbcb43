#include <cmath>

#include <benchmark/benchmark.h>

#include "redsim/des.hpp"
#include "redsim/fluid.hpp"
#include "redsim/hybrid.hpp"
#include "redsim/moments.hpp"
#include "redsim/red.hpp"
#include "redsim/scenario.hpp"
#include "redsim/surrogate.hpp"

using namespace redsim;

static void BM_DropProbability(benchmark::State& state) {
  const RedParams red{};
  double q = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(drop_probability(q, red));
    q += 0.001;
    if (q > 30.0) q = 0.0;
  }
}
BENCHMARK(BM_DropProbability);

static void BM_DesReference(benchmark::State& state) {
  const auto cfg = reference_scenario().des_config(static_cast<double>(state.range(0)), 1, 0.1);
  std::uint64_t events = 0;
  for (auto _ : state) {
    const auto r = des::simulate_dumbbell(cfg);
    events += r.events_processed;
    benchmark::DoNotOptimize(r.summary.sent);
  }
  state.counters["events/s"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_DesReference)->Arg(10)->Arg(60)->Unit(benchmark::kMillisecond);

static void BM_LangevinEnsemble(benchmark::State& state) {
  auto p = reference_scenario().fluid_params();
  p.n_flows = 1;
  fluid::EnsembleOptions opt;
  opt.t_end = 10.0;
  opt.n_paths = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fluid::simulate_paths(p, {}, opt).stats.size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LangevinEnsemble)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_MomentFixedPoint(benchmark::State& state) {
  auto p = reference_scenario().fluid_params();
  p.n_flows = 1;
  for (auto _ : state) benchmark::DoNotOptimize(moments::fixed_point(p).Q);
}
BENCHMARK(BM_MomentFixedPoint);

static void BM_Hybrid300s(benchmark::State& state) {
  auto hp = reference_scenario().hybrid_params();
  hp.fluid.n_flows = 1;
  for (auto _ : state) benchmark::DoNotOptimize(hybrid::simulate_hybrid(hp, {}, 300.0, 1e-3, 7).loss_events);
}
BENCHMARK(BM_Hybrid300s)->Unit(benchmark::kMillisecond);

static void BM_RbfFit(benchmark::State& state) {
  const surrogate::ParameterBox box({{"p_max", 0.05, 0.2}, {"q_min", 3.0, 7.0}}, reference_scenario());
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto pts = surrogate::sample_plan(box, n, 3);
  surrogate::Dataset data;
  data.dim_names = box.names();
  data.response_names = {"y"};
  for (const auto& x : pts) {
    data.points.push_back(x);
    data.responses.push_back({std::sin(20.0 * x[0]) + x[1] * x[1]});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(surrogate::fit(box, data, surrogate::Kind::RbfGaussian).responses.size());
  }
}
BENCHMARK(BM_RbfFit)->Arg(20)->Arg(40)->Arg(80)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
