#include <benchmark/benchmark.h>

#include <vector>

#include "pprm/bounds.hpp"
#include "pprm/harness.hpp"
#include "pprm/rng.hpp"

namespace {

void BM_MixtureIntegral(benchmark::State& state) {
  const pprm::ConfidenceSequenceSpec spec;
  for (auto _ : state) benchmark::DoNotOptimize(pprm::mixture_integral(3.0, 20.0, spec));
}
BENCHMARK(BM_MixtureIntegral);

void BM_RadiusCold(benchmark::State& state) {
  const pprm::ConfidenceSequenceSpec spec;
  const double v = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(pprm::cm_eb_radius(v, spec));
}
BENCHMARK(BM_RadiusCold)->Arg(0)->Arg(10)->Arg(1000);

// Per-step cost inside a monitor: the boundary is built once and each
// solve is warm-started from the previous radius.
void BM_RadiusWarm(benchmark::State& state) {
  const pprm::MixtureBoundary boundary{pprm::ConfidenceSequenceSpec{}};
  double v = 1.0;
  double hint = 0.0;
  for (auto _ : state) {
    hint = boundary.radius(v, hint);
    v += 0.05;
    benchmark::DoNotOptimize(hint);
  }
}
BENCHMARK(BM_RadiusWarm);

void BM_BettingUpperBound(benchmark::State& state) {
  pprm::Xoshiro256 rng(1);
  std::vector<double> xs(static_cast<std::size_t>(state.range(0)));
  for (double& x : xs) x = rng.uniform();
  const pprm::BettingSpec spec;
  for (auto _ : state) benchmark::DoNotOptimize(pprm::betting_upper_bound(xs, {0.0, 1.0}, spec));
}
BENCHMARK(BM_BettingUpperBound)->Arg(100)->Arg(500)->Arg(2000);

void BM_Replication(benchmark::State& state) {
  pprm::ExperimentPlan plan;
  plan.scenario.horizon = 1000;
  plan.replications = 1;
  plan.threads = 1;
  plan.methods = {pprm::Method::PPRM_adaptive};
  for (auto _ : state) benchmark::DoNotOptimize(pprm::run_experiment(plan));
}
BENCHMARK(BM_Replication)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
