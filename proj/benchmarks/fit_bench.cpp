#include <benchmark/benchmark.h>

#include "elfuse/elfusion.hpp"
#include "elfuse/inference.hpp"
#include "elfuse/mnlogit.hpp"
#include "elfuse/simengine.hpp"

namespace {

using namespace elfuse;

struct Fixture {
  ScenarioConfig config = ScenarioConfig::reference(ShiftSpec::Kind::none, false);
  ReplicateData replicate = generate_replicate(config, 0);
  FusionProblem problem = FusionProblem::make(replicate.primary, replicate.predictions, config.map,
                                              config.basis_set(), config.layout);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_FitMle(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(fit_mle(f.replicate.primary));
}
BENCHMARK(BM_FitMle)->Unit(benchmark::kMicrosecond);

void BM_FitFmle(benchmark::State& state) {
  const auto& f = fixture();
  FmleOptions opt;
  opt.tau = f.config.tau;
  for (auto _ : state) benchmark::DoNotOptimize(fit_fmle(f.problem, opt));
}
BENCHMARK(BM_FitFmle)->Unit(benchmark::kMicrosecond);

void BM_SolveLambda(benchmark::State& state) {
  const auto& f = fixture();
  const MleFit mle = fit_mle(f.replicate.primary);
  const Matrix g = moment_matrix(f.problem, mle.theta_hat, f.problem.layout.free_part(mle.theta_hat));
  for (auto _ : state) benchmark::DoNotOptimize(solve_lambda(g, f.config.tau));
}
BENCHMARK(BM_SolveLambda)->Unit(benchmark::kMicrosecond);

void BM_Bootstrap(benchmark::State& state) {
  const auto& f = fixture();
  BootstrapOptions opt;
  opt.B = static_cast<int>(state.range(0));
  opt.seed = 1;
  opt.fit.tau = f.config.tau;
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_se(f.problem, opt));
}
BENCHMARK(BM_Bootstrap)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_GenerateReplicate(benchmark::State& state) {
  const auto& f = fixture();
  int rep = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_replicate(f.config, rep++));
}
BENCHMARK(BM_GenerateReplicate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
