#include <benchmark/benchmark.h>

#include "dais/blr.hpp"
#include "dais/harness.hpp"
#include "dais/reversible.hpp"
#include "dais/sampler.hpp"

namespace {

void BM_Leapfrog(benchmark::State& state) {
  const auto d = static_cast<dais::Index>(state.range(0));
  const auto model = dais::gen_blr_data(1000, d, 1);
  const auto target = dais::blr_target(model);
  dais::Rng rng(2);
  dais::Vector theta = rng.normal_vector(d), v = rng.normal_vector(d);
  const dais::TransitionConfig config;
  for (auto _ : state) {
    auto r = dais::leapfrog(theta, v, 0.05, 0.5, *target, config);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_Leapfrog)->Arg(10)->Arg(100);

void BM_PropagateMoments(benchmark::State& state) {
  const auto K = static_cast<std::size_t>(state.range(0));
  const auto model = dais::gen_blr_data(1000, 10, 1);
  const auto schedule = dais::make_linear_schedule(K);
  const auto steps = dais::make_stepsize_scheme(0.4, 0.25, K);
  for (auto _ : state) {
    auto path = dais::propagate_moments(model, schedule, steps, dais::TransitionConfig(0.5));
    benchmark::DoNotOptimize(path);
  }
}
BENCHMARK(BM_PropagateMoments)->Arg(64)->Arg(1024);

void BM_ReversibleRoundTrip(benchmark::State& state) {
  const std::size_t K = 1000;
  const auto model = dais::gen_blr_data(1000, 10, 3);
  const auto target = dais::blr_target(model);
  const auto schedule = dais::make_linear_schedule(K);
  const auto steps = dais::StepSizeScheme::constant(0.1, K);
  const dais::TransitionConfig config(0.9);
  for (auto _ : state) {
    auto fwd = dais::reversible_forward(*target, schedule, steps, config, dais::SeedState{7});
    auto back = dais::reversible_backward(*target, schedule, steps, config, fwd.state,
                                          fwd.buffer);
    benchmark::DoNotOptimize(back);
  }
}
BENCHMARK(BM_ReversibleRoundTrip)->Unit(benchmark::kMillisecond);

void BM_BoundMonteCarlo(benchmark::State& state) {
  const std::size_t K = 64;
  const auto model = dais::gen_blr_data(1000, 10, 1);
  const auto target = dais::blr_target(model);
  for (auto _ : state) {
    auto est = dais::dais_bound_mc(*target, dais::make_linear_schedule(K),
                                   dais::StepSizeScheme::constant(0.2, K),
                                   dais::TransitionConfig(0.0), 100, dais::Rng(5), 1);
    benchmark::DoNotOptimize(est);
  }
}
BENCHMARK(BM_BoundMonteCarlo)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
