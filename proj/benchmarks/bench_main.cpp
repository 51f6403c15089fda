#include <memory>
#include <string>

#include <benchmark/benchmark.h>

#include "qedlab/experiment.hpp"

using namespace qedlab;

namespace {

const ExperimentConfig& canonical() {
  static const ExperimentConfig cfg = load_config(std::string(QEDLAB_CONFIG_DIR) + "/canonical_k2.json");
  return cfg;
}

void BM_HjbSolve(benchmark::State& state) {
  auto cfg = canonical();
  cfg.grid.points_per_axis = static_cast<std::size_t>(state.range(0));
  const auto co = diffusion_coeffs(cfg.limits);
  for (auto _ : state) {
    auto vg = solve_hjb(cfg.grid, cfg.cost, co, cfg.limits);
    benchmark::DoNotOptimize(vg);
  }
  state.SetComplexityN(state.range(0) * state.range(0));
}
BENCHMARK(BM_HjbSolve)->Arg(41)->Arg(81)->Arg(121)->Unit(benchmark::kMillisecond);

// events per second for a single replication, by policy
void BM_Simulate(benchmark::State& state) {
  const auto& cfg = canonical();
  static const auto vg = std::make_shared<const ValueGrid>(
      solve_hjb(cfg.grid, cfg.cost, diffusion_coeffs(cfg.limits), cfg.limits));
  const std::int64_t n = state.range(1);
  const auto sys = build_system(cfg.limits, n);
  const auto init = initial_state_for(cfg.x0, sys);
  PolicyDescriptor d{state.range(0) == 0 ? PolicyKind::PSCP : PolicyKind::CMu, {}, 0.25};
  const auto pol = build_policy(d, cfg, vg, n);
  std::int64_t events = 0;
  std::uint64_t seed = 1;
  for (auto _ : state) {
    auto r = run_simulation(sys, pol, cfg.cost, init, 10.0, seed++);
    events += r.event_count;
  }
  state.counters["events/s"] = benchmark::Counter(double(events), benchmark::Counter::kIsRate);
  state.SetLabel(pol.id);
}
BENCHMARK(BM_Simulate)->Args({0, 100})->Args({0, 400})->Args({1, 100})->Args({1, 400})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
