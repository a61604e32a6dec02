#include <benchmark/benchmark.h>

#include <filesystem>

#include "mb/redteam.hpp"

namespace {

const std::filesystem::path kFixtures = MB_FIXTURES_DIR;

void BM_BrandedScenario(benchmark::State& state) {
  mb::AttackScenario scenario =
      mb::AttackScenario::load(kFixtures / "scenario_branded_whisper_shoes.json");
  mb::WorldStore world = mb::WorldStore::load(kFixtures / "world_shoes.json");
  const std::filesystem::path out = "bench-out";
  for (auto _ : state) {
    benchmark::DoNotOptimize(mb::run_scenario(scenario, world, out));
  }
}
BENCHMARK(BM_BrandedScenario)->Unit(benchmark::kMillisecond);

void BM_CleanSession(benchmark::State& state) {
  mb::AttackScenario scenario =
      mb::AttackScenario::load(kFixtures / "scenario_clean_baseline.json");
  mb::WorldStore world = mb::WorldStore::load(kFixtures / "world_shoes.json");
  const std::filesystem::path out = "bench-out-clean";
  for (auto _ : state) {
    benchmark::DoNotOptimize(mb::run_scenario(scenario, world, out));
  }
}
BENCHMARK(BM_CleanSession)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
