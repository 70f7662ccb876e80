#include <benchmark/benchmark.h>

#include "ew/stp.hpp"

namespace {

using namespace ew;

StpScenario scenario(uint64_t bits, int depth) {
  StpScenario sc;
  sc.n_bits = bits;
  sc.depth = depth;
  return sc;
}

void BM_ExploreStenning(benchmark::State& state) {
  StpScenario sc = scenario(1, static_cast<int>(state.range(0)));
  MessageAutomaton pg = build_stenning(sc);
  Interpretation interp = interpretation_for(pg);
  ExploreConfig cfg;
  cfg.depth = sc.depth;
  for (auto _ : state) {
    System sys = explore(interp, pg, cfg);
    benchmark::DoNotOptimize(sys.structures.size());
  }
}
BENCHMARK(BM_ExploreStenning)->Arg(4)->Arg(6)->Arg(8);

void BM_ExploreLossy(benchmark::State& state) {
  StpScenario sc = scenario(2, static_cast<int>(state.range(0)));
  sc.channel.lossy = true;
  sc.channel.reorder = true;
  MessageAutomaton pg = build_stenning(sc);
  Interpretation interp = interpretation_for(pg);
  ExploreConfig cfg;
  cfg.depth = sc.depth;
  cfg.channel = sc.channel;
  for (auto _ : state) {
    System sys = explore(interp, pg, cfg);
    benchmark::DoNotOptimize(sys.structures.size());
  }
}
BENCHMARK(BM_ExploreLossy)->Arg(4)->Arg(6);

void BM_FairRun(benchmark::State& state) {
  StpScenario sc = scenario(2, 16);
  MessageAutomaton pg = build_stenning(sc);
  Interpretation interp = interpretation_for(pg);
  ExploreConfig cfg;
  cfg.depth = sc.depth;
  cfg.window = sc.window;
  cfg.mode = ExploreMode::fair;
  for (auto _ : state) {
    EventStructure es = run_fair(interp, pg, cfg, 7);
    benchmark::DoNotOptimize(es.events.size());
  }
}
BENCHMARK(BM_FairRun);

void BM_SystemCuts(benchmark::State& state) {
  StpScenario sc = scenario(1, static_cast<int>(state.range(0)));
  MessageAutomaton pg = build_stenning(sc);
  Interpretation interp = interpretation_for(pg);
  ExploreConfig cfg;
  cfg.depth = sc.depth;
  System sys = explore(interp, pg, cfg);
  for (auto _ : state) {
    auto cuts = system_cuts(sys);
    benchmark::DoNotOptimize(cuts.size());
  }
}
BENCHMARK(BM_SystemCuts)->Arg(4)->Arg(6);

}  // namespace
