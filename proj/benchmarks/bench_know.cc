#include <benchmark/benchmark.h>

#include "ew/stp.hpp"

namespace {

using namespace ew;

System stenning_system(uint64_t bits, int depth) {
  StpScenario sc;
  sc.n_bits = bits;
  sc.depth = depth;
  MessageAutomaton pg = build_stenning(sc);
  ExploreConfig cfg;
  cfg.depth = sc.depth;
  return explore(interpretation_for(pg), pg, cfg);
}

void BM_EvalKnow(benchmark::State& state) {
  System sys = stenning_system(1, static_cast<int>(state.range(0)));
  Interpretation interp = interpretation_for(sys.automaton);
  Formula f = f_know("R", f_eq(t_idx(t_var("X"), t_nat(0)), t_nat(1)));
  ConsistentCut c;
  c.es = &sys.structures.front();
  c.es_index = 0;
  c.frontier.assign(2, 0);
  for (auto _ : state) {
    bool v = eval_know(interp, sys, c, f);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_EvalKnow)->Arg(4)->Arg(6);

void BM_Instantiate(benchmark::State& state) {
  int depth = static_cast<int>(state.range(0));
  StpScenario sc;
  sc.n_bits = 1;
  sc.depth = depth;
  MessageAutomaton pg = build_stenning(sc);
  KbAutomaton kb = build_stp_kb(sc);
  Interpretation interp = interpretation_for(pg);
  ExploreConfig ucfg;
  ucfg.depth = depth;
  ucfg.window = depth + 1;
  ucfg.emission = FairnessMode::window;
  System universe = explore(interp, pg, ucfg);
  for (auto _ : state) {
    Instantiated inst = instantiate(interp, universe, kb);
    benchmark::DoNotOptimize(inst.automaton.members.size());
  }
}
BENCHMARK(BM_Instantiate)->Arg(4)->Arg(6);

void BM_CheckImplements(benchmark::State& state) {
  StpScenario sc;
  sc.n_bits = 1;
  sc.depth = static_cast<int>(state.range(0));
  MessageAutomaton pg = build_stenning(sc);
  KbAutomaton kb = build_stp_kb(sc);
  Interpretation interp = interpretation_for(pg);
  ExploreConfig cfg;
  cfg.depth = sc.depth;
  for (auto _ : state) {
    Verdict v = check_implements(interp, pg, kb, cfg);
    benchmark::DoNotOptimize(v.ok);
  }
}
BENCHMARK(BM_CheckImplements)->Arg(4)->Arg(6);

}  // namespace
