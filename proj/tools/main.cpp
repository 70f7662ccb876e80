#include <array>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ew/io.hpp"
#include "ew/stp.hpp"

namespace {

using nlohmann::ordered_json;
using namespace ew;

// Exit codes: 0 every check passed, 1 some check failed, 2 usage or parse
// error, 3 a budget was exceeded. Reports never carry timings, so identical
// argv + files + seed give byte-identical stdout.
constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;
constexpr int kBudget = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("FileError", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// lossy|lossless[,reorder][,dup]
ChannelSpec parse_channel(const std::string& text) {
  ChannelSpec ch;
  std::stringstream ss(text);
  std::string tok;
  bool first = true;
  for (; std::getline(ss, tok, ','); first = false) {
    if (first) {
      if (tok == "lossy") ch.lossy = true;
      else if (tok != "lossless")
        fail("ParseError", "channel must start with lossy or lossless, got '" + text + "'");
    } else if (tok == "reorder") {
      ch.reorder = true;
    } else if (tok == "dup") {
      ch.dup = true;
    } else {
      fail("ParseError", "unknown channel modifier '" + tok + "'");
    }
  }
  if (first) fail("ParseError", "empty channel spec");
  return ch;
}

uint64_t parse_nat_arg(const std::string& text, const std::string& what) {
  size_t used = 0;
  uint64_t v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty())
    fail("ParseError", what + " must be a number, got '" + text + "'");
  return v;
}

// "bits:N" or "NAME=bits:N"; the input variable defaults to X.
std::pair<std::string, VarDecl> parse_inputs(const std::string& text) {
  std::string name = "X", body = text;
  if (auto eq = text.find('='); eq != std::string::npos) {
    name = text.substr(0, eq);
    body = text.substr(eq + 1);
  }
  if (body.rfind("bits:", 0) != 0 || name.empty())
    fail("ParseError", "inputs must look like bits:N or NAME=bits:N, got '" + text + "'");
  VarDecl d;
  d.name = name;
  d.domain = VarDecl::Domain::Bits;
  d.width = parse_nat_arg(body.substr(5), "input bit count");
  return {name, d};
}

std::optional<uint64_t> cut_budget_from_env() {
  const char* s = std::getenv("EW_BUDGET_CUTS");
  if (!s || !*s) return std::nullopt;
  return parse_nat_arg(s, "EW_BUDGET_CUTS");
}

// Aligned key/value/detail rows; empty details drop their column.
void print_table(const std::vector<std::array<std::string, 3>>& rows) {
  size_t w0 = 0, w1 = 0;
  for (const auto& r : rows) {
    w0 = std::max(w0, r[0].size());
    if (!r[2].empty()) w1 = std::max(w1, r[1].size());
  }
  for (const auto& r : rows) {
    std::cout << r[0] << std::string(w0 - r[0].size() + 2, ' ') << r[1];
    if (!r[2].empty()) std::cout << std::string(w1 - r[1].size() + 2, ' ') << r[2];
    std::cout << "\n";
  }
}

ordered_json violations_json(const std::vector<Violation>& vs) {
  ordered_json arr = ordered_json::array();
  for (const Violation& v : vs) arr.push_back({{"axiom", v.axiom}, {"detail", v.detail}});
  return arr;
}

MessageAutomaton load_standard(const std::string& path, const std::string& verb) {
  MessageAutomaton a = parse_automaton(path);
  if (a.is_kb)
    fail("ParseError",
         verb + " needs a standard automaton; knowledge tests are checked via stp verify");
  return a;
}

struct ExploreOpts {
  std::string system_path;
  int depth = 12;
  int window = 4;
  uint32_t seed = 0;
  std::string channel = "lossless";
  std::string inputs;
  uint64_t max_structures = 100000;
  std::string mode = "exhaustive";
  bool json = false;
};

void bind_explore_opts(CLI::App* cmd, ExploreOpts& o) {
  cmd->add_option("--system", o.system_path, "automaton JSON file")->required();
  cmd->add_option("--depth", o.depth, "event depth bound");
  cmd->add_option("--window", o.window, "fairness window");
  cmd->add_option("--seed", o.seed, "scheduler seed");
  cmd->add_option("--channel", o.channel, "lossy|lossless[,reorder][,dup]");
  cmd->add_option("--inputs", o.inputs, "input domain, e.g. bits:2 or Z=bits:1");
  cmd->add_option("--max-structures", o.max_structures, "structure cap");
  cmd->add_option("--mode", o.mode, "exhaustive|fair")
      ->check(CLI::IsMember({"exhaustive", "fair"}));
  cmd->add_flag("--json", o.json, "machine-readable report");
}

ExploreConfig config_of(const ExploreOpts& o) {
  ExploreConfig cfg;
  cfg.depth = o.depth;
  cfg.window = o.window;
  cfg.seed = o.seed;
  cfg.channel = parse_channel(o.channel);
  cfg.max_structures = o.max_structures;
  cfg.mode = o.mode == "fair" ? ExploreMode::fair : ExploreMode::exhaustive;
  if (!o.inputs.empty()) {
    auto [name, decl] = parse_inputs(o.inputs);
    cfg.inputs[name] = decl;
  }
  if (auto b = cut_budget_from_env()) cfg.cut_budget = *b;
  return cfg;
}

int run_explore(const ExploreOpts& o, int dump) {
  MessageAutomaton a = load_standard(o.system_path, "explore");
  Interpretation interp = interpretation_for(a);
  System sys = explore(interp, a, config_of(o));
  size_t shown = dump < 0 ? sys.structures.size()
                          : std::min<size_t>(dump, sys.structures.size());
  if (o.json) {
    ordered_json j;
    j["structures"] = sys.structures.size();
    j["states_visited"] = sys.states_visited;
    j["budget_exceeded"] = sys.budget_exceeded;
    if (dump != 0) {
      ordered_json traces = ordered_json::array();
      for (size_t k = 0; k < shown; ++k) traces.push_back(write_trace(sys.structures[k]));
      j["traces"] = traces;
    }
    std::cout << j.dump(2) << "\n";
  } else {
    print_table({{"structures", std::to_string(sys.structures.size()), ""},
                 {"states-visited", std::to_string(sys.states_visited), ""},
                 {"budget-exceeded", sys.budget_exceeded ? "yes" : "no", ""}});
    for (size_t k = 0; k < shown; ++k)
      std::cout << "-- structure " << k << "\n" << write_trace(sys.structures[k]);
  }
  return sys.budget_exceeded ? kBudget : kPass;
}

// Shared by check-consistent and check-spec: parse, validate the trace, then
// run the named check. check-spec uses the derived specification, which also
// covers consistency, but reports under its own tag.
int run_check(const std::string& verb, const std::string& system_path,
              const std::string& trace_path, const std::string& fairness,
              int window, bool json) {
  MessageAutomaton a = load_standard(system_path, verb);
  EventStructure es = read_trace(slurp(trace_path));
  Verdict v;
  for (const Violation& viol : validate(es)) {
    v.ok = false;
    v.violations.push_back(viol);
  }
  if (v.ok) {
    Interpretation interp = interpretation_for(a);
    if (verb == "check-consistent") {
      ConsistencyOptions opt;
      opt.fairness = fairness == "window" ? FairnessMode::window : FairnessMode::exact;
      opt.window = window;
      v = consistent(interp, a, es, opt);
    } else {
      std::string why;
      if (!derive_spec(interp, a).check(es, &why)) {
        v.ok = false;
        v.violations.push_back({"DerivedSpec", why});
      }
    }
  }
  if (json) {
    ordered_json j;
    j["check"] = verb;
    j["ok"] = v.ok;
    j["violations"] = violations_json(v.violations);
    std::cout << j.dump(2) << "\n";
  } else {
    std::vector<std::array<std::string, 3>> rows;
    rows.push_back({"check", verb, ""});
    rows.push_back({"result", v.ok ? "pass" : "fail", ""});
    for (const Violation& viol : v.violations)
      rows.push_back({"violation", viol.axiom, viol.detail});
    print_table(rows);
  }
  return v.ok ? kPass : kFail;
}

// Evaluates the formula over the explored system: at the initial cut of
// every structure (init), at every cut (all, via a box at the root), or at
// the full cut of every structure (final). The verdict is the conjunction.
int run_eval(const ExploreOpts& o, const std::string& formula_text,
             const std::string& cut_mode, const std::string& expect) {
  MessageAutomaton a = load_standard(o.system_path, "eval");
  Formula f = parse_formula(formula_text);
  Interpretation interp = interpretation_for(a);
  System sys = explore(interp, a, config_of(o));
  Formula probe = cut_mode == "all" ? f_always(f) : f;
  bool result = true;
  for (size_t k = 0; k < sys.structures.size(); ++k) {
    const EventStructure& es = sys.structures[k];
    ConsistentCut c;
    c.es = &es;
    c.es_index = static_cast<int>(k);
    c.frontier.assign(es.agents.size(), 0);
    if (cut_mode == "final")
      for (size_t ai = 0; ai < es.agents.size(); ++ai)
        c.frontier[ai] = static_cast<int>(es.per_agent.at(es.agents[ai]).size());
    if (!eval_know(interp, sys, c, probe)) {
      result = false;
      break;
    }
  }
  bool expected = expect == "true";
  if (o.json) {
    ordered_json j;
    j["formula"] = formula_text;
    j["cut"] = cut_mode;
    j["structures"] = sys.structures.size();
    j["result"] = result;
    j["expected"] = expected;
    j["budget_exceeded"] = sys.budget_exceeded;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << (result ? "true" : "false") << "\n";
  }
  if (sys.budget_exceeded) return kBudget;
  return result == expected ? kPass : kFail;
}

struct StpOpts {
  uint64_t bits = 2;
  int depth = 12;
  int window = 4;
  uint32_t seed = 1;
  std::string channel = "lossless";
  uint64_t max_structures = 100000;
  bool json = false;
};

void bind_stp_opts(CLI::App* cmd, StpOpts& o) {
  cmd->add_option("--bits", o.bits, "bit count of the input sequence");
  cmd->add_option("--depth", o.depth, "event depth bound");
  cmd->add_option("--window", o.window, "fairness window");
  cmd->add_option("--seed", o.seed, "scheduler seed");
  cmd->add_option("--channel", o.channel, "lossy|lossless[,reorder][,dup]");
  cmd->add_option("--max-structures", o.max_structures, "structure cap");
  cmd->add_flag("--json", o.json, "machine-readable report");
}

StpScenario scenario_of(const StpOpts& o) {
  StpScenario sc;
  sc.n_bits = o.bits;
  sc.depth = o.depth;
  sc.window = o.window;
  sc.seed = o.seed;
  sc.channel = parse_channel(o.channel);
  sc.max_structures = o.max_structures;
  if (auto b = cut_budget_from_env()) sc.cut_budget = *b;
  return sc;
}

int run_stp_run(const StpOpts& o, const std::string& input) {
  StpScenario sc = scenario_of(o);
  std::string bits = input.empty() ? std::string(sc.n_bits, '0') : input;
  if (bits.size() != sc.n_bits)
    fail("ParseError", "--input needs exactly " + std::to_string(sc.n_bits) + " bits");
  std::vector<Value> seq;
  for (char b : bits) {
    if (b != '0' && b != '1') fail("ParseError", "--input must be a 0/1 string");
    seq.push_back(v_nat(b - '0'));
  }
  MessageAutomaton pg = build_stenning(sc);
  Interpretation interp = interpretation_for(pg);
  ExploreConfig cfg;
  cfg.depth = sc.depth;
  cfg.window = sc.window;
  cfg.channel = sc.channel;
  cfg.mode = ExploreMode::fair;
  if (auto b = cut_budget_from_env()) cfg.cut_budget = *b;
  VarDecl pin;
  pin.name = "X";
  pin.domain = VarDecl::Domain::List;
  pin.values = {v_seq(seq)};
  cfg.inputs["X"] = pin;
  EventStructure es = run_fair(interp, pg, cfg, sc.seed);
  if (o.json) {
    ordered_json j;
    j["input"] = bits;
    j["events"] = es.events.size();
    j["trace"] = write_trace(es);
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << write_trace(es);
  }
  return kPass;
}

ordered_json verdict_json(const StpOpts& o, const StpVerdict& v) {
  ordered_json j;
  j["scenario"] = {{"bits", o.bits},     {"depth", o.depth}, {"window", o.window},
                   {"seed", o.seed},     {"channel", o.channel}};
  j["safety"] = {{"ok", v.safety_ok}, {"counterexample", v.safety_counterexample}};
  ordered_json live = ordered_json::array();
  for (const StpVerdict::BitLiveness& bl : v.liveness)
    live.push_back({{"bit", bl.bit}, {"ok", bl.ok}, {"depth", bl.depth}, {"note", bl.note}});
  j["liveness"] = live;
  j["implements"] = {{"ok", v.implements.ok},
                     {"violations", violations_json(v.implements.violations)}};
  ordered_json psi = ordered_json::array();
  for (const PsiCondition& pc : v.psi.conditions)
    psi.push_back({{"name", pc.name}, {"ok", pc.ok}, {"note", pc.note}});
  j["psi"] = {{"ok", v.psi.ok()}, {"conditions", psi}};
  j["budget_exceeded"] = v.budget_exceeded;
  j["states_checked"] = v.states_checked;
  j["ok"] = v.ok();
  return j;
}

int run_stp_verify(const StpOpts& o) {
  StpVerdict v = verify_stp(scenario_of(o));
  if (o.json) {
    std::cout << verdict_json(o, v).dump(2) << "\n";
  } else {
    auto mark = [](bool ok) { return ok ? std::string("pass") : std::string("fail"); };
    std::vector<std::array<std::string, 3>> rows;
    rows.push_back({"safety", mark(v.safety_ok),
                    v.safety_ok ? "" : "counterexample trace below"});
    for (const StpVerdict::BitLiveness& bl : v.liveness)
      rows.push_back({"liveness bit " + std::to_string(bl.bit), mark(bl.ok), bl.note});
    rows.push_back({"implements", mark(v.implements.ok),
                    v.implements.violations.empty() ? ""
                                                    : v.implements.violations.front().detail});
    for (const PsiCondition& pc : v.psi.conditions)
      rows.push_back({"psi " + pc.name, mark(pc.ok), pc.note});
    rows.push_back({"states-checked", std::to_string(v.states_checked), ""});
    rows.push_back({"overall", mark(v.ok()), v.budget_exceeded ? "budget exceeded" : ""});
    print_table(rows);
    if (!v.safety_ok && !v.safety_counterexample.empty())
      std::cout << "-- counterexample\n" << v.safety_counterexample;
  }
  if (v.budget_exceeded) return kBudget;
  return v.ok() ? kPass : kFail;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"event-structure exploration and knowledge checking"};
  app.require_subcommand(1);

  ExploreOpts xo;
  int dump = 0;
  CLI::App* cmd_explore = app.add_subcommand("explore", "explore an automaton, report or dump its structures");
  bind_explore_opts(cmd_explore, xo);
  cmd_explore->add_option("--dump", dump, "print the first N structures as traces, -1 for all");

  struct CheckArgs {
    std::string system_path, trace_path;
    std::string fairness = "exact";
    int window = 4;
    bool json = false;
  } ca, sa;
  CLI::App* cmd_consistent =
      app.add_subcommand("check-consistent", "check a trace against an automaton's members");
  CLI::App* cmd_spec =
      app.add_subcommand("check-spec", "check a trace against the automaton's derived specification");
  for (auto [cmd, args] : {std::pair{cmd_consistent, &ca}, std::pair{cmd_spec, &sa}}) {
    cmd->add_option("--system", args->system_path, "automaton JSON file")->required();
    cmd->add_option("--trace", args->trace_path, "trace file")->required();
    cmd->add_option("--window", args->window, "fairness window");
    cmd->add_flag("--json", args->json, "machine-readable report");
  }
  cmd_consistent->add_option("--fairness", ca.fairness, "exact|window")
      ->check(CLI::IsMember({"exact", "window"}));

  ExploreOpts eo;
  std::string formula_text, cut_mode = "init", expect = "true";
  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a formula over the explored system");
  bind_explore_opts(cmd_eval, eo);
  cmd_eval->add_option("--formula", formula_text, "formula in prefix syntax")->required();
  cmd_eval->add_option("--cut", cut_mode, "init|all|final")
      ->check(CLI::IsMember({"init", "all", "final"}));
  cmd_eval->add_option("--expect", expect, "true|false")
      ->check(CLI::IsMember({"true", "false"}));

  StpOpts ro, vo;
  std::string input;
  CLI::App* cmd_stp = app.add_subcommand("stp", "sequence transmission checks");
  cmd_stp->require_subcommand(1);
  CLI::App* cmd_run = cmd_stp->add_subcommand("run", "print one fair trace");
  bind_stp_opts(cmd_run, ro);
  cmd_run->add_option("--input", input, "bit string for X, default all zeros");
  CLI::App* cmd_verify = cmd_stp->add_subcommand("verify", "full verdict on the scenario");
  bind_stp_opts(cmd_verify, vo);

  // Hyphenated spellings of the stp subcommands.
  StpOpts ro2, vo2;
  std::string input2;
  CLI::App* cmd_run2 = app.add_subcommand("stp-run", "print one fair trace");
  bind_stp_opts(cmd_run2, ro2);
  cmd_run2->add_option("--input", input2, "bit string for X, default all zeros");
  CLI::App* cmd_verify2 = app.add_subcommand("stp-verify", "full verdict on the scenario");
  bind_stp_opts(cmd_verify2, vo2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  if (cmd_explore->parsed()) return run_explore(xo, dump);
  if (cmd_consistent->parsed())
    return run_check("check-consistent", ca.system_path, ca.trace_path, ca.fairness,
                     ca.window, ca.json);
  if (cmd_spec->parsed())
    return run_check("check-spec", sa.system_path, sa.trace_path, "exact", sa.window,
                     sa.json);
  if (cmd_eval->parsed()) return run_eval(eo, formula_text, cut_mode, expect);
  if (cmd_run->parsed()) return run_stp_run(ro, input);
  if (cmd_verify->parsed()) return run_stp_verify(vo);
  if (cmd_run2->parsed()) return run_stp_run(ro2, input2);
  if (cmd_verify2->parsed()) return run_stp_verify(vo2);
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const EwError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.kind == "BudgetExceeded" || e.kind == "CutBudgetExceeded" ||
        e.kind == "ExplorationBudgetExceeded")
      return kBudget;
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
