#include "ew/stp.hpp"

#include <algorithm>
#include <sstream>

#include "ew/io.hpp"

namespace ew {

namespace {

void check_scenario(const StpScenario& sc) {
  if (sc.n_bits < 1) fail("BadScenario", "need at least one bit");
  if (sc.sender == sc.receiver)
    fail("BadScenario", "sender and receiver must be distinct agents");
  if (sc.action_s == sc.action_r)
    fail("BadScenario", "sender and receiver actions must be distinct");
  if (sc.link_sr == sc.link_rs)
    fail("BadScenario", "the two links must be distinct");
}

Signature base_signature(const StpScenario& sc) {
  Signature sig;
  sig.agents = {sc.sender, sc.receiver};
  std::sort(sig.agents.begin(), sig.agents.end());
  sig.links.push_back({sc.link_sr, sc.sender, sc.receiver});
  sig.links.push_back({sc.link_rs, sc.receiver, sc.sender});
  sig.actions[sc.action_s] = sc.sender;
  sig.actions[sc.action_r] = sc.receiver;
  VarDecl x;
  x.name = "X";
  x.domain = VarDecl::Domain::Bits;
  x.width = sc.n_bits;
  x.stable = true;
  sig.vars[sc.sender].push_back(std::move(x));
  return sig;
}

VarDecl counter_decl(const std::string& name, uint64_t hi) {
  VarDecl d;
  d.name = name;
  d.domain = VarDecl::Domain::NatRange;
  d.lo = 0;
  d.hi = hi;
  d.has_init = true;
  d.init = v_nat(0);
  return d;
}

BasicProgram m_pre(const std::string& agent, const std::string& action, Formula f) {
  BasicProgram m;
  m.tag = BasicProgram::Tag::Precondition;
  m.agent = agent;
  m.action = action;
  m.formula = std::move(f);
  return m;
}

BasicProgram m_fair(const std::string& agent, const std::string& action, Formula f) {
  BasicProgram m;
  m.tag = BasicProgram::Tag::Fairness;
  m.agent = agent;
  m.action = action;
  m.formula = std::move(f);
  return m;
}

BasicProgram m_eff(const std::string& agent, Kind kind, const std::string& var,
                   Term t) {
  BasicProgram m;
  m.tag = BasicProgram::Tag::Effect;
  m.agent = agent;
  m.kind = std::move(kind);
  m.var = var;
  m.term = std::move(t);
  return m;
}

BasicProgram m_frame(const std::string& agent, std::vector<Kind> kinds,
                     const std::string& var) {
  BasicProgram m;
  m.tag = BasicProgram::Tag::Frame;
  m.agent = agent;
  m.kinds = std::move(kinds);
  m.var = var;
  return m;
}

// K_R(X(n)=0) or K_R(X(n)=1).
Formula bit_known_by(const std::string& agent, const Term& n) {
  return f_or({f_know(agent, f_eq(t_idx(t_var("X"), n), t_lit(v_nat(0)))),
               f_know(agent, f_eq(t_idx(t_var("X"), n), t_lit(v_nat(1))))});
}

// Y is a prefix of X entrywise; fills *why on failure.
bool seq_prefix(const Value& y, const Value& x, std::string* why) {
  if (y.tag != Value::Tag::Seq || x.tag != Value::Tag::Seq) {
    if (why) *why = "Y=" + to_string(y) + " or X=" + to_string(x) + " is not a sequence";
    return false;
  }
  if (y.kids.size() > x.kids.size()) {
    if (why)
      *why = "Y=" + to_string(y) + " is longer than X=" + to_string(x);
    return false;
  }
  for (size_t k = 0; k < y.kids.size(); ++k) {
    if (!(y.kids[k] == x.kids[k])) {
      if (why)
        *why = "Y=" + to_string(y) + " differs from X=" + to_string(x) +
               " at index " + std::to_string(k);
      return false;
    }
  }
  return true;
}

// Owner of the stable bit vector and the width it declares.
std::pair<std::string, uint64_t> bits_owner(const Signature& sig) {
  for (const auto& [agent, decls] : sig.vars)
    for (const VarDecl& d : decls)
      if (d.name == "X" && d.domain == VarDecl::Domain::Bits) return {agent, d.width};
  fail("BadStructure", "no bit vector X declared");
}

int agent_index(const EventStructure& es, const std::string& agent) {
  auto it = std::find(es.agents.begin(), es.agents.end(), agent);
  if (it == es.agents.end()) fail("BadStructure", "agent '" + agent + "' not in structure");
  return static_cast<int>(it - es.agents.begin());
}

}  // namespace

bool stp_spec_safety(const EventStructure& es, std::string* witness) {
  std::string sender, receiver;
  for (const auto& [agent, vars] : es.vars_of) {
    if (vars.count("X")) sender = agent;
    if (vars.count("Y")) receiver = agent;
  }
  if (sender.empty() || receiver.empty())
    fail("BadStructure", "expected an X owner and a Y owner");
  const Value& x = es.initstate.at(sender).get("X");
  // X is stable, so a cut's Y/X pair is determined by the receiver prefix.
  std::string why;
  if (!seq_prefix(es.initstate.at(receiver).get("Y"), x, &why)) {
    if (witness) *witness = "at the initial cut: " + why;
    return false;
  }
  const auto& order = es.per_agent.count(receiver)
                          ? es.per_agent.at(receiver)
                          : std::vector<int>{};
  for (size_t k = 0; k < order.size(); ++k) {
    if (!seq_prefix(es.after.at(order[k]).get("Y"), x, &why)) {
      if (witness)
        *witness = "at any cut with " + std::to_string(k + 1) + " " + receiver +
                   "-events (after event " + std::to_string(order[k]) + "): " + why;
      return false;
    }
  }
  return true;
}

bool stp_spec_kb(const Interpretation& i, const System& sys, uint64_t n) {
  auto [sender, width] = bits_owner(sys.automaton.sig);
  if (n >= width)
    fail("IndexOutOfRange",
         "bit " + std::to_string(n) + " of a " + std::to_string(width) + "-bit vector");
  if (sys.structures.empty()) return false;
  std::string receiver;
  for (const std::string& a : sys.automaton.sig.agents)
    if (a != sender) receiver = a;
  if (receiver.empty()) fail("BadStructure", "no receiver agent");
  Formula goal = f_eventually(bit_known_by(receiver, t_lit(v_nat(n))));
  for (size_t k = 0; k < sys.structures.size(); ++k) {
    ConsistentCut c0;
    c0.es = &sys.structures[k];
    c0.es_index = static_cast<int>(k);
    c0.frontier.assign(sys.structures[k].agents.size(), 0);
    if (!eval_know(i, sys, c0, goal)) return false;
  }
  return true;
}

MessageAutomaton build_stenning(const StpScenario& sc) {
  check_scenario(sc);
  uint64_t n = sc.n_bits;
  MessageAutomaton a;
  a.sig = base_signature(sc);
  a.sig.vars[sc.sender].push_back(counter_decl("x_S", n));
  a.sig.vars[sc.receiver].push_back(counter_decl("x_R", n));
  VarDecl y;
  y.name = "Y";
  y.domain = VarDecl::Domain::None;
  y.has_init = true;
  y.init = v_seq({});
  a.sig.vars[sc.receiver].push_back(std::move(y));

  Kind send_s{false, sc.action_s};
  Kind send_r{false, sc.action_r};
  Kind rcv_data{true, sc.link_sr};
  Kind rcv_req{true, sc.link_rs};
  Term x_s = t_var("x_S");
  Term x_r = t_var("x_R");

  a.members.push_back(m_pre(sc.sender, sc.action_s, f_true()));
  a.members.push_back(m_eff(sc.sender, send_s, msg_var(sc.link_sr),
                            t_pair(x_s, t_idx(t_var("X"), x_s))));
  a.members.push_back(m_frame(sc.sender, {send_s}, msg_var(sc.link_sr)));
  a.members.push_back(m_fair(sc.sender, sc.action_s, f_true()));
  // Accept a request exactly when it asks for the next bit.
  Term s_accept = t_app("eq", {t_val(sc.sender), t_app("inc", {x_s})});
  a.members.push_back(m_eff(sc.sender, rcv_req, "x_S",
                            t_app("ite", {s_accept, t_val(sc.sender), x_s})));
  a.members.push_back(m_frame(sc.sender, {rcv_req}, "x_S"));

  a.members.push_back(m_pre(sc.receiver, sc.action_r, f_true()));
  a.members.push_back(m_eff(sc.receiver, send_r, msg_var(sc.link_rs), x_r));
  a.members.push_back(m_frame(sc.receiver, {send_r}, msg_var(sc.link_rs)));
  a.members.push_back(m_fair(sc.receiver, sc.action_r, f_true()));
  // Accept a data message exactly when it carries the awaited index.
  Term got = t_app("proj1", {t_val(sc.receiver)});
  Term r_accept = t_app("andb", {t_app("eq", {got, x_r}),
                                 t_app("lt", {got, t_nat(n)})});
  a.members.push_back(m_eff(sc.receiver, rcv_data, "x_R",
                            t_app("ite", {r_accept, t_app("inc", {x_r}), x_r})));
  a.members.push_back(
      m_eff(sc.receiver, rcv_data, "Y",
            t_app("ite", {r_accept,
                          t_app("snoc", {t_var("Y"), t_app("proj2", {t_val(sc.receiver)})}),
                          t_var("Y")})));
  a.members.push_back(m_frame(sc.receiver, {rcv_data}, "x_R"));
  a.members.push_back(m_frame(sc.receiver, {rcv_data}, "Y"));
  a.is_kb = false;
  return a;
}

MessageAutomaton build_stenning(uint64_t n_bits) {
  StpScenario sc;
  sc.n_bits = n_bits;
  return build_stenning(sc);
}

KbAutomaton build_stp_kb(const StpScenario& sc) {
  check_scenario(sc);
  uint64_t n = sc.n_bits;

  auto r_knows = [&](const Term& ix) { return bit_known_by(sc.receiver, ix); };
  auto s_knows = [&](const Term& ix) { return f_know(sc.sender, r_knows(ix)); };

  std::vector<Value> upto;  // candidate indices, the one-past-the-end included
  for (uint64_t k = 0; k <= n; ++k) upto.push_back(v_nat(k));

  // exists i <= n: known for all k < i and unknown at i.
  auto least_unknown = [&](const std::function<Formula(const Term&)>& known) {
    Formula below = f_forall("k", f_lt(t_var("k"), t_var("i")), known(t_var("k")));
    return f_exists_range(
        "i", upto, f_and({std::move(below), f_not(known(t_var("i")))}));
  };
  // box(forall i: least-unknown index i implies i = c).
  auto pins = [&](const std::function<Formula(const Term&)>& known, const Term& c) {
    Formula below = f_forall("k", f_lt(t_var("k"), t_var("i")), known(t_var("k")));
    Formula least = f_and({std::move(below), f_not(known(t_var("i")))});
    return f_always(f_forall_range(
        "i", upto, f_implies(std::move(least), f_eq(t_var("i"), c))));
  };

  KbAutomaton a;
  a.sig = base_signature(sc);
  a.is_kb = true;
  DefinedConstant c_s;
  c_s.name = "c_S";
  c_s.agent = sc.sender;
  c_s.var = "i";
  c_s.bound = n;
  c_s.psi = s_knows(t_var("i"));
  DefinedConstant c_r;
  c_r.name = "c_R";
  c_r.agent = sc.receiver;
  c_r.var = "i";
  c_r.bound = n;
  c_r.psi = r_knows(t_var("i"));
  a.defined = {c_s, c_r};

  Interpretation interp = interpretation_for(a);
  Term cs = t_app("c_S", {});
  Term cr = t_app("c_R", {});
  MessageAutomaton part_s =
      build_fair_pg(interp, a.sig, least_unknown(s_knows),
                    t_pair(cs, t_idx(t_var("X"), cs)), sc.link_sr, sc.action_s);
  MessageAutomaton part_r = build_fair_pg(interp, a.sig, least_unknown(r_knows),
                                          cr, sc.link_rs, sc.action_r);
  MessageAutomaton merged = compose(part_s, part_r);
  a.sig = merged.sig;
  a.members = merged.members;

  BasicProgram init_s;
  init_s.tag = BasicProgram::Tag::Initially;
  init_s.agent = sc.sender;
  init_s.formula = pins(s_knows, cs);
  a.members.push_back(std::move(init_s));
  BasicProgram init_r;
  init_r.tag = BasicProgram::Tag::Initially;
  init_r.agent = sc.receiver;
  init_r.formula = pins(r_knows, cr);
  a.members.push_back(std::move(init_r));
  a.is_kb = true;
  return a;
}

KbAutomaton build_stp_kb(uint64_t n_bits) {
  StpScenario sc;
  sc.n_bits = n_bits;
  return build_stp_kb(sc);
}

bool PsiReport::ok() const {
  return std::all_of(conditions.begin(), conditions.end(),
                     [](const PsiCondition& c) { return c.ok; });
}

std::string PsiReport::summary() const {
  std::ostringstream o;
  for (const PsiCondition& c : conditions) {
    o << (c.ok ? "PASS " : "FAIL ") << c.name;
    if (!c.note.empty()) o << " (" << c.note << ")";
    o << "\n";
  }
  return o.str();
}

PsiReport check_psi_conditions(const Interpretation& i, const System& sys,
                               const StpScenario& sc) {
  PsiReport rep;
  uint64_t n = sc.n_bits;
  auto phi_s = [&](uint64_t m) { return f_lt(t_lit(v_nat(m)), t_var("x_S")); };
  auto phi_r = [&](uint64_t m) { return f_lt(t_lit(v_nat(m)), t_var("x_R")); };
  auto holds = [&](const GlobalState& ctx, const Formula& f) {
    return eval_formula_nonmodal(i, {}, ctx, f);
  };
  auto agent_events = [&](const EventStructure& es, const std::string& agent) {
    auto it = es.per_agent.find(agent);
    return it == es.per_agent.end() ? std::vector<int>{} : it->second;
  };
  auto describe = [&](size_t si, const EventStructure& es, int eid, uint64_t m) {
    return "structure " + std::to_string(si) + ", event " + std::to_string(eid) +
           " (" + es.ev(eid).kind_string() + "), m=" + std::to_string(m);
  };

  // Stability: once past m, a counter never falls back.
  auto stable = [&](const std::string& name, const std::string& agent,
                    const std::function<Formula(uint64_t)>& phi) {
    PsiCondition c;
    c.name = name;
    for (size_t si = 0; si < sys.structures.size() && c.ok; ++si) {
      const EventStructure& es = sys.structures[si];
      for (int eid : agent_events(es, agent)) {
        for (uint64_t m = 0; m <= n; ++m) {
          Formula f = phi(m);
          if (holds(before_context(es, eid), f) && !holds(after_context(es, eid), f)) {
            c.ok = false;
            c.note = describe(si, es, eid, m) + ": holds before, fails after";
            break;
          }
        }
        if (!c.ok) break;
      }
    }
    rep.conditions.push_back(std::move(c));
  };
  stable("Stable(phi_R)", sc.receiver, phi_r);
  stable("Stable(phi_S)", sc.sender, phi_s);

  {
    PsiCondition c;
    c.name = "Determinate";
    c.note = "holds by construction: counter thresholds over finite bounded runs";
    rep.conditions.push_back(std::move(c));
  }

  // Progress at the sender is matched at the receiver, witnessed by some
  // causally later receiver event. Sender events with no receiver event
  // after them at all sit at the explored boundary and are exempt.
  {
    PsiCondition c;
    c.name = "Implies(phi_S,phi_R)";
    for (size_t si = 0; si < sys.structures.size() && c.ok; ++si) {
      const EventStructure& es = sys.structures[si];
      auto causal = causal_order(es);
      for (int eid : agent_events(es, sc.sender)) {
        std::vector<int> later;
        for (int rid : agent_events(es, sc.receiver))
          if (causal.count({eid, rid})) later.push_back(rid);
        if (later.empty()) continue;
        for (uint64_t m = 0; m <= n; ++m) {
          if (!holds(before_context(es, eid), phi_s(m))) continue;
          bool matched = false;
          for (int rid : later)
            if (holds(after_context(es, rid), phi_r(m))) {
              matched = true;
              break;
            }
          if (!matched) {
            c.ok = false;
            c.note = describe(si, es, eid, m) + ": no later receiver event reaches phi_R";
            break;
          }
        }
        if (!c.ok) break;
      }
    }
    rep.conditions.push_back(std::move(c));
  }

  // A request reports receiver progress: if the receiver had passed every
  // threshold up to m when it sent, the sender passes m on receipt.
  {
    PsiCondition c;
    c.name = "Rcv(phi_S,phi_R," + sc.link_rs + ")";
    for (size_t si = 0; si < sys.structures.size() && c.ok; ++si) {
      const EventStructure& es = sys.structures[si];
      for (int eid : agent_events(es, sc.sender)) {
        const Event& ev = es.ev(eid);
        if (!ev.is_rcv || ev.channel != sc.link_rs) continue;
        int sid = es.send_of.at(eid);
        for (uint64_t m = 0; m <= n; ++m) {
          bool prem = true;
          for (uint64_t k = 0; k <= m && prem; ++k)
            prem = holds(after_context(es, sid), phi_r(k));
          if (prem && !holds(after_context(es, eid), phi_s(m))) {
            c.ok = false;
            c.note = describe(si, es, eid, m) + ": sender misses receiver progress";
            break;
          }
        }
        if (!c.ok) break;
      }
    }
    rep.conditions.push_back(std::move(c));
  }

  // A data message carries the sender frontier: delivery of the message sent
  // exactly at threshold m pushes the receiver past m.
  {
    PsiCondition c;
    c.name = "Rcv(phi_R,phi_S," + sc.link_sr + ")";
    for (size_t si = 0; si < sys.structures.size() && c.ok; ++si) {
      const EventStructure& es = sys.structures[si];
      for (int eid : agent_events(es, sc.receiver)) {
        const Event& ev = es.ev(eid);
        if (!ev.is_rcv || ev.channel != sc.link_sr) continue;
        int sid = es.send_of.at(eid);
        for (uint64_t m = 0; m <= n; ++m) {
          bool prem = !holds(before_context(es, sid), phi_s(m));
          for (uint64_t k = 0; k < m && prem; ++k)
            prem = holds(before_context(es, sid), phi_s(k));
          if (prem && !holds(after_context(es, eid), phi_r(m))) {
            c.ok = false;
            c.note = describe(si, es, eid, m) + ": receiver misses sender frontier";
            break;
          }
        }
        if (!c.ok) break;
      }
    }
    rep.conditions.push_back(std::move(c));
  }

  return rep;
}

bool StpVerdict::ok() const {
  if (!safety_ok || !implements.ok || !psi.ok() || budget_exceeded) return false;
  return std::all_of(liveness.begin(), liveness.end(),
                     [](const BitLiveness& b) { return b.ok; });
}

StpVerdict verify_stp(const StpScenario& sc) {
  check_scenario(sc);
  StpVerdict v;
  MessageAutomaton pg = build_stenning(sc);
  Interpretation interp = interpretation_for(pg);

  // Step 1: prefix safety over every reachable state.
  ExploreConfig sweep;
  sweep.depth = sc.depth;
  sweep.window = sc.window;
  sweep.channel = sc.channel;
  sweep.dedup = DedupMode::state;
  sweep.max_structures = sc.max_structures;
  sweep.cut_budget = sc.cut_budget;
  bool safe = true;
  sweep.on_state = [&](const GlobalState& g) {
    if (!safe) return;
    std::string why;
    if (!seq_prefix(g.at(sc.receiver).get("Y"), g.at(sc.sender).get("X"), &why))
      safe = false;
  };
  System swept = explore(interp, pg, sweep);
  v.states_checked = swept.states_visited;
  v.budget_exceeded = v.budget_exceeded || swept.budget_exceeded;
  v.safety_ok = safe;
  if (!safe) {
    // Find the shallowest replayable run that breaks the prefix invariant.
    for (int d = 1; d <= sc.depth && v.safety_counterexample.empty(); ++d) {
      ExploreConfig ce;
      ce.depth = d;
      ce.window = d + 1;
      ce.emission = FairnessMode::window;
      ce.channel = sc.channel;
      ce.max_structures = sc.max_structures;
      ce.cut_budget = sc.cut_budget;
      System runs = explore(interp, pg, ce);
      v.budget_exceeded = v.budget_exceeded || runs.budget_exceeded;
      for (const EventStructure& es : runs.structures) {
        std::string why;
        if (!stp_spec_safety(es, &why)) {
          v.safety_counterexample = write_trace(es);
          break;
        }
      }
    }
  }

  // Step 2: per-bit knowledge liveness on fair runs, one per input vector.
  try {
    ExploreConfig fcfg;
    fcfg.depth = sc.depth;
    fcfg.window = sc.window;
    fcfg.channel = sc.channel;
    fcfg.mode = ExploreMode::fair;
    fcfg.cut_budget = sc.cut_budget;
    std::vector<EventStructure> runs;
    for (uint64_t code = 0; code < (uint64_t{1} << sc.n_bits); ++code) {
      std::vector<Value> bits;
      for (uint64_t j = 0; j < sc.n_bits; ++j)
        bits.push_back(v_nat((code >> j) & 1));
      VarDecl pin;
      pin.name = "X";
      pin.domain = VarDecl::Domain::List;
      pin.values = {v_seq(bits)};
      fcfg.inputs["X"] = pin;
      runs.push_back(run_fair(interp, pg, fcfg, sc.seed));
    }
    System fair = make_system(pg, std::move(runs), fcfg);
    for (uint64_t bit = 0; bit < sc.n_bits; ++bit) {
      StpVerdict::BitLiveness bl;
      bl.bit = bit;
      bl.ok = true;
      Formula known = bit_known_by(sc.receiver, t_lit(v_nat(bit)));
      int worst = 0;
      for (size_t si = 0; si < fair.structures.size() && bl.ok; ++si) {
        const EventStructure& es = fair.structures[si];
        int ri = agent_index(es, sc.receiver);
        std::vector<ConsistentCut> cuts = enumerate_cuts(es, sc.cut_budget);
        // Knowledge at a cut only depends on the receiver prefix, so probe
        // one cut per receiver depth, shallowest first.
        int max_r = 0;
        for (const ConsistentCut& c : cuts) max_r = std::max(max_r, c.frontier[ri]);
        int found = -1;
        for (int r = 0; r <= max_r && found < 0; ++r) {
          const ConsistentCut* probe = nullptr;
          for (const ConsistentCut& c : cuts)
            if (c.frontier[ri] == r &&
                (!probe || c.event_ids().size() < probe->event_ids().size()))
              probe = &c;
          if (!probe) continue;
          ConsistentCut c = *probe;
          c.es = &fair.structures[si];
          c.es_index = static_cast<int>(si);
          if (eval_know(interp, fair, c, known)) found = r;
        }
        if (found < 0) {
          bl.ok = false;
          bl.note = "not known within the horizon; deepest receiver depth " +
                    std::to_string(max_r) + " reached on run " + std::to_string(si);
        } else {
          worst = std::max(worst, found);
        }
      }
      bl.depth = bl.ok ? worst : -1;
      if (bl.ok)
        bl.note = "known by receiver depth " + std::to_string(worst) + " on every run";
      v.liveness.push_back(std::move(bl));
    }
  } catch (const EwError& e) {
    if (e.kind.find("Budget") == std::string::npos) throw;
    v.budget_exceeded = true;
    StpVerdict::BitLiveness bl;
    bl.ok = false;
    bl.note = std::string("liveness truncated: ") + e.what();
    v.liveness.push_back(std::move(bl));
  }

  // Steps 3 and 4 share one exhaustive exploration.
  ExploreConfig icfg;
  icfg.depth = sc.depth;
  icfg.window = sc.window;
  icfg.channel = sc.channel;
  icfg.max_structures = sc.max_structures;
  icfg.cut_budget = sc.cut_budget;
  try {
    System sys = explore(interp, pg, icfg);
    v.budget_exceeded = v.budget_exceeded || sys.budget_exceeded;
    KbAutomaton kb = build_stp_kb(sc);
    v.implements = check_represents(interp, sys, kb, icfg);
    v.psi = check_psi_conditions(interp, sys, sc);
  } catch (const EwError& e) {
    if (e.kind.find("Budget") == std::string::npos) throw;
    v.budget_exceeded = true;
    v.implements.ok = false;
    v.implements.violations.push_back({"Budget", e.what()});
  }
  return v;
}

}  // namespace ew
