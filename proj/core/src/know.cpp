#include "ew/know.hpp"

#include <algorithm>
#include <memory>
#include <sstream>

namespace ew {

namespace {

bool term_mentions(const Term& t, const std::set<std::string>& names) {
  if (t.tag == Term::Tag::App && names.count(t.name)) return true;
  for (const Term& k : t.kids)
    if (term_mentions(k, names)) return true;
  return false;
}

bool formula_mentions(const Formula& f, const std::set<std::string>& names) {
  for (const Term& t : f.args)
    if (term_mentions(t, names)) return true;
  for (const Formula& k : f.kids)
    if (formula_mentions(k, names)) return true;
  return false;
}

// Artifacts of translate(): reserved guard atoms and cut quantifiers.
bool mentions_reserved(const Formula& f) {
  if (f.tag == Formula::Tag::Atom && (f.name == kLsEqAtom || f.name == kCutGeAtom))
    return true;
  if ((f.tag == Formula::Tag::ForAll || f.tag == Formula::Tag::Exists) &&
      f.name.rfind(kCutVarPrefix, 0) == 0)
    return true;
  for (const Formula& k : f.kids)
    if (mentions_reserved(k)) return true;
  return false;
}

bool contains_temporal(const Formula& f) {
  if (f.tag == Formula::Tag::Always || f.tag == Formula::Tag::Eventually) return true;
  for (const Formula& k : f.kids)
    if (contains_temporal(k)) return true;
  return false;
}

std::string serialize_valuation(const Valuation& v) {
  std::ostringstream o;
  for (const auto& [k, val] : v) o << k << "=" << to_string(val) << ";";
  return o.str();
}

std::string clip(const std::string& s) {
  return s.size() <= 160 ? s : s.substr(0, 160) + "...";
}

// Table key: observable local state with val dropped (the history carries
// it), restricted to `keep` so keys match states of the target vocabulary.
std::string table_key_cut(const EventStructure& es, const std::string& agent,
                          const ConsistentCut& c,
                          const std::set<std::string>* keep = nullptr) {
  size_t a = std::find(es.agents.begin(), es.agents.end(), agent) - es.agents.begin();
  if (a == es.agents.size()) fail("UnknownAgent", "no agent '" + agent + "'");
  const auto& order = es.per_agent.at(agent);
  const LocalState& raw =
      c.frontier[a] == 0 ? es.initstate.at(agent) : es.after.at(order[c.frontier[a] - 1]);
  LocalState obs = observable_local(es, raw);
  obs.vars.erase(kValVar);
  if (keep)
    std::erase_if(obs.vars, [&](const auto& kv) { return !keep->count(kv.first); });
  return to_string(obs);
}

// Same key computed from a live exploration state, whose history is already
// in observable form.
std::string table_key_ls(const LocalState& ls) {
  LocalState o = ls;
  o.vars.erase(kValVar);
  auto h = o.vars.find(kHistVar);
  if (h != o.vars.end() && h->second.tag == Value::Tag::Seq)
    for (const Value& e : h->second.kids)
      if (e.tag != Value::Tag::Pair)
        fail("TableContext", "history entries are event ids, not (kind, value) pairs");
  return to_string(o);
}

// Causal-past cut of an event: everything strictly below it, plus the event
// itself when inclusive.
ConsistentCut past_cut(const EventStructure& es, int es_index,
                       const std::set<std::pair<int, int>>& co, int eid, bool inclusive) {
  ConsistentCut c;
  c.es = &es;
  c.es_index = es_index;
  c.frontier.assign(es.agents.size(), 0);
  for (size_t a = 0; a < es.agents.size(); ++a) {
    int cnt = 0;
    for (int id : es.per_agent.at(es.agents[a]))
      if (id == eid ? inclusive : co.count({id, eid}) > 0) ++cnt;
    c.frontier[a] = cnt;
  }
  return c;
}

struct Evaluator {
  const Interpretation& base;
  const System& sys;
  const std::vector<DefinedConstant>& defs;
  std::vector<ConsistentCut> cuts;
  std::vector<std::vector<int>> by_structure;
  std::map<const EventStructure*, int> structure_index;
  std::set<std::string> defined_names;
  // Observable local-state keys are interned; caches and class maps hold the
  // small ids instead of the key strings.
  std::vector<std::string> okey_pool;
  std::map<std::string, int> okey_ids;
  std::vector<std::map<std::string, int>> okey_cache;  // cut index -> agent -> id
  std::map<std::string, std::map<int, std::vector<int>>> classes;
  // Same classes with members deduplicated by global observable state; valid
  // for bodies without temporal operators, which cannot see past the state.
  std::map<std::string, std::map<int, std::vector<int>>> classes_state;
  std::map<const void*, std::string> fstr_cache;
  std::map<std::string, bool> know_memo;
  std::map<std::string, bool> temporal_memo;
  std::map<std::pair<std::string, int>, Value> const_memo;
  std::map<std::string, std::shared_ptr<const Interpretation>> interp_cache;
  std::set<std::string> resolving;
  const EventStructure* state_es = nullptr;
  std::vector<int> state_frontier;
  GlobalState state_val;

  // With full_cuts_only the cut universe is one full cut per structure. For
  // a prefix-closed system this spans the same states as all cuts, which is
  // all that non-temporal evaluation can observe; callers must keep temporal
  // operators away from this mode.
  Evaluator(const Interpretation& b, const System& s,
            const std::vector<DefinedConstant>* kb_defs = nullptr,
            bool full_cuts_only = false)
      : base(b), sys(s), defs(kb_defs ? *kb_defs : s.automaton.defined) {
    if (full_cuts_only) {
      cuts.reserve(sys.structures.size());
      for (size_t k = 0; k < sys.structures.size(); ++k) {
        const EventStructure& es = sys.structures[k];
        ConsistentCut c;
        c.es = &es;
        c.es_index = static_cast<int>(k);
        for (const std::string& a : es.agents)
          c.frontier.push_back(static_cast<int>(es.per_agent.at(a).size()));
        cuts.push_back(std::move(c));
      }
    } else {
      cuts = system_cuts(sys, sys.config.cut_budget);
    }
    by_structure.resize(sys.structures.size());
    for (size_t k = 0; k < cuts.size(); ++k)
      by_structure[cuts[k].es_index].push_back(static_cast<int>(k));
    for (size_t k = 0; k < sys.structures.size(); ++k)
      structure_index[&sys.structures[k]] = static_cast<int>(k);
    for (const DefinedConstant& dc : defs) defined_names.insert(dc.name);
    okey_cache.resize(cuts.size());
  }

  int cut_index(const ConsistentCut& c) const {
    ptrdiff_t k = &c - cuts.data();
    return k >= 0 && k < static_cast<ptrdiff_t>(cuts.size()) ? static_cast<int>(k)
                                                             : -1;
  }

  int okey_id(const ConsistentCut& c, const std::string& agent) {
    int k = cut_index(c);
    if (k >= 0) {
      auto it = okey_cache[k].find(agent);
      if (it != okey_cache[k].end()) return it->second;
    }
    std::string s = observable_key(*c.es, agent, c);
    auto [it, fresh] = okey_ids.try_emplace(std::move(s),
                                            static_cast<int>(okey_pool.size()));
    if (fresh) okey_pool.push_back(it->first);
    if (k >= 0) okey_cache[k][agent] = it->second;
    return it->second;
  }

  // Formula identity in memo keys is by node address; every node evaluated
  // through one Evaluator must stay alive for its whole lifetime.
  const std::string& fstr(const Formula& f) {
    auto [it, fresh] = fstr_cache.try_emplace(&f);
    if (fresh) it->second = to_string(f);
    return it->second;
  }

  const GlobalState& state_of(const ConsistentCut& c) {
    if (state_es != c.es || state_frontier != c.frontier) {
      state_es = c.es;
      state_frontier = c.frontier;
      state_val = c.state();
    }
    return state_val;
  }

  void ensure_classes(const std::string& agent) {
    if (classes.count(agent)) return;
    auto& cls = classes[agent];
    auto& scls = classes_state[agent];
    std::map<int, std::set<std::vector<int>>> seen;
    for (size_t k = 0; k < cuts.size(); ++k) {
      int key = okey_id(cuts[k], agent);
      cls[key].push_back(static_cast<int>(k));
      std::vector<int> g;
      for (const std::string& a : cuts[k].es->agents) g.push_back(okey_id(cuts[k], a));
      if (seen[key].insert(std::move(g)).second) scls[key].push_back(static_cast<int>(k));
    }
  }

  Value resolve(const ConsistentCut& c, const DefinedConstant& dc) {
    std::pair<std::string, int> key{dc.name, okey_id(c, dc.agent)};
    auto m = const_memo.find(key);
    if (m != const_memo.end()) return m->second;
    if (!resolving.insert(dc.name).second)
      fail("UnresolvableConstant", dc.name + " resolves through itself");
    Value out = v_omega();
    bool found = false;
    for (uint64_t n = 0; n <= dc.bound && !found; ++n) {
      Valuation v;
      v[dc.var] = v_nat(n);
      if (!eval(c, dc.psi, v)) {
        out = v_nat(n);
        found = true;
      }
    }
    resolving.erase(dc.name);
    const_memo[key] = out;
    return out;
  }

  const Interpretation& interp_at(const ConsistentCut& c) {
    std::string sig;
    std::vector<Value> vals;
    for (const DefinedConstant& dc : defs) {
      vals.push_back(resolve(c, dc));
      sig += to_string(vals.back());
      sig += '\x1f';
    }
    auto [it, fresh] = interp_cache.try_emplace(std::move(sig));
    if (fresh) {
      auto i2 = std::make_shared<Interpretation>(base);
      for (size_t d = 0; d < defs.size(); ++d) {
        Value v = vals[d];
        i2->fns[defs[d].name] = {
            0, false, [v](const std::vector<Value>&, const GlobalState&) { return v; }};
        i2->sym_owner[defs[d].name] = defs[d].agent;
      }
      it->second = std::move(i2);
    }
    return *it->second;
  }

  static int cut_arg(const std::vector<ConsistentCut>& cuts, const Term& t,
                     const Valuation& val) {
    uint64_t n;
    if (t.tag == Term::Tag::Var) {
      auto it = val.find(t.name);
      if (it == val.end()) fail("UnboundVariable", "cut variable '" + t.name + "'");
      n = it->second.nat;
    } else if (t.tag == Term::Tag::Lit && t.lit.is_nat()) {
      n = t.lit.nat;
    } else {
      fail("BadCutTerm", "expected a cut variable or index");
    }
    if (n >= cuts.size()) fail("BadCutTerm", "cut index out of range");
    return static_cast<int>(n);
  }

  bool eval(const ConsistentCut& c, const Formula& f, const Valuation& val) {
    if (!is_modal(f) && !mentions_reserved(f)) {
      if (!defined_names.empty() && formula_mentions(f, defined_names))
        return eval_formula_nonmodal(interp_at(c), val, state_of(c), f);
      return eval_formula_nonmodal(base, val, state_of(c), f);
    }
    switch (f.tag) {
      case Formula::Tag::Atom: {
        if (f.name == kLsEqAtom) {
          int a = cut_arg(cuts, f.args[0], val);
          int b = cut_arg(cuts, f.args[1], val);
          const Term& ag = f.args[2];
          if (ag.tag != Term::Tag::Lit || ag.lit.tag != Value::Tag::Agent)
            fail("BadCutTerm", "expected an agent literal");
          return local_equiv(cuts[a], cuts[b], ag.lit.name);
        }
        if (f.name == kCutGeAtom) {
          int a = cut_arg(cuts, f.args[0], val);
          int b = cut_arg(cuts, f.args[1], val);
          if (cuts[a].es != cuts[b].es) return false;
          CutOrder o = cut_order(cuts[a], cuts[b]);
          return o == CutOrder::succeeds || o == CutOrder::equals;
        }
        return eval_formula_nonmodal(base, val, state_of(c), f);
      }
      case Formula::Tag::Not:
        return !eval(c, f.kids[0], val);
      case Formula::Tag::And:
        for (const Formula& k : f.kids)
          if (!eval(c, k, val)) return false;
        return true;
      case Formula::Tag::Or:
        for (const Formula& k : f.kids)
          if (eval(c, k, val)) return true;
        return false;
      case Formula::Tag::Implies:
        return !eval(c, f.kids[0], val) || eval(c, f.kids[1], val);
      case Formula::Tag::ForAll:
      case Formula::Tag::Exists: {
        bool is_all = f.tag == Formula::Tag::ForAll;
        const Formula& body = f.kids.back();
        const Formula* guard = f.kids.size() == 2 ? &f.kids[0] : nullptr;
        if (f.name.rfind(kCutVarPrefix, 0) == 0) {
          for (size_t k = 0; k < cuts.size(); ++k) {
            Valuation v2 = val;
            v2[f.name] = v_nat(k);
            if (guard && !eval(c, *guard, v2)) continue;
            bool r = eval(cuts[k], body, v2);
            if (is_all && !r) return false;
            if (!is_all && r) return true;
          }
          return is_all;
        }
        const Interpretation* ip = &base;
        if (!defined_names.empty() && formula_mentions(f, defined_names))
          ip = &interp_at(c);
        for (const Value& v : quantifier_range(*ip, val, state_of(c), f)) {
          Valuation v2 = val;
          v2[f.name] = v;
          if (guard && !eval(c, *guard, v2)) continue;
          bool r = eval(c, body, v2);
          if (is_all && !r) return false;
          if (!is_all && r) return true;
        }
        return is_all;
      }
      case Formula::Tag::Know: {
        ensure_classes(f.name);
        int my = okey_id(c, f.name);
        std::string mkey = "K\x1f" + f.name + "\x1f" + std::to_string(my) +
                           "\x1f" +
                           std::to_string(reinterpret_cast<uintptr_t>(&f)) +
                           "\x1f" + serialize_valuation(val);
        auto m = know_memo.find(mkey);
        if (m != know_memo.end()) return m->second;
        bool state_only =
            !contains_temporal(f.kids[0]) && !mentions_reserved(f.kids[0]);
        auto& cmap = state_only ? classes_state[f.name] : classes[f.name];
        bool out = true;
        auto cl = cmap.find(my);
        if (cl != cmap.end())
          for (int k : cl->second)
            if (!eval(cuts[k], f.kids[0], val)) {
              out = false;
              break;
            }
        know_memo[mkey] = out;
        return out;
      }
      case Formula::Tag::Always:
      case Formula::Tag::Eventually: {
        auto si = structure_index.find(c.es);
        if (si == structure_index.end())
          fail("CutNotInSystem", "temporal operator over a structure outside the system");
        std::ostringstream mk;
        mk << "T\x1f" << si->second << "\x1f";
        for (int x : c.frontier) mk << x << ",";
        mk << "\x1f" << reinterpret_cast<uintptr_t>(&f) << "\x1f"
           << serialize_valuation(val);
        auto m = temporal_memo.find(mk.str());
        if (m != temporal_memo.end()) return m->second;
        bool is_all = f.tag == Formula::Tag::Always;
        bool out = is_all;
        // A temporal-free body is a function of the global state, so its
        // value is shared across every cut in the same state.
        bool state_only =
            !contains_temporal(f.kids[0]) && !mentions_reserved(f.kids[0]);
        std::string bpre;
        if (state_only)
          bpre = "B\x1f" +
                 std::to_string(reinterpret_cast<uintptr_t>(&f.kids[0])) +
                 "\x1f" + serialize_valuation(val) + "\x1f";
        for (int k : by_structure[si->second]) {
          CutOrder o = cut_order(c, cuts[k]);
          if (o != CutOrder::precedes && o != CutOrder::equals) continue;
          bool r;
          if (state_only) {
            std::string bkey = bpre;
            for (const std::string& a : cuts[k].es->agents)
              bkey += std::to_string(okey_id(cuts[k], a)) + ",";
            auto bm = know_memo.find(bkey);
            if (bm == know_memo.end())
              bm = know_memo.emplace(std::move(bkey), eval(cuts[k], f.kids[0], val))
                       .first;
            r = bm->second;
          } else {
            r = eval(cuts[k], f.kids[0], val);
          }
          if (is_all && !r) {
            out = false;
            break;
          }
          if (!is_all && r) {
            out = true;
            break;
          }
        }
        temporal_memo[mk.str()] = out;
        return out;
      }
      case Formula::Tag::Eq:
      case Formula::Tag::Lt:
        return eval_formula_nonmodal(base, val, state_of(c), f);
    }
    fail("BadFormula", "unhandled formula tag");
  }
};

int find_cut(const Evaluator& ev, const System& sys, const ConsistentCut& c) {
  int si = -1;
  auto it = ev.structure_index.find(c.es);
  if (it != ev.structure_index.end()) {
    si = it->second;
  } else if (c.es) {
    si = sys.index_of(canonical_text(*c.es));
  }
  if (si < 0) fail("CutNotInSystem", "the cut's structure is not in the system");
  for (int k : ev.by_structure[si])
    if (ev.cuts[k].frontier == c.frontier) return k;
  fail("CutNotInSystem", "the frontier is not a consistent cut of its structure");
}

// Empty-system translation: Know holds vacuously, box holds and diamond
// fails over the empty cut set, defined constants never resolve.
Formula vacuous_formula(const Formula& f, const std::set<std::string>& names);

Term vacuous_term(const Term& t, const std::set<std::string>& names) {
  if (t.tag == Term::Tag::App && names.count(t.name)) return t_lit(v_omega());
  Term r = t;
  r.kids.clear();
  for (const Term& k : t.kids) r.kids.push_back(vacuous_term(k, names));
  return r;
}

Formula vacuous_formula(const Formula& f, const std::set<std::string>& names) {
  switch (f.tag) {
    case Formula::Tag::Know:
    case Formula::Tag::Always:
      return f_true();
    case Formula::Tag::Eventually:
      return f_false();
    default: {
      Formula r = f;
      r.args.clear();
      for (const Term& t : f.args) r.args.push_back(vacuous_term(t, names));
      r.kids.clear();
      for (const Formula& k : f.kids) r.kids.push_back(vacuous_formula(k, names));
      return r;
    }
  }
}

}  // namespace

bool eval_know(const Interpretation& i, const System& sys, const ConsistentCut& c,
               const Formula& f) {
  Evaluator ev(i, sys);
  int k = find_cut(ev, sys, c);
  Valuation val;
  if (mentions_reserved(f)) val[kCutVarPrefix] = v_nat(k);
  return ev.eval(ev.cuts[k], f, val);
}

Value resolve_defined_constant(const Interpretation& i, const System& sys,
                               const ConsistentCut& c, const DefinedConstant& dc) {
  Evaluator ev(i, sys);
  return ev.resolve(c, dc);
}

Instantiated instantiate(const Interpretation& i, const System& sys,
                         const MessageAutomaton& kb) {
  Instantiated out;
  out.automaton = kb;
  out.automaton.is_kb = false;
  out.automaton.defined.clear();
  out.interp = i;

  std::set<std::string> dn;
  for (const DefinedConstant& dc : kb.defined) dn.insert(dc.name);

  if (sys.structures.empty()) {
    for (BasicProgram& bp : out.automaton.members) {
      if (bp.tag == BasicProgram::Tag::Effect)
        bp.term = vacuous_term(bp.term, dn);
      else if (bp.tag != BasicProgram::Tag::Frame)
        bp.formula = vacuous_formula(bp.formula, dn);
    }
    return out;
  }

  // Full-cuts mode is sound only when nothing evaluated needs to see a cut's
  // future inside one structure: no temporal operator and no translated cut
  // quantifier anywhere, except a single always-pin per initial member,
  // which folds over full-cut states instead.
  auto plain = [](const Formula& f) {
    return !contains_temporal(f) && !mentions_reserved(f);
  };
  bool fast = sys.prefix_closed;
  for (const DefinedConstant& dc : kb.defined) fast = fast && plain(dc.psi);
  for (const BasicProgram& bp : kb.members) {
    if (bp.tag == BasicProgram::Tag::Initially)
      fast = fast && (plain(bp.formula) ||
                      (bp.formula.tag == Formula::Tag::Always &&
                       plain(bp.formula.kids[0])));
    else if (bp.tag == BasicProgram::Tag::Precondition ||
             bp.tag == BasicProgram::Tag::Fairness)
      fast = fast && plain(bp.formula);
  }

  Evaluator ev(i, sys, &kb.defined, fast);
  // Keys are built in the kb vocabulary: tables are consulted while the
  // instantiated automaton runs, where only its own variables exist.
  std::map<std::string, std::set<std::string>> keep_of;
  for (const std::string& agent : kb.sig.agents) {
    std::set<std::string> keep{kHistVar};
    auto it = kb.sig.vars.find(agent);
    if (it != kb.sig.vars.end())
      for (const VarDecl& d : it->second) keep.insert(d.name);
    for (const Link& l : kb.sig.links)
      if (l.source == agent) keep.insert(msg_var(l.name));
    keep_of[agent] = std::move(keep);
  }
  int counter = 0;
  // Member rewrites are applied after all tables are built; memo keys inside
  // the Evaluator hold node addresses, so evaluated nodes must not be freed
  // while it is still in use.
  std::vector<std::pair<BasicProgram*, Formula>> formula_patches;
  std::vector<std::pair<BasicProgram*, Term>> term_patches;
  for (BasicProgram& bp : out.automaton.members) {
    bool formula_member = bp.tag == BasicProgram::Tag::Initially ||
                          bp.tag == BasicProgram::Tag::Precondition ||
                          bp.tag == BasicProgram::Tag::Fairness;
    if (formula_member &&
        (is_modal(bp.formula) || formula_mentions(bp.formula, dn))) {
      auto table = std::make_shared<std::map<std::string, bool>>();
      if (bp.tag == BasicProgram::Tag::Initially) {
        // The key collapses roots the agent cannot tell apart, and the pin
        // must hold from all of them, so entries conjoin.
        bool fold_full = fast && bp.formula.tag == Formula::Tag::Always;
        for (size_t k = 0; k < sys.structures.size(); ++k) {
          ConsistentCut c0;
          c0.es = &sys.structures[k];
          c0.es_index = static_cast<int>(k);
          c0.frontier.assign(sys.structures[k].agents.size(), 0);
          std::string key = table_key_cut(*c0.es, bp.agent, c0, &keep_of.at(bp.agent));
          bool v = fold_full ? ev.eval(ev.cuts[k], bp.formula.kids[0], {})
                             : ev.eval(c0, bp.formula, {});
          auto [it, fresh] = table->emplace(std::move(key), v);
          if (!fresh) it->second = it->second && v;
        }
      } else {
        // One evaluation per distinct full local state; the projected key is
        // a function of the full key, so repeats cannot add table entries.
        std::map<int, bool> done;
        for (const ConsistentCut& c : ev.cuts) {
          if (!done.try_emplace(ev.okey_id(c, bp.agent)).second) continue;
          std::string key = table_key_cut(*c.es, bp.agent, c, &keep_of.at(bp.agent));
          bool v = ev.eval(c, bp.formula, {});
          auto [it, fresh] = table->emplace(std::move(key), v);
          if (!fresh && it->second != v)
            fail("UnresolvableConstant",
                 to_string(bp) + ": one local state needs two truth values: " +
                     clip(it->first));
        }
      }
      std::string id = "@kt:" + std::to_string(counter++);
      std::string agent = bp.agent;
      out.interp.preds[id] = {
          0, false,
          [table, agent, id](const std::vector<Value>&, const GlobalState& g) -> bool {
            auto it = g.find(agent);
            if (it == g.end()) fail("TableMiss", id + ": no local state for " + agent);
            auto e = table->find(table_key_ls(it->second));
            if (e == table->end())
              fail("TableMiss",
                   id + "@" + agent + ": unseen local state " +
                       clip(table_key_ls(it->second)));
            return e->second;
          }};
      out.interp.sym_owner[id] = agent;
      formula_patches.emplace_back(&bp, f_atom(id, {}));
    } else if (bp.tag == BasicProgram::Tag::Effect && term_mentions(bp.term, dn)) {
      auto table = std::make_shared<std::map<std::string, Value>>();
      std::map<int, bool> done;
      for (const ConsistentCut& c : ev.cuts) {
        if (!done.try_emplace(ev.okey_id(c, bp.agent)).second) continue;
        std::string key = table_key_cut(*c.es, bp.agent, c, &keep_of.at(bp.agent));
        Value v = eval_term(ev.interp_at(c), {}, ev.state_of(c), bp.term);
        auto [it, fresh] = table->emplace(std::move(key), v);
        if (!fresh && it->second != v)
          fail("UnresolvableConstant",
               "@" + bp.agent + " effect on " + bp.var +
                   ": one local state needs two values: " + clip(it->first));
      }
      std::string id = "@tt:" + std::to_string(counter++);
      std::string agent = bp.agent;
      out.interp.fns[id] = {
          0, false,
          [table, agent, id](const std::vector<Value>&, const GlobalState& g) -> Value {
            auto it = g.find(agent);
            if (it == g.end()) fail("TableMiss", id + ": no local state for " + agent);
            auto e = table->find(table_key_ls(it->second));
            if (e == table->end())
              fail("TableMiss",
                   id + "@" + agent + ": unseen local state " +
                       clip(table_key_ls(it->second)));
            return e->second;
          }};
      out.interp.sym_owner[id] = agent;
      term_patches.emplace_back(&bp, t_app(id, {}));
    }
  }
  for (auto& [bp, f] : formula_patches) bp->formula = std::move(f);
  for (auto& [bp, t] : term_patches) bp->term = std::move(t);
  return out;
}

namespace {

EventStructure project_structure(const EventStructure& es, const Signature& sig) {
  std::map<std::string, std::set<std::string>> allowed;
  for (const std::string& a : es.agents) {
    std::set<std::string>& keep = allowed[a];
    keep.insert(kValVar);
    keep.insert(kHistVar);
    auto vs = sig.vars.find(a);
    if (vs != sig.vars.end())
      for (const VarDecl& d : vs->second) keep.insert(d.name);
    for (const Link& l : es.links)
      if (l.source == a) keep.insert(msg_var(l.name));
  }
  auto filter = [&](const std::string& agent, LocalState& s) {
    const std::set<std::string>& keep = allowed.at(agent);
    for (auto it = s.vars.begin(); it != s.vars.end();)
      it = keep.count(it->first) ? std::next(it) : s.vars.erase(it);
  };
  EventStructure p = es;
  for (auto& [a, s] : p.initstate) filter(a, s);
  for (auto& [a, names] : p.vars_of) {
    std::set<std::string> kept;
    for (const std::string& n : names)
      if (allowed.at(a).count(n)) kept.insert(n);
    names = std::move(kept);
  }
  for (auto& [id, s] : p.before) filter(p.ev(id).agent, s);
  for (auto& [id, s] : p.after) filter(p.ev(id).agent, s);
  return canonicalize(p);
}

}  // namespace

Verdict check_represents(const Interpretation& i, const System& sys,
                         const MessageAutomaton& kb, const ExploreConfig& cfg) {
  Verdict v;
  try {
    // Tables are built over every reachable prefix, not only over cuts of
    // emitted structures. Within a bounded horizon the frontier states fall
    // outside every emitted structure, yet the re-exploration still consults
    // preconditions and fairness formulas there; once the horizon is lifted
    // each prefix extends to a fair run, so the prefix-closed universe is
    // the bounded stand-in for fair-run cuts.
    ExploreConfig ucfg = cfg;
    ucfg.dedup = DedupMode::history;
    ucfg.emission = FairnessMode::window;
    ucfg.window = cfg.depth + 1;
    ucfg.on_state = nullptr;
    System universe = explore(i, sys.automaton, ucfg);
    if (universe.budget_exceeded)
      fail("BudgetExceeded", "prefix universe hit the structure cap");
    Instantiated inst = instantiate(i, universe, kb);
    System re = explore(inst.interp, inst.automaton, cfg);
    if (re.budget_exceeded) fail("BudgetExceeded", "re-exploration hit the structure cap");
    std::vector<std::string> want;
    for (const EventStructure& es : sys.structures)
      want.push_back(canonical_text(project_structure(es, kb.sig)));
    std::sort(want.begin(), want.end());
    want.erase(std::unique(want.begin(), want.end()), want.end());
    std::vector<std::string> missing, extra;
    std::set_difference(want.begin(), want.end(), re.canon.begin(), re.canon.end(),
                        std::back_inserter(missing));
    std::set_difference(re.canon.begin(), re.canon.end(), want.begin(), want.end(),
                        std::back_inserter(extra));
    for (const std::string& m : missing) {
      v.violations.push_back({"Represents", "missing structure: " + clip(m)});
      break;
    }
    for (const std::string& e : extra) {
      v.violations.push_back({"Represents", "unexpected structure: " + clip(e)});
      break;
    }
    if (!missing.empty() || !extra.empty())
      v.violations.push_back(
          {"Represents", std::to_string(missing.size()) + " missing, " +
                             std::to_string(extra.size()) + " unexpected (of " +
                             std::to_string(want.size()) + " wanted)"});
  } catch (const EwError& e) {
    if (e.kind != "TableMiss" && e.kind != "UnresolvableConstant") throw;
    v.violations.push_back({"Represents", e.what()});
  }
  v.ok = v.violations.empty();
  return v;
}

Verdict check_implements(const Interpretation& i, const MessageAutomaton& pg,
                         const MessageAutomaton& kb, const ExploreConfig& cfg) {
  System sys = explore(i, pg, cfg);
  if (sys.budget_exceeded) fail("BudgetExceeded", "exploration hit the structure cap");
  return check_represents(i, sys, kb, cfg);
}

KbSpecification kb_axiom_spec(const Interpretation& i, const MessageAutomaton& kb,
                              const BasicProgram& bp) {
  std::string tag;
  switch (bp.tag) {
    case BasicProgram::Tag::Initially: tag = "Ax-initK"; break;
    case BasicProgram::Tag::Effect: tag = "Ax-causeK"; break;
    case BasicProgram::Tag::Precondition: tag = "Ax-ifK"; break;
    case BasicProgram::Tag::Fairness: tag = "Ax-fairK"; break;
    case BasicProgram::Tag::Frame:
      tag = is_msg_var(bp.var) ? "Ax-sendsK" : "Ax-affectsK";
      break;
  }
  Interpretation base = i;
  std::vector<DefinedConstant> defs = kb.defined;
  BasicProgram member = bp;
  auto pred = [base, defs, member](const System& sys, std::string* why) -> bool {
    auto report = [&](size_t k, const std::string& msg) {
      if (why) *why = "structure " + std::to_string(k) + ": " + msg;
      return false;
    };
    if (member.tag == BasicProgram::Tag::Frame) {
      Specification std_spec = axiom_spec(base, member);
      for (size_t k = 0; k < sys.structures.size(); ++k) {
        std::string w;
        if (!std_spec.check(sys.structures[k], &w)) return report(k, w);
      }
      return true;
    }
    Evaluator ev(base, sys, &defs);
    for (size_t k = 0; k < sys.structures.size(); ++k) {
      const EventStructure& es = sys.structures[k];
      auto order_it = es.per_agent.find(member.agent);
      const std::vector<int> none;
      const std::vector<int>& order =
          order_it == es.per_agent.end() ? none : order_it->second;
      switch (member.tag) {
        case BasicProgram::Tag::Initially: {
          ConsistentCut c0;
          c0.es = &es;
          c0.es_index = static_cast<int>(k);
          c0.frontier.assign(es.agents.size(), 0);
          if (!ev.eval(c0, member.formula, {}))
            return report(k, "initial condition fails");
          break;
        }
        case BasicProgram::Tag::Precondition: {
          auto co = causal_order(es);
          for (int id : order) {
            const Event& e = es.ev(id);
            if (e.is_rcv || e.channel != member.action) continue;
            ConsistentCut c = past_cut(es, static_cast<int>(k), co, id, false);
            if (!ev.eval(c, member.formula, {}))
              return report(k, "precondition fails before event " + std::to_string(id));
          }
          break;
        }
        case BasicProgram::Tag::Effect: {
          auto co = causal_order(es);
          for (int id : order) {
            if (!member.kind.matches(es.ev(id))) continue;
            ConsistentCut c = past_cut(es, static_cast<int>(k), co, id, false);
            Value want = eval_term(ev.interp_at(c), {}, effect_context(es, id), member.term);
            const LocalState& after = es.after.at(id);
            Value got = after.has(member.var) ? after.get(member.var) : v_bottom();
            if (got != want)
              return report(k, "effect on " + member.var + " at event " +
                                   std::to_string(id) + ": got " + to_string(got) +
                                   ", member says " + to_string(want));
          }
          break;
        }
        case BasicProgram::Tag::Fairness: {
          if (order.empty()) {
            ConsistentCut c0;
            c0.es = &es;
            c0.es_index = static_cast<int>(k);
            c0.frontier.assign(es.agents.size(), 0);
            if (ev.eval(c0, member.formula, {}))
              return report(k, "obligation pending from the initial state");
            break;
          }
          int last = order.back();
          const Event& e = es.ev(last);
          if (!e.is_rcv && e.channel == member.action) break;
          auto co = causal_order(es);
          ConsistentCut c = past_cut(es, static_cast<int>(k), co, last, true);
          if (ev.eval(c, member.formula, {}))
            return report(k, "obligation pending after the last event of " + member.agent);
          break;
        }
        case BasicProgram::Tag::Frame:
          break;
      }
    }
    return true;
  };
  return {tag, std::move(pred)};
}

}  // namespace ew
