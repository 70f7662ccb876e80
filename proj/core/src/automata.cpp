#include "ew/automata.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace ew {

Kind k_rcv(const std::string& link) { return {true, link}; }
Kind k_local(const std::string& action) { return {false, action}; }

std::string to_string(const Kind& k) {
  return (k.is_rcv ? "rcv:" : "local:") + k.channel;
}

std::vector<Value> VarDecl::enumerate() const {
  switch (domain) {
    case Domain::List:
      return values;
    case Domain::NatRange: {
      std::vector<Value> out;
      for (uint64_t n = lo; n <= hi; ++n) out.push_back(v_nat(n));
      return out;
    }
    case Domain::Bits: {
      std::vector<Value> out;
      for (uint64_t code = 0; code < (uint64_t{1} << width); ++code) {
        std::vector<Value> bits;
        for (uint64_t j = 0; j < width; ++j)
          bits.push_back(v_nat((code >> (width - 1 - j)) & 1));
        out.push_back(v_seq(std::move(bits)));
      }
      return out;
    }
    case Domain::None:
      break;
  }
  fail("UnboundedBranching", "variable '" + name + "' has no enumerable domain");
}

bool VarDecl::contains(const Value& v) const {
  switch (domain) {
    case Domain::List:
      return std::find(values.begin(), values.end(), v) != values.end();
    case Domain::NatRange:
      return v.is_nat() && v.nat >= lo && v.nat <= hi;
    case Domain::Bits: {
      if (v.tag != Value::Tag::Seq || v.kids.size() != width) return false;
      for (const Value& b : v.kids)
        if (!b.is_nat() || b.nat > 1) return false;
      return true;
    }
    case Domain::None:
      return true;
  }
  return true;
}

bool VarDecl::operator==(const VarDecl& o) const {
  return name == o.name && domain == o.domain && values == o.values && lo == o.lo &&
         hi == o.hi && width == o.width && has_init == o.has_init &&
         (!has_init || init == o.init) && stable == o.stable;
}

const Link* Signature::link(const std::string& name) const {
  for (const Link& l : links)
    if (l.name == name) return &l;
  return nullptr;
}

const VarDecl* Signature::var(const std::string& agent, const std::string& name) const {
  auto it = vars.find(agent);
  if (it == vars.end()) return nullptr;
  for (const VarDecl& d : it->second)
    if (d.name == name) return &d;
  return nullptr;
}

std::string Signature::owner_of(const std::string& var_name) const {
  if (is_msg_var(var_name)) {
    const Link* l = link(var_name.substr(4));
    return l ? l->source : "";
  }
  for (const auto& [agent, decls] : vars)
    for (const VarDecl& d : decls)
      if (d.name == var_name) return agent;
  return "";
}

std::vector<std::string> Signature::actions_of(const std::string& agent) const {
  std::vector<std::string> out;
  for (const auto& [a, owner] : actions)
    if (owner == agent) out.push_back(a);
  return out;
}

std::vector<Link> Signature::links_from(const std::string& agent) const {
  std::vector<Link> out;
  for (const Link& l : links)
    if (l.source == agent) out.push_back(l);
  std::sort(out.begin(), out.end(),
            [](const Link& a, const Link& b) { return a.name < b.name; });
  return out;
}

Signature merge_signatures(const Signature& a, const Signature& b) {
  Signature m = a;
  for (const auto& ag : b.agents)
    if (std::find(m.agents.begin(), m.agents.end(), ag) == m.agents.end())
      m.agents.push_back(ag);
  std::sort(m.agents.begin(), m.agents.end());
  for (const Link& l : b.links) {
    const Link* have = m.link(l.name);
    if (!have)
      m.links.push_back(l);
    else if (!(*have == l))
      fail("SignatureClash", "link '" + l.name + "' declared with different endpoints");
  }
  for (const auto& [act, owner] : b.actions) {
    auto it = m.actions.find(act);
    if (it == m.actions.end())
      m.actions[act] = owner;
    else if (it->second != owner)
      fail("SignatureClash", "action '" + act + "' declared for two agents");
  }
  for (const auto& [agent, decls] : b.vars) {
    for (const VarDecl& d : decls) {
      std::string other = m.owner_of(d.name);
      if (!other.empty() && other != agent)
        fail("SignatureClash", "variable '" + d.name + "' declared for two agents");
      const VarDecl* have = m.var(agent, d.name);
      if (!have)
        m.vars[agent].push_back(d);
      else if (!(*have == d))
        fail("SignatureClash", "variable '" + d.name + "' declared with different domains");
    }
  }
  for (const auto& [mv, d] : b.msg_domains) {
    auto it = m.msg_domains.find(mv);
    if (it == m.msg_domains.end())
      m.msg_domains[mv] = d;
    else if (!(it->second == d))
      fail("SignatureClash", "message domain for '" + mv + "' declared twice");
  }
  return m;
}

bool BasicProgram::operator==(const BasicProgram& o) const {
  return tag == o.tag && agent == o.agent && formula == o.formula && kind == o.kind &&
         kinds == o.kinds && var == o.var && term == o.term && action == o.action;
}

BasicProgram pg_initially(const std::string& agent, Formula psi) {
  BasicProgram p;
  p.tag = BasicProgram::Tag::Initially;
  p.agent = agent;
  p.formula = std::move(psi);
  return p;
}

BasicProgram pg_effect(const std::string& agent, Kind k, const std::string& var, Term t) {
  BasicProgram p;
  p.tag = BasicProgram::Tag::Effect;
  p.agent = agent;
  p.kind = std::move(k);
  p.var = var;
  p.term = std::move(t);
  return p;
}

BasicProgram pg_precondition(const std::string& agent, const std::string& action,
                             Formula phi) {
  BasicProgram p;
  p.tag = BasicProgram::Tag::Precondition;
  p.agent = agent;
  p.action = action;
  p.formula = std::move(phi);
  return p;
}

BasicProgram pg_fairness(const std::string& agent, Formula phi, const std::string& action) {
  BasicProgram p;
  p.tag = BasicProgram::Tag::Fairness;
  p.agent = agent;
  p.formula = std::move(phi);
  p.action = action;
  return p;
}

BasicProgram pg_frame(const std::string& agent, std::vector<Kind> kinds,
                      const std::string& var) {
  BasicProgram p;
  p.tag = BasicProgram::Tag::Frame;
  p.agent = agent;
  p.kinds = std::move(kinds);
  p.var = var;
  return p;
}

std::string to_string(const BasicProgram& bp) {
  std::ostringstream o;
  o << "@" << bp.agent << " ";
  switch (bp.tag) {
    case BasicProgram::Tag::Initially:
      o << "initially " << to_string(bp.formula);
      break;
    case BasicProgram::Tag::Effect:
      o << "if kind=" << to_string(bp.kind) << " then " << bp.var << " := "
        << to_string(bp.term);
      break;
    case BasicProgram::Tag::Precondition:
      o << "kind=local:" << bp.action << " only-if " << to_string(bp.formula);
      break;
    case BasicProgram::Tag::Fairness:
      o << "if-necessarily " << to_string(bp.formula) << " then-io kind=local:"
        << bp.action;
      break;
    case BasicProgram::Tag::Frame: {
      o << "only [";
      for (size_t k = 0; k < bp.kinds.size(); ++k)
        o << (k ? "," : "") << to_string(bp.kinds[k]);
      o << "] affects " << bp.var;
      break;
    }
  }
  return o.str();
}

bool DefinedConstant::operator==(const DefinedConstant& o) const {
  return name == o.name && agent == o.agent && var == o.var && bound == o.bound &&
         psi == o.psi;
}

const DefinedConstant* MessageAutomaton::constant(const std::string& name) const {
  for (const DefinedConstant& d : defined)
    if (d.name == name) return &d;
  return nullptr;
}

MessageAutomaton compose(const MessageAutomaton& p1, const MessageAutomaton& p2) {
  MessageAutomaton m;
  m.sig = merge_signatures(p1.sig, p2.sig);
  m.members = p1.members;
  m.members.insert(m.members.end(), p2.members.begin(), p2.members.end());
  m.is_kb = p1.is_kb || p2.is_kb;
  m.defined = p1.defined;
  for (const DefinedConstant& d : p2.defined) {
    const DefinedConstant* have = m.constant(d.name);
    if (!have)
      m.defined.push_back(d);
    else if (!(*have == d))
      fail("SignatureClash", "constant '" + d.name + "' defined twice");
  }
  return m;
}

bool same_members(const MessageAutomaton& a, const MessageAutomaton& b) {
  std::vector<std::string> ma, mb;
  for (const auto& p : a.members) ma.push_back(to_string(p));
  for (const auto& p : b.members) mb.push_back(to_string(p));
  std::sort(ma.begin(), ma.end());
  std::sort(mb.begin(), mb.end());
  return ma == mb;
}

Interpretation interpretation_for(const MessageAutomaton& a) {
  Interpretation i = default_interpretation();
  for (const auto& [agent, decls] : a.sig.vars)
    for (const VarDecl& d : decls) {
      auto it = i.var_owner.find(d.name);
      if (it != i.var_owner.end() && it->second != agent)
        fail("SignatureClash", "variable '" + d.name + "' declared for two agents");
      i.var_owner[d.name] = agent;
    }
  for (const Link& l : a.sig.links) i.var_owner[msg_var(l.name)] = l.source;
  for (const DefinedConstant& d : a.defined) {
    Interpretation::Fn f;
    f.arity = 0;
    f.rigid = false;
    std::string name = d.name;
    f.eval = [name](const std::vector<Value>&, const GlobalState&) -> Value {
      fail("UnresolvableConstant",
           "constant '" + name + "' needs a system context to resolve");
    };
    i.fns[d.name] = std::move(f);
    i.sym_owner[d.name] = d.agent;
  }
  return i;
}

GlobalState context_of(const EventStructure& es, const std::string& agent,
                       const LocalState& local) {
  GlobalState g = es.initial_global();
  g[agent] = local;
  return g;
}

GlobalState before_context(const EventStructure& es, int eid) {
  return context_of(es, es.ev(eid).agent, es.before.at(eid));
}

GlobalState effect_context(const EventStructure& es, int eid) {
  GlobalState g = before_context(es, eid);
  g[es.ev(eid).agent].set(kValVar, es.ev(eid).value);
  return g;
}

GlobalState after_context(const EventStructure& es, int eid) {
  return context_of(es, es.ev(eid).agent, es.after.at(eid));
}

namespace {

const std::vector<int>& agent_order(const EventStructure& es, const std::string& agent) {
  static const std::vector<int> empty;
  auto it = es.per_agent.find(agent);
  return it == es.per_agent.end() ? empty : it->second;
}

std::string member_label(const BasicProgram& bp) {
  switch (bp.tag) {
    case BasicProgram::Tag::Initially: return "Initially";
    case BasicProgram::Tag::Effect: return "Effect";
    case BasicProgram::Tag::Precondition: return "Precondition";
    case BasicProgram::Tag::Fairness: return "Fairness";
    case BasicProgram::Tag::Frame: return is_msg_var(bp.var) ? "FrameMsg" : "Frame";
  }
  return "?";
}

bool eval_clause_formula(const Interpretation& i, const Formula& f, const GlobalState& s) {
  return eval_formula_nonmodal(i, {}, s, f);
}

// Length of the trailing run of agent events that keep the fairness
// obligation pending: not the action, and phi holds after them.
int pending_streak(const Interpretation& i, const BasicProgram& bp,
                   const EventStructure& es) {
  auto it = es.per_agent.find(bp.agent);
  if (it == es.per_agent.end()) return 0;
  const auto& order = it->second;
  int streak = 0;
  for (auto rit = order.rbegin(); rit != order.rend(); ++rit) {
    const Event& e = es.ev(*rit);
    if (!e.is_rcv && e.channel == bp.action) break;
    if (!eval_clause_formula(i, bp.formula, after_context(es, e.id))) break;
    ++streak;
  }
  return streak;
}

void check_member(const Interpretation& i, const BasicProgram& bp,
                  const EventStructure& es, const ConsistencyOptions& opt,
                  std::vector<Violation>& out) {
  std::string label = member_label(bp);
  auto bad = [&](const std::string& detail) {
    out.push_back({label, to_string(bp) + ": " + detail});
  };
  try {
    switch (bp.tag) {
      case BasicProgram::Tag::Initially: {
        if (!classify_i_formula(i, bp.formula, bp.agent)) {
          bad("condition is not local to " + bp.agent);
          return;
        }
        if (!eval_clause_formula(i, bp.formula, es.initial_global()))
          bad("initial state does not satisfy the condition");
        return;
      }
      case BasicProgram::Tag::Effect: {
        if (!classify_i_term(i, bp.term, bp.agent)) {
          bad("term is not local to " + bp.agent);
          return;
        }
        for (int id : agent_order(es, bp.agent)) {
          const Event& e = es.ev(id);
          if (!bp.kind.matches(e)) continue;
          Value want = eval_term(i, {}, effect_context(es, id), bp.term);
          const LocalState& after = es.after.at(id);
          Value got = after.has(bp.var) ? after.get(bp.var) : v_bottom();
          if (got != want)
            bad("event " + std::to_string(id) + " sets " + bp.var + " to " +
                to_string(got) + ", expected " + to_string(want));
        }
        return;
      }
      case BasicProgram::Tag::Precondition: {
        if (!classify_i_formula(i, bp.formula, bp.agent)) {
          bad("condition is not local to " + bp.agent);
          return;
        }
        for (int id : agent_order(es, bp.agent)) {
          const Event& e = es.ev(id);
          if (e.is_rcv || e.channel != bp.action) continue;
          if (!eval_clause_formula(i, bp.formula, before_context(es, id)))
            bad("event " + std::to_string(id) + " fired with a false precondition");
        }
        return;
      }
      case BasicProgram::Tag::Fairness: {
        if (!classify_i_formula(i, bp.formula, bp.agent)) {
          bad("condition is not local to " + bp.agent);
          return;
        }
        const auto& order = agent_order(es, bp.agent);
        if (order.empty()) {
          bool init_pending = eval_clause_formula(i, bp.formula, es.initial_global());
          if (opt.fairness == FairnessMode::exact && init_pending)
            bad("no events although the condition holds initially");
          return;
        }
        int streak = pending_streak(i, bp, es);
        if (opt.fairness == FairnessMode::exact ? streak > 0 : streak >= opt.window)
          bad("obligation pending over the last " + std::to_string(streak) +
              " events of " + bp.agent);
        return;
      }
      case BasicProgram::Tag::Frame: {
        bool msg = is_msg_var(bp.var);
        for (int id : agent_order(es, bp.agent)) {
          const Event& e = es.ev(id);
          bool listed = false;
          for (const Kind& k : bp.kinds)
            if (k.matches(e)) listed = true;
          if (listed) continue;
          const LocalState& b = es.before.at(id);
          const LocalState& a = es.after.at(id);
          if (msg) {
            if (a.has(bp.var) && !a.get(bp.var).is_bottom())
              bad("event " + std::to_string(id) + " sends on " + bp.var.substr(4));
          } else {
            Value vb = b.has(bp.var) ? b.get(bp.var) : v_bottom();
            Value va = a.has(bp.var) ? a.get(bp.var) : v_bottom();
            if (vb != va) bad("event " + std::to_string(id) + " changes " + bp.var);
          }
        }
        return;
      }
    }
  } catch (const EwError& e) {
    bad(std::string("evaluation error: ") + e.what());
  }
}

bool signature_matches(const Signature& sig, const EventStructure& es,
                       std::vector<Violation>& out) {
  if (es.agents != sig.agents) {
    out.push_back({"Signature", "structure agents differ from the automaton's"});
    return false;
  }
  for (const Link& l : es.links) {
    const Link* have = sig.link(l.name);
    if (!have || !(*have == l)) {
      out.push_back({"Signature", "link '" + l.name + "' not in the automaton"});
      return false;
    }
  }
  for (const std::string& a : es.actions) {
    if (!sig.actions.count(a)) {
      out.push_back({"Signature", "action '" + a + "' not in the automaton"});
      return false;
    }
  }
  return true;
}

}  // namespace

Verdict consistent(const Interpretation& i, const MessageAutomaton& pg,
                   const EventStructure& es, const ConsistencyOptions& opt) {
  Verdict v;
  if (!signature_matches(pg.sig, es, v.violations)) {
    v.ok = false;
    return v;
  }
  for (const BasicProgram& bp : pg.members) check_member(i, bp, es, opt, v.violations);
  v.ok = v.violations.empty();
  return v;
}

Specification spec_true(const std::string& tag) {
  return {tag, [](const EventStructure&, std::string*) { return true; }};
}

Specification spec_all(const std::string& tag, std::vector<Specification> parts) {
  return {tag, [parts = std::move(parts)](const EventStructure& es, std::string* why) {
            for (const Specification& p : parts) {
              std::string w;
              if (!p.check(es, &w)) {
                if (why) *why = p.tag + ": " + w;
                return false;
              }
            }
            return true;
          }};
}

Specification spec_implies(const std::string& tag, Specification antecedent,
                           Specification consequent) {
  return {tag, [a = std::move(antecedent), c = std::move(consequent)](
                   const EventStructure& es, std::string* why) {
            std::string w;
            if (!a.check(es, &w)) return true;
            if (c.check(es, &w)) return true;
            if (why) *why = c.tag + ": " + w;
            return false;
          }};
}

Specification axiom_spec(const Interpretation& i, const BasicProgram& bp) {
  std::string tag;
  switch (bp.tag) {
    case BasicProgram::Tag::Initially: tag = "Ax-init"; break;
    case BasicProgram::Tag::Effect: tag = "Ax-cause"; break;
    case BasicProgram::Tag::Precondition: tag = "Ax-if"; break;
    case BasicProgram::Tag::Fairness: tag = "Ax-fair"; break;
    case BasicProgram::Tag::Frame:
      tag = is_msg_var(bp.var) ? "Ax-sends" : "Ax-affects";
      break;
  }
  return {tag, [i, bp](const EventStructure& es, std::string* why) {
            std::vector<Violation> v;
            check_member(i, bp, es, {}, v);
            if (v.empty()) return true;
            if (why) *why = v.front().detail;
            return false;
          }};
}

Specification derive_spec(const Interpretation& i, const MessageAutomaton& pg) {
  std::vector<Specification> parts;
  for (const BasicProgram& bp : pg.members) parts.push_back(axiom_spec(i, bp));
  return spec_all("derived(" + std::to_string(pg.members.size()) + " members)",
                  std::move(parts));
}

namespace {

struct LinkView {
  std::string source;
  std::vector<int> order;        // source-agent events in local order
  std::set<int> delivered;       // send ids with a matching receive on the link
};

LinkView link_view(const EventStructure& es, const std::string& link) {
  const Link* l = es.link(link);
  if (!l) fail("UnknownLink", "no link '" + link + "' in the structure");
  LinkView v;
  v.source = l->source;
  auto it = es.per_agent.find(l->source);
  if (it != es.per_agent.end()) v.order = it->second;
  for (const Event& e : es.events)
    if (e.is_rcv && e.channel == link) v.delivered.insert(es.send_of.at(e.id));
  return v;
}

bool is_send_on(const EventStructure& es, int id, const std::string& link) {
  const LocalState& a = es.after.at(id);
  std::string mv = msg_var(link);
  return a.has(mv) && !a.get(mv).is_bottom();
}

}  // namespace

Specification fair_i_safety_spec(const Interpretation& i, const Formula& phi,
                                 const Term& t, const std::string& link) {
  return {"Fair-safety(" + link + ")",
          [i, phi, t, link](const EventStructure& es, std::string* why) {
            const Link* l = es.link(link);
            if (!l) {
              if (why) *why = "no link '" + link + "'";
              return false;
            }
            if (!classify_i_formula(i, phi, l->source) ||
                !classify_i_term(i, t, l->source)) {
              if (why) *why = "condition or term not local to " + l->source;
              return false;
            }
            for (const Event& e : es.events) {
              if (!e.is_rcv || e.channel != link) continue;
              int snd = es.send_of.at(e.id);
              GlobalState ctx = before_context(es, snd);
              if (!eval_formula_nonmodal(i, {}, ctx, phi)) {
                if (why)
                  *why = "condition false before send " + std::to_string(snd) +
                         " of receive " + std::to_string(e.id);
                return false;
              }
              Value want = eval_term(i, {}, ctx, t);
              if (e.value != want) {
                if (why)
                  *why = "receive " + std::to_string(e.id) + " carries " +
                         to_string(e.value) + ", expected " + to_string(want);
                return false;
              }
            }
            return true;
          }};
}

Specification fair_i_liveness_spec(const Interpretation& i, const Formula& phi,
                                   const Term& t, const std::string& link, int window) {
  (void)t;
  return {"Fair-liveness(" + link + ")",
          [i, phi, link, window](const EventStructure& es, std::string* why) {
            LinkView lv = link_view(es, link);
            if (lv.order.empty()) {
              bool pending =
                  eval_formula_nonmodal(i, {}, es.initial_global(), phi);
              if (pending && window == 0) {
                if (why) *why = "no events although the condition holds initially";
                return false;
              }
              return true;
            }
            size_t n = lv.order.size();
            // Backwards pass: for each position, whether some later-or-equal
            // event has the condition false after it or is a delivered send,
            // and how many sends lie at-or-after it.
            bool saw_refuted = false, saw_delivered = false;
            int sends_after = 0;
            std::vector<bool> ok(n, false);
            std::vector<int> sends(n, 0);
            for (size_t k = n; k-- > 0;) {
              int id = lv.order[k];
              if (is_send_on(es, id, link)) {
                ++sends_after;
                if (lv.delivered.count(id)) saw_delivered = true;
              }
              if (!eval_formula_nonmodal(i, {}, after_context(es, id), phi))
                saw_refuted = true;
              ok[k] = saw_refuted || saw_delivered;
              sends[k] = sends_after;
            }
            for (size_t k = 0; k < n; ++k) {
              if (ok[k]) continue;
              if (window > 0 && sends[k] < window) continue;
              if (why)
                *why = "event " + std::to_string(lv.order[k]) +
                       " has no later refutation or delivered send on " + link;
              return false;
            }
            return true;
          }};
}

Specification fair_i_spec(const Interpretation& i, const Formula& phi, const Term& t,
                          const std::string& link, int window) {
  return spec_all("Fair(" + link + ")",
                  {fair_i_safety_spec(i, phi, t, link),
                   fair_i_liveness_spec(i, phi, t, link, window)});
}

MessageAutomaton build_fair_pg(const Interpretation& i, const Signature& sig,
                               const Formula& phi, const Term& t,
                               const std::string& link, const std::string& action) {
  const Link* l = sig.link(link);
  if (!l) fail("UnknownLink", "no link '" + link + "' in the signature");
  auto ait = sig.actions.find(action);
  if (ait == sig.actions.end() || ait->second != l->source)
    fail("SignatureClash", "action '" + action + "' is not an action of " + l->source);
  if (!classify_i_formula(i, phi, l->source))
    fail("NotLocalFormula", "condition is not local to " + l->source);
  if (!classify_i_term(i, t, l->source))
    fail("NotLocalFormula", "term is not local to " + l->source);
  MessageAutomaton m;
  m.sig = sig;
  m.is_kb = is_modal(phi);
  m.members = {
      pg_precondition(l->source, action, phi),
      pg_effect(l->source, k_local(action), msg_var(link), t),
      pg_frame(l->source, {k_local(action)}, msg_var(link)),
      pg_fairness(l->source, phi, action),
  };
  return m;
}

}  // namespace ew
