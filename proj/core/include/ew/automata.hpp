#pragma once

#include <cstdint>
#include <functional>

#include "ew/events.hpp"
#include "ew/logic.hpp"

namespace ew {

// Event kind selector: rcv(link) or local(action).
struct Kind {
  bool is_rcv = false;
  std::string channel;

  bool matches(const Event& e) const { return e.is_rcv == is_rcv && e.channel == channel; }
  bool operator==(const Kind& o) const = default;
  bool operator<(const Kind& o) const {
    return std::tie(is_rcv, channel) < std::tie(o.is_rcv, o.channel);
  }
};

Kind k_rcv(const std::string& link);
Kind k_local(const std::string& action);
std::string to_string(const Kind& k);

struct VarDecl {
  enum class Domain { None, List, NatRange, Bits };
  std::string name;
  Domain domain = Domain::None;
  std::vector<Value> values;   // List
  uint64_t lo = 0, hi = 0;     // NatRange, inclusive
  uint64_t width = 0;          // Bits: all 0/1 Nat sequences of this length
  bool has_init = false;
  Value init;
  bool stable = false;         // never changes after the initial state

  bool enumerable() const { return domain != Domain::None; }
  // All values of the domain, in canonical order. Fails with
  // UnboundedBranching for Domain::None.
  std::vector<Value> enumerate() const;
  bool contains(const Value& v) const;
  bool operator==(const VarDecl& o) const;
};

struct Signature {
  std::vector<std::string> agents;  // sorted
  std::vector<Link> links;
  std::map<std::string, std::string> actions;              // action -> agent
  std::map<std::string, std::vector<VarDecl>> vars;        // agent -> decls
  // Optional domains for msg variables ("msg:<link>"), used when a message
  // is unconstrained by any effect program. Bottom is always admitted.
  std::map<std::string, VarDecl> msg_domains;

  const Link* link(const std::string& name) const;
  const VarDecl* var(const std::string& agent, const std::string& name) const;
  // Agent owning a variable name (declared or msg var); empty if unknown.
  std::string owner_of(const std::string& var_name) const;
  std::vector<std::string> actions_of(const std::string& agent) const;
  std::vector<Link> links_from(const std::string& agent) const;
};

Signature merge_signatures(const Signature& a, const Signature& b);

struct BasicProgram {
  enum class Tag { Initially, Effect, Precondition, Fairness, Frame };
  Tag tag = Tag::Initially;
  std::string agent;
  Formula formula;          // Initially psi / Precondition phi / Fairness phi
  Kind kind;                // Effect trigger
  std::vector<Kind> kinds;  // Frame list L
  std::string var;          // Effect / Frame target (may be a msg var)
  Term term;                // Effect right-hand side
  std::string action;       // Precondition / Fairness

  bool operator==(const BasicProgram& o) const;
};

BasicProgram pg_initially(const std::string& agent, Formula psi);
BasicProgram pg_effect(const std::string& agent, Kind k, const std::string& var, Term t);
BasicProgram pg_precondition(const std::string& agent, const std::string& action, Formula phi);
BasicProgram pg_fairness(const std::string& agent, Formula phi, const std::string& action);
BasicProgram pg_frame(const std::string& agent, std::vector<Kind> kinds, const std::string& var);

std::string to_string(const BasicProgram& bp);

// Nonrigid constant defined as the least n <= bound for which psi(n) fails,
// Omega if there is none; psi may contain Know operators and is resolved
// against a system by the epistemics evaluator.
struct DefinedConstant {
  std::string name;
  std::string agent;
  std::string var;    // parameter variable inside psi
  uint64_t bound = 0;
  Formula psi;

  bool operator==(const DefinedConstant& o) const;
};

struct MessageAutomaton {
  Signature sig;
  std::vector<BasicProgram> members;  // multiset; order preserved from input
  bool is_kb = false;
  std::vector<DefinedConstant> defined;

  const DefinedConstant* constant(const std::string& name) const;
};

using KbAutomaton = MessageAutomaton;

MessageAutomaton compose(const MessageAutomaton& p1, const MessageAutomaton& p2);
// Multiset equality of members plus signature equality.
bool same_members(const MessageAutomaton& a, const MessageAutomaton& b);

// Default interpretation extended with the automaton's variable ownership and
// a placeholder for each defined constant (owned, nonrigid, unresolvable
// outside the epistemics evaluator).
Interpretation interpretation_for(const MessageAutomaton& a);

enum class FairnessMode { exact, window };

struct ConsistencyOptions {
  FairnessMode fairness = FairnessMode::exact;
  int window = 4;  // used by FairnessMode::window
};

struct Verdict {
  bool ok = true;
  std::vector<Violation> violations;
};

// Global state placing `local` at `agent` and every other agent at its
// initstate; clause formulas are i-formulas, so the filler is immaterial.
GlobalState context_of(const EventStructure& es, const std::string& agent,
                       const LocalState& local);
// Before-state context of an event.
GlobalState before_context(const EventStructure& es, int eid);
// Before-state context with val overridden to the event's value; the state
// effect terms are evaluated in.
GlobalState effect_context(const EventStructure& es, int eid);
GlobalState after_context(const EventStructure& es, int eid);

Verdict consistent(const Interpretation& i, const MessageAutomaton& pg,
                   const EventStructure& es, const ConsistencyOptions& opt = {});

struct Specification {
  std::string tag;
  std::function<bool(const EventStructure&, std::string* why)> pred;

  bool check(const EventStructure& es, std::string* why = nullptr) const {
    return pred(es, why);
  }
};

Specification spec_true(const std::string& tag);
Specification spec_all(const std::string& tag, std::vector<Specification> parts);
Specification spec_implies(const std::string& tag, Specification antecedent,
                           Specification consequent);

Specification axiom_spec(const Interpretation& i, const BasicProgram& bp);
Specification derive_spec(const Interpretation& i, const MessageAutomaton& pg);

// Safety half of Fair_I: every value received on the link is t evaluated at
// the state before its send, where phi also held.
Specification fair_i_safety_spec(const Interpretation& i, const Formula& phi,
                                 const Term& t, const std::string& link);
// Liveness half, finite reading; obligations with fewer than `window` send
// events at-or-after them are exempt (window 0 = none exempt).
Specification fair_i_liveness_spec(const Interpretation& i, const Formula& phi,
                                   const Term& t, const std::string& link, int window);
Specification fair_i_spec(const Interpretation& i, const Formula& phi, const Term& t,
                          const std::string& link, int window);

// The four-member fair sender program for the link's source agent:
// precondition phi on the action, effect msg(link) := t, frame "only the
// action affects msg(link)", fairness phi -> eventually the action.
// NotLocalFormula if phi/t are not local to the source agent under i.
MessageAutomaton build_fair_pg(const Interpretation& i, const Signature& sig,
                               const Formula& phi, const Term& t,
                               const std::string& link, const std::string& action);

}  // namespace ew
