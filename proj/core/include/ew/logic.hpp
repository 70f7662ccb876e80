#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ew/state.hpp"

namespace ew {

struct Term {
  enum class Tag { Var, ValConst, Lit, App, PairT, IndexApply };
  Tag tag = Tag::Lit;
  std::string name;         // Var name / ValConst agent / App function symbol
  Value lit;                // Lit payload
  std::vector<Term> kids;   // App args, PairT two, IndexApply two

  bool operator==(const Term& o) const;
  bool operator!=(const Term& o) const { return !(*this == o); }
};

Term t_var(const std::string& name);
Term t_val(const std::string& agent);
Term t_lit(Value v);
Term t_app(const std::string& fn, std::vector<Term> args);
Term t_pair(Term a, Term b);
Term t_idx(Term seq, Term index);
Term t_nat(uint64_t n);

struct Formula {
  enum class Tag {
    Atom, Eq, Lt, Not, And, Or, Implies,
    ForAll, Exists, Know, Always, Eventually
  };
  Tag tag = Tag::Atom;
  std::string name;            // Atom predicate / quantifier variable / Know agent
  std::vector<Term> args;      // Atom args; Eq and Lt use two args
  std::vector<Formula> kids;   // connective children; quantifier [guard, body] or [body]
  bool has_range = false;
  std::vector<Value> range;    // declared finite range for a quantifier

  bool operator==(const Formula& o) const;
  bool operator!=(const Formula& o) const { return !(*this == o); }
};

Formula f_atom(const std::string& pred, std::vector<Term> args);
Formula f_true();
Formula f_false();
Formula f_eq(Term a, Term b);
Formula f_lt(Term a, Term b);
Formula f_not(Formula f);
Formula f_and(std::vector<Formula> fs);
Formula f_or(std::vector<Formula> fs);
Formula f_implies(Formula a, Formula b);
// Quantifier with a syntactic guard formula (evaluated as part of the semantics).
Formula f_forall(const std::string& var, Formula guard, Formula body);
Formula f_exists(const std::string& var, Formula guard, Formula body);
// Quantifier with an explicit finite range.
Formula f_forall_range(const std::string& var, std::vector<Value> range, Formula body);
Formula f_exists_range(const std::string& var, std::vector<Value> range, Formula body);
Formula f_know(const std::string& agent, Formula body);
Formula f_always(Formula body);
Formula f_eventually(Formula body);

bool is_modal(const Formula& f);  // contains Know/Always/Eventually

struct Interpretation {
  struct Fn {
    int arity = 0;
    bool rigid = true;
    std::function<Value(const std::vector<Value>&, const GlobalState&)> eval;
  };
  struct Pred {
    int arity = 0;
    bool rigid = true;
    std::function<bool(const std::vector<Value>&, const GlobalState&)> eval;
  };
  std::map<std::string, Fn> fns;
  std::map<std::string, Pred> preds;
  // Which agent owns each local variable; filled from an automaton signature.
  std::map<std::string, std::string> var_owner;
  // Owner agent of nonrigid symbols (defined constants, instantiated tables);
  // such a symbol counts as local to its owner for classification.
  std::map<std::string, std::string> sym_owner;

  bool has_fn(const std::string& s) const { return fns.count(s) > 0; }
  bool has_pred(const std::string& s) const { return preds.count(s) > 0; }
};

// plus, inc, dec, pair, proj1, proj2, idx, snoc, len, ite, eq, lt, andb, orb, notb
// preds: true, false. All rigid.
Interpretation default_interpretation();

using Valuation = std::map<std::string, Value>;

Value eval_term(const Interpretation& i, const Valuation& v, const GlobalState& s,
                const Term& t);
bool eval_formula_nonmodal(const Interpretation& i, const Valuation& v,
                           const GlobalState& s, const Formula& f);

// Resolves a quantifier node to the finite list of candidate values for its
// variable, or fails with UnboundedQuantifier.
std::vector<Value> quantifier_range(const Interpretation& i, const Valuation& v,
                                    const GlobalState& s, const Formula& q);

// Modal elimination. Know/Always/Eventually become quantification over
// reserved "@cut"-prefixed variables guarded by reserved "@"-atoms that the
// epistemics evaluator interprets; non-modal formulas map to themselves.
Formula translate(const Formula& f);

inline const std::string kCutVarPrefix = "@cut";
inline const std::string kLsEqAtom = "@ls-eq";    // (c, c', agent): same agent-local state
inline const std::string kCutGeAtom = "@cut-ge";  // (c', c): same structure and c' above c

bool classify_i_formula(const Interpretation& i, const Formula& f, const std::string& agent);
bool classify_i_term(const Interpretation& i, const Term& t, const std::string& agent);

std::string to_string(const Term& t);
std::string to_string(const Formula& f);

}  // namespace ew
