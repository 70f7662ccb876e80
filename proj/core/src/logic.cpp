#include "ew/logic.hpp"

#include <algorithm>

namespace ew {

bool Term::operator==(const Term& o) const {
  return tag == o.tag && name == o.name && lit == o.lit && kids == o.kids;
}

Term t_var(const std::string& name) {
  Term t; t.tag = Term::Tag::Var; t.name = name; return t;
}
Term t_val(const std::string& agent) {
  Term t; t.tag = Term::Tag::ValConst; t.name = agent; return t;
}
Term t_lit(Value v) {
  Term t; t.tag = Term::Tag::Lit; t.lit = std::move(v); return t;
}
Term t_app(const std::string& fn, std::vector<Term> args) {
  Term t; t.tag = Term::Tag::App; t.name = fn; t.kids = std::move(args); return t;
}
Term t_pair(Term a, Term b) {
  Term t; t.tag = Term::Tag::PairT; t.kids = {std::move(a), std::move(b)}; return t;
}
Term t_idx(Term seq, Term index) {
  Term t; t.tag = Term::Tag::IndexApply; t.kids = {std::move(seq), std::move(index)};
  return t;
}
Term t_nat(uint64_t n) { return t_lit(v_nat(n)); }

bool Formula::operator==(const Formula& o) const {
  return tag == o.tag && name == o.name && args == o.args && kids == o.kids &&
         has_range == o.has_range && range == o.range;
}

Formula f_atom(const std::string& pred, std::vector<Term> args) {
  Formula f; f.tag = Formula::Tag::Atom; f.name = pred; f.args = std::move(args);
  return f;
}
Formula f_true() { return f_atom("true", {}); }
Formula f_false() { return f_atom("false", {}); }
Formula f_eq(Term a, Term b) {
  Formula f; f.tag = Formula::Tag::Eq; f.args = {std::move(a), std::move(b)}; return f;
}
Formula f_lt(Term a, Term b) {
  Formula f; f.tag = Formula::Tag::Lt; f.args = {std::move(a), std::move(b)}; return f;
}
Formula f_not(Formula f) {
  Formula r; r.tag = Formula::Tag::Not; r.kids = {std::move(f)}; return r;
}
Formula f_and(std::vector<Formula> fs) {
  Formula r; r.tag = Formula::Tag::And; r.kids = std::move(fs); return r;
}
Formula f_or(std::vector<Formula> fs) {
  Formula r; r.tag = Formula::Tag::Or; r.kids = std::move(fs); return r;
}
Formula f_implies(Formula a, Formula b) {
  Formula r; r.tag = Formula::Tag::Implies; r.kids = {std::move(a), std::move(b)};
  return r;
}
Formula f_forall(const std::string& var, Formula guard, Formula body) {
  Formula r; r.tag = Formula::Tag::ForAll; r.name = var;
  r.kids = {std::move(guard), std::move(body)};
  return r;
}
Formula f_exists(const std::string& var, Formula guard, Formula body) {
  Formula r = f_forall(var, std::move(guard), std::move(body));
  r.tag = Formula::Tag::Exists;
  return r;
}
Formula f_forall_range(const std::string& var, std::vector<Value> range, Formula body) {
  Formula r; r.tag = Formula::Tag::ForAll; r.name = var; r.kids = {std::move(body)};
  r.has_range = true; r.range = std::move(range);
  return r;
}
Formula f_exists_range(const std::string& var, std::vector<Value> range, Formula body) {
  Formula r = f_forall_range(var, std::move(range), std::move(body));
  r.tag = Formula::Tag::Exists;
  return r;
}
Formula f_know(const std::string& agent, Formula body) {
  Formula r; r.tag = Formula::Tag::Know; r.name = agent; r.kids = {std::move(body)};
  return r;
}
Formula f_always(Formula body) {
  Formula r; r.tag = Formula::Tag::Always; r.kids = {std::move(body)}; return r;
}
Formula f_eventually(Formula body) {
  Formula r; r.tag = Formula::Tag::Eventually; r.kids = {std::move(body)}; return r;
}

bool is_modal(const Formula& f) {
  if (f.tag == Formula::Tag::Know || f.tag == Formula::Tag::Always ||
      f.tag == Formula::Tag::Eventually)
    return true;
  return std::any_of(f.kids.begin(), f.kids.end(),
                     [](const Formula& k) { return is_modal(k); });
}

namespace {

bool numeric(const Value& v) {
  return v.tag == Value::Tag::Nat || v.tag == Value::Tag::Bit;
}

bool lt_values(const Value& a, const Value& b) {
  // Omega compares below nothing and above nothing.
  if (a.tag == Value::Tag::Omega || b.tag == Value::Tag::Omega) return false;
  if (numeric(a) && numeric(b)) return a.nat < b.nat;
  return false;
}

bool le_values(const Value& a, const Value& b) {
  if (a.tag == Value::Tag::Omega || b.tag == Value::Tag::Omega) return false;
  return a == b || lt_values(a, b);
}

}  // namespace

Interpretation default_interpretation() {
  Interpretation i;
  auto fn = [&](const std::string& name, int arity,
                std::function<Value(const std::vector<Value>&)> f) {
    Interpretation::Fn e;
    e.arity = arity;
    e.rigid = true;
    e.eval = [f = std::move(f)](const std::vector<Value>& a, const GlobalState&) {
      return f(a);
    };
    i.fns[name] = std::move(e);
  };
  fn("plus", 2, [](const std::vector<Value>& a) {
    if (a[0].tag == Value::Tag::Omega || a[1].tag == Value::Tag::Omega) return v_omega();
    if (numeric(a[0]) && numeric(a[1])) return v_nat(a[0].nat + a[1].nat);
    fail("TypeMismatch", "plus on non-numeric values");
  });
  fn("inc", 1, [](const std::vector<Value>& a) {
    if (a[0].tag == Value::Tag::Omega) return v_omega();
    if (numeric(a[0])) return v_nat(a[0].nat + 1);
    fail("TypeMismatch", "inc on non-numeric value");
  });
  fn("dec", 1, [](const std::vector<Value>& a) {
    if (a[0].tag == Value::Tag::Omega) return v_omega();
    if (numeric(a[0])) return v_nat(a[0].nat > 0 ? a[0].nat - 1 : 0);
    fail("TypeMismatch", "dec on non-numeric value");
  });
  fn("proj1", 1, [](const std::vector<Value>& a) {
    return a[0].tag == Value::Tag::Pair ? a[0].kids[0] : v_bottom();
  });
  fn("proj2", 1, [](const std::vector<Value>& a) {
    return a[0].tag == Value::Tag::Pair ? a[0].kids[1] : v_bottom();
  });
  fn("snoc", 2, [](const std::vector<Value>& a) {
    if (a[0].tag != Value::Tag::Seq) fail("TypeMismatch", "snoc on non-sequence");
    Value s = a[0];
    s.kids.push_back(a[1]);
    return s;
  });
  fn("len", 1, [](const std::vector<Value>& a) {
    if (a[0].tag != Value::Tag::Seq) fail("TypeMismatch", "len on non-sequence");
    return v_nat(a[0].kids.size());
  });
  fn("ite", 3, [](const std::vector<Value>& a) {
    if (a[0].tag != Value::Tag::Bool) fail("TypeMismatch", "ite condition not a bool");
    return a[0].b ? a[1] : a[2];
  });
  fn("eq", 2, [](const std::vector<Value>& a) { return v_bool(a[0] == a[1]); });
  fn("lt", 2, [](const std::vector<Value>& a) { return v_bool(lt_values(a[0], a[1])); });
  fn("andb", 2, [](const std::vector<Value>& a) {
    if (a[0].tag != Value::Tag::Bool || a[1].tag != Value::Tag::Bool)
      fail("TypeMismatch", "andb on non-bool");
    return v_bool(a[0].b && a[1].b);
  });
  fn("orb", 2, [](const std::vector<Value>& a) {
    if (a[0].tag != Value::Tag::Bool || a[1].tag != Value::Tag::Bool)
      fail("TypeMismatch", "orb on non-bool");
    return v_bool(a[0].b || a[1].b);
  });
  fn("notb", 1, [](const std::vector<Value>& a) {
    if (a[0].tag != Value::Tag::Bool) fail("TypeMismatch", "notb on non-bool");
    return v_bool(!a[0].b);
  });

  auto pred = [&](const std::string& name, int arity,
                  std::function<bool(const std::vector<Value>&)> p) {
    Interpretation::Pred e;
    e.arity = arity;
    e.rigid = true;
    e.eval = [p = std::move(p)](const std::vector<Value>& a, const GlobalState&) {
      return p(a);
    };
    i.preds[name] = std::move(e);
  };
  pred("true", 0, [](const std::vector<Value>&) { return true; });
  pred("false", 0, [](const std::vector<Value>&) { return false; });
  pred("<=", 2, [](const std::vector<Value>& a) { return le_values(a[0], a[1]); });
  return i;
}

Value eval_term(const Interpretation& i, const Valuation& v, const GlobalState& s,
                const Term& t) {
  switch (t.tag) {
    case Term::Tag::Lit: return t.lit;
    case Term::Tag::Var: {
      auto it = v.find(t.name);
      if (it != v.end()) return it->second;
      auto owner = i.var_owner.find(t.name);
      if (owner == i.var_owner.end())
        fail("UnboundVariable", "variable '" + t.name + "' has no binding or owner");
      auto st = s.find(owner->second);
      if (st == s.end())
        fail("UnboundVariable", "no local state for agent '" + owner->second + "'");
      return st->second.get(t.name);
    }
    case Term::Tag::ValConst: {
      auto st = s.find(t.name);
      if (st == s.end()) fail("UnboundVariable", "no local state for agent '" + t.name + "'");
      return st->second.get(kValVar);
    }
    case Term::Tag::PairT:
      return v_pair(eval_term(i, v, s, t.kids[0]), eval_term(i, v, s, t.kids[1]));
    case Term::Tag::IndexApply: {
      Value seq = eval_term(i, v, s, t.kids[0]);
      Value idx = eval_term(i, v, s, t.kids[1]);
      if (seq.tag != Value::Tag::Seq)
        fail("TypeMismatch", "indexing a non-sequence: " + to_string(seq));
      if (!numeric(idx) || idx.nat >= seq.kids.size()) return v_bottom();
      return seq.kids[idx.nat];
    }
    case Term::Tag::App: {
      auto fit = i.fns.find(t.name);
      if (fit == i.fns.end())
        fail("UndeclaredSymbol", "function symbol '" + t.name + "'");
      if (static_cast<int>(t.kids.size()) != fit->second.arity)
        fail("TypeMismatch", "arity of '" + t.name + "'");
      std::vector<Value> args;
      args.reserve(t.kids.size());
      for (const Term& k : t.kids) args.push_back(eval_term(i, v, s, k));
      return fit->second.eval(args, s);
    }
  }
  fail("TypeMismatch", "unreachable term tag");
}

std::vector<Value> quantifier_range(const Interpretation& i, const Valuation& v,
                                    const GlobalState& s, const Formula& q) {
  if (q.has_range) return q.range;
  if (q.kids.size() != 2)
    fail("UnboundedQuantifier", "quantifier on '" + q.name + "' has no range or guard");
  const Formula& g = q.kids[0];
  bool strict;
  if (g.tag == Formula::Tag::Lt) {
    strict = true;
  } else if (g.tag == Formula::Tag::Atom && g.name == "<=") {
    strict = false;
  } else {
    fail("UnboundedQuantifier",
         "guard of quantifier on '" + q.name + "' is not (< v t) or (<= v t)");
  }
  if (g.args.size() != 2 || g.args[0].tag != Term::Tag::Var || g.args[0].name != q.name)
    fail("UnboundedQuantifier", "guard must bound the quantified variable '" + q.name + "'");
  Value bound = eval_term(i, v, s, g.args[1]);
  if (bound.tag == Value::Tag::Omega) return {};  // nothing lies below omega
  if (!numeric(bound))
    fail("UnboundedQuantifier", "guard bound is not a number: " + to_string(bound));
  uint64_t hi = bound.nat + (strict ? 0 : 1);
  std::vector<Value> out;
  out.reserve(hi);
  for (uint64_t n = 0; n < hi; ++n) out.push_back(v_nat(n));
  return out;
}

bool eval_formula_nonmodal(const Interpretation& i, const Valuation& v,
                           const GlobalState& s, const Formula& f) {
  switch (f.tag) {
    case Formula::Tag::Atom: {
      auto pit = i.preds.find(f.name);
      if (pit == i.preds.end())
        fail("UndeclaredSymbol", "predicate symbol '" + f.name + "'");
      if (static_cast<int>(f.args.size()) != pit->second.arity)
        fail("TypeMismatch", "arity of predicate '" + f.name + "'");
      std::vector<Value> args;
      for (const Term& t : f.args) args.push_back(eval_term(i, v, s, t));
      return pit->second.eval(args, s);
    }
    case Formula::Tag::Eq:
      return eval_term(i, v, s, f.args[0]) == eval_term(i, v, s, f.args[1]);
    case Formula::Tag::Lt:
      return lt_values(eval_term(i, v, s, f.args[0]), eval_term(i, v, s, f.args[1]));
    case Formula::Tag::Not:
      return !eval_formula_nonmodal(i, v, s, f.kids[0]);
    case Formula::Tag::And:
      for (const Formula& k : f.kids)
        if (!eval_formula_nonmodal(i, v, s, k)) return false;
      return true;
    case Formula::Tag::Or:
      for (const Formula& k : f.kids)
        if (eval_formula_nonmodal(i, v, s, k)) return true;
      return false;
    case Formula::Tag::Implies:
      return !eval_formula_nonmodal(i, v, s, f.kids[0]) ||
             eval_formula_nonmodal(i, v, s, f.kids[1]);
    case Formula::Tag::ForAll:
    case Formula::Tag::Exists: {
      bool universal = f.tag == Formula::Tag::ForAll;
      std::vector<Value> range = quantifier_range(i, v, s, f);
      const Formula* guard = f.has_range ? nullptr : &f.kids[0];
      const Formula& body = f.has_range ? f.kids[0] : f.kids[1];
      Valuation v2 = v;
      for (const Value& val : range) {
        v2[f.name] = val;
        bool g = guard ? eval_formula_nonmodal(i, v2, s, *guard) : true;
        if (universal) {
          if (g && !eval_formula_nonmodal(i, v2, s, body)) return false;
        } else {
          if (g && eval_formula_nonmodal(i, v2, s, body)) return true;
        }
      }
      return universal;
    }
    case Formula::Tag::Know:
    case Formula::Tag::Always:
    case Formula::Tag::Eventually:
      fail("ModalOperatorPresent", "modal operator in non-modal evaluation");
  }
  fail("TypeMismatch", "unreachable formula tag");
}

namespace {

Formula translate_at(const Formula& f, int depth) {
  std::string cur = depth == 0 ? kCutVarPrefix : kCutVarPrefix + std::to_string(depth);
  switch (f.tag) {
    case Formula::Tag::Know: {
      std::string next = kCutVarPrefix + std::to_string(depth + 1);
      Formula guard = f_atom(kLsEqAtom, {t_var(cur), t_var(next), t_lit(v_agent(f.name))});
      return f_forall(next, std::move(guard), translate_at(f.kids[0], depth + 1));
    }
    case Formula::Tag::Always:
    case Formula::Tag::Eventually: {
      std::string next = kCutVarPrefix + std::to_string(depth + 1);
      Formula guard = f_atom(kCutGeAtom, {t_var(next), t_var(cur)});
      Formula body = translate_at(f.kids[0], depth + 1);
      return f.tag == Formula::Tag::Always
                 ? f_forall(next, std::move(guard), std::move(body))
                 : f_exists(next, std::move(guard), std::move(body));
    }
    default: {
      Formula r = f;
      r.kids.clear();
      for (const Formula& k : f.kids) r.kids.push_back(translate_at(k, depth));
      return r;
    }
  }
}

}  // namespace

Formula translate(const Formula& f) { return translate_at(f, 0); }

namespace {

bool term_local(const Interpretation& i, const Term& t, const std::string& agent,
                const std::set<std::string>& bound) {
  switch (t.tag) {
    case Term::Tag::Lit: return true;
    case Term::Tag::ValConst: return t.name == agent;
    case Term::Tag::Var: {
      if (bound.count(t.name)) return true;
      auto it = i.var_owner.find(t.name);
      return it != i.var_owner.end() && it->second == agent;
    }
    case Term::Tag::PairT:
    case Term::Tag::IndexApply:
      return term_local(i, t.kids[0], agent, bound) &&
             term_local(i, t.kids[1], agent, bound);
    case Term::Tag::App: {
      auto fit = i.fns.find(t.name);
      if (fit == i.fns.end()) return false;
      if (!fit->second.rigid) {
        auto o = i.sym_owner.find(t.name);
        if (o == i.sym_owner.end() || o->second != agent) return false;
      }
      return std::all_of(t.kids.begin(), t.kids.end(), [&](const Term& k) {
        return term_local(i, k, agent, bound);
      });
    }
  }
  return false;
}

bool formula_local(const Interpretation& i, const Formula& f, const std::string& agent,
                   std::set<std::string>& bound) {
  switch (f.tag) {
    case Formula::Tag::Know: return f.name == agent;
    // Temporal wrappers take the locality of their body; initialization
    // clauses of knowledge-based programs box an i-formula constraint.
    case Formula::Tag::Always:
    case Formula::Tag::Eventually:
      return formula_local(i, f.kids[0], agent, bound);
    case Formula::Tag::Atom: {
      auto pit = i.preds.find(f.name);
      if (pit == i.preds.end()) return false;
      if (!pit->second.rigid) {
        auto o = i.sym_owner.find(f.name);
        if (o == i.sym_owner.end() || o->second != agent) return false;
      }
      return std::all_of(f.args.begin(), f.args.end(), [&](const Term& t) {
        return term_local(i, t, agent, bound);
      });
    }
    case Formula::Tag::Eq:
    case Formula::Tag::Lt:
      return term_local(i, f.args[0], agent, bound) &&
             term_local(i, f.args[1], agent, bound);
    case Formula::Tag::Not:
    case Formula::Tag::And:
    case Formula::Tag::Or:
    case Formula::Tag::Implies:
      return std::all_of(f.kids.begin(), f.kids.end(), [&](const Formula& k) {
        return formula_local(i, k, agent, bound);
      });
    case Formula::Tag::ForAll:
    case Formula::Tag::Exists: {
      bool fresh = bound.insert(f.name).second;
      bool ok = std::all_of(f.kids.begin(), f.kids.end(), [&](const Formula& k) {
        return formula_local(i, k, agent, bound);
      });
      if (fresh) bound.erase(f.name);
      return ok;
    }
  }
  return false;
}

}  // namespace

bool classify_i_formula(const Interpretation& i, const Formula& f, const std::string& agent) {
  std::set<std::string> bound;
  return formula_local(i, f, agent, bound);
}

bool classify_i_term(const Interpretation& i, const Term& t, const std::string& agent) {
  return term_local(i, t, agent, {});
}

std::string to_string(const Term& t) {
  switch (t.tag) {
    case Term::Tag::Var: return t.name;
    case Term::Tag::ValConst: return "(val " + t.name + ")";
    case Term::Tag::Lit: return to_string(t.lit);
    case Term::Tag::PairT: return "(pair " + to_string(t.kids[0]) + " " + to_string(t.kids[1]) + ")";
    case Term::Tag::IndexApply:
      return "(idx " + to_string(t.kids[0]) + " " + to_string(t.kids[1]) + ")";
    case Term::Tag::App: {
      std::string s = "(" + t.name;
      for (const Term& k : t.kids) s += " " + to_string(k);
      return s + ")";
    }
  }
  return "?";
}

std::string to_string(const Formula& f) {
  auto join_kids = [&](const std::string& head) {
    std::string s = "(" + head;
    for (const Formula& k : f.kids) s += " " + to_string(k);
    return s + ")";
  };
  switch (f.tag) {
    case Formula::Tag::Atom: {
      if (f.args.empty()) return f.name == "true" || f.name == "false" ? f.name : "(" + f.name + ")";
      std::string s = "(" + f.name;
      for (const Term& t : f.args) s += " " + to_string(t);
      return s + ")";
    }
    case Formula::Tag::Eq:
      return "(= " + to_string(f.args[0]) + " " + to_string(f.args[1]) + ")";
    case Formula::Tag::Lt:
      return "(< " + to_string(f.args[0]) + " " + to_string(f.args[1]) + ")";
    case Formula::Tag::Not: return join_kids("not");
    case Formula::Tag::And: return join_kids("and");
    case Formula::Tag::Or: return join_kids("or");
    case Formula::Tag::Implies: return join_kids("=>");
    case Formula::Tag::ForAll:
    case Formula::Tag::Exists: {
      std::string head = f.tag == Formula::Tag::ForAll ? "forall" : "exists";
      std::string s = "(" + head + " " + f.name + " ";
      if (f.has_range) {
        s += "(range";
        for (const Value& v : f.range) s += " " + to_string(v);
        s += ") " + to_string(f.kids[0]);
      } else {
        s += to_string(f.kids[0]) + " " + to_string(f.kids[1]);
      }
      return s + ")";
    }
    case Formula::Tag::Know: return "(K " + f.name + " " + to_string(f.kids[0]) + ")";
    case Formula::Tag::Always: return join_kids("box");
    case Formula::Tag::Eventually: return join_kids("dia");
  }
  return "?";
}

}  // namespace ew
