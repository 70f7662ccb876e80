#include "ew/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"

namespace ew {

namespace {

// --- s-expression tokens ---------------------------------------------------

struct Tok {
  std::string text;
  size_t pos = 0;
};

bool punct(char c) {
  return c == '(' || c == ')' || c == '[' || c == ']' || c == ',';
}

std::vector<Tok> tokenize(const std::string& s) {
  std::vector<Tok> out;
  size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (punct(c)) {
      out.push_back({std::string(1, c), i});
      ++i;
      continue;
    }
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])) &&
           !punct(s[j]))
      ++j;
    out.push_back({s.substr(i, j - i), i});
    i = j;
  }
  return out;
}

struct Cursor {
  const std::vector<Tok>* toks;
  size_t i = 0;

  bool done() const { return i >= toks->size(); }
  const std::string& peek(size_t ahead = 0) const {
    static const std::string none;
    return i + ahead < toks->size() ? (*toks)[i + ahead].text : none;
  }
  [[noreturn]] void err(const std::string& what) const {
    size_t pos = i < toks->size() ? (*toks)[i].pos : std::string::npos;
    std::string at = pos == std::string::npos ? "end of input"
                                              : "offset " + std::to_string(pos);
    fail("ParseError", what + " at " + at);
  }
  std::string next() {
    if (done()) err("unexpected end of input");
    return (*toks)[i++].text;
  }
  void expect(const std::string& t) {
    if (peek() != t) err("expected '" + t + "'");
    ++i;
  }
};

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isdigit(c);
  });
}

bool value_atom(const std::string& s) {
  return all_digits(s) || s == "true" || s == "false" || s == "bot" ||
         s == "omega" || s == "bit:0" || s == "bit:1" ||
         (!s.empty() && s[0] == '@');
}

Value parse_value_at(Cursor& c);

Value parse_value_atom(Cursor& c, const std::string& t) {
  if (all_digits(t)) return v_nat(std::stoull(t));
  if (t == "true") return v_bool(true);
  if (t == "false") return v_bool(false);
  if (t == "bot") return v_bottom();
  if (t == "omega") return v_omega();
  if (t == "bit:0") return v_bit(0);
  if (t == "bit:1") return v_bit(1);
  if (!t.empty() && t[0] == '@') return v_agent(t.substr(1));
  c.err("expected a value, got '" + t + "'");
}

Value parse_value_at(Cursor& c) {
  if (c.peek() == "(") {
    c.next();
    Value a = parse_value_at(c);
    c.expect(",");
    Value b = parse_value_at(c);
    c.expect(")");
    return v_pair(std::move(a), std::move(b));
  }
  if (c.peek() == "[") {
    c.next();
    std::vector<Value> kids;
    if (c.peek() != "]") {
      kids.push_back(parse_value_at(c));
      while (c.peek() == ",") {
        c.next();
        kids.push_back(parse_value_at(c));
      }
    }
    c.expect("]");
    return v_seq(std::move(kids));
  }
  std::string t = c.next();
  return parse_value_atom(c, t);
}

// --- terms and formulas ----------------------------------------------------

Term parse_term_at(Cursor& c);

std::string ident(Cursor& c, const std::string& what) {
  if (c.done() || punct(c.peek()[0])) c.err("expected " + what);
  return c.next();
}

Term parse_term_at(Cursor& c) {
  const std::string& t = c.peek();
  if (t == "[") return t_lit(parse_value_at(c));
  if (t == "(") {
    // A pair value like (0,1) nests values, never an identifier head.
    if (c.peek(1) == "(" || c.peek(1) == "[" || c.peek(2) == ",")
      return t_lit(parse_value_at(c));
    c.next();
    std::string head = ident(c, "a term head");
    if (head == "val") {
      std::string agent = ident(c, "an agent name");
      c.expect(")");
      return t_val(agent);
    }
    if (head == "pair") {
      Term a = parse_term_at(c);
      Term b = parse_term_at(c);
      c.expect(")");
      return t_pair(std::move(a), std::move(b));
    }
    if (head == "idx") {
      Term a = parse_term_at(c);
      Term b = parse_term_at(c);
      c.expect(")");
      return t_idx(std::move(a), std::move(b));
    }
    std::vector<Term> args;
    while (c.peek() != ")") {
      if (c.done()) c.err("unterminated application");
      args.push_back(parse_term_at(c));
    }
    c.next();
    return t_app(head, std::move(args));
  }
  if (value_atom(t)) return t_lit(parse_value_at(c));
  return t_var(c.next());
}

Formula parse_formula_at(Cursor& c) {
  const std::string& t = c.peek();
  if (t == "true") {
    c.next();
    return f_true();
  }
  if (t == "false") {
    c.next();
    return f_false();
  }
  if (t != "(") c.err("expected a formula");
  c.next();
  std::string head = ident(c, "a formula head");
  auto finish = [&](Formula f) {
    c.expect(")");
    return f;
  };
  if (head == "=") {
    Term a = parse_term_at(c);
    Term b = parse_term_at(c);
    return finish(f_eq(std::move(a), std::move(b)));
  }
  if (head == "<") {
    Term a = parse_term_at(c);
    Term b = parse_term_at(c);
    return finish(f_lt(std::move(a), std::move(b)));
  }
  if (head == "not") return finish(f_not(parse_formula_at(c)));
  if (head == "and" || head == "or") {
    std::vector<Formula> kids;
    while (c.peek() != ")") {
      if (c.done()) c.err("unterminated connective");
      kids.push_back(parse_formula_at(c));
    }
    return finish(head == "and" ? f_and(std::move(kids)) : f_or(std::move(kids)));
  }
  if (head == "=>") {
    Formula a = parse_formula_at(c);
    Formula b = parse_formula_at(c);
    return finish(f_implies(std::move(a), std::move(b)));
  }
  if (head == "forall" || head == "exists") {
    std::string var = ident(c, "a quantifier variable");
    if (c.peek() == "(" && c.peek(1) == "range") {
      c.next();
      c.next();
      std::vector<Value> range;
      while (c.peek() != ")") {
        if (c.done()) c.err("unterminated range");
        range.push_back(parse_value_at(c));
      }
      c.next();
      Formula body = parse_formula_at(c);
      return finish(head == "forall"
                        ? f_forall_range(var, std::move(range), std::move(body))
                        : f_exists_range(var, std::move(range), std::move(body)));
    }
    Formula guard = parse_formula_at(c);
    Formula body = parse_formula_at(c);
    return finish(head == "forall" ? f_forall(var, std::move(guard), std::move(body))
                                   : f_exists(var, std::move(guard), std::move(body)));
  }
  if (head == "K") {
    std::string agent = ident(c, "an agent name");
    return finish(f_know(agent, parse_formula_at(c)));
  }
  if (head == "box") return finish(f_always(parse_formula_at(c)));
  if (head == "dia") return finish(f_eventually(parse_formula_at(c)));
  std::vector<Term> args;
  while (c.peek() != ")") {
    if (c.done()) c.err("unterminated atom");
    args.push_back(parse_term_at(c));
  }
  c.next();
  return f_atom(head, std::move(args));
}

template <typename T, typename F>
T parse_whole(const std::string& text, const std::string& what, F parse) {
  std::vector<Tok> toks = tokenize(text);
  Cursor c{&toks};
  if (c.done()) fail("ParseError", "empty " + what);
  T out = parse(c);
  if (!c.done()) c.err("trailing input after " + what);
  return out;
}

// --- symbol validation -----------------------------------------------------

size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<size_t> row(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    size_t diag = row[0];
    row[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1,
                         diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

[[noreturn]] void unknown(const std::string& what, const std::string& name,
                          const std::set<std::string>& candidates) {
  std::string best;
  size_t bd = SIZE_MAX;
  for (const std::string& c : candidates) {
    size_t d = edit_distance(name, c);
    if (d < bd || (d == bd && c < best)) {
      bd = d;
      best = c;
    }
  }
  std::string msg = "unknown " + what + " '" + name + "'";
  if (!best.empty()) msg += "; closest match '" + best + "'";
  fail("UnknownSymbol", msg);
}

struct SymTab {
  std::set<std::string> vars, fns, preds, agents;
};

void check_term(const SymTab& st, std::set<std::string>& bound, const Term& t) {
  switch (t.tag) {
    case Term::Tag::Lit:
      return;
    case Term::Tag::Var: {
      if (bound.count(t.name) || st.vars.count(t.name)) return;
      std::set<std::string> cand = st.vars;
      cand.insert(bound.begin(), bound.end());
      unknown("variable", t.name, cand);
    }
    case Term::Tag::ValConst:
      if (!st.agents.count(t.name)) unknown("agent", t.name, st.agents);
      return;
    case Term::Tag::App:
      if (!st.fns.count(t.name)) unknown("function", t.name, st.fns);
      [[fallthrough]];
    case Term::Tag::PairT:
    case Term::Tag::IndexApply:
      for (const Term& k : t.kids) check_term(st, bound, k);
      return;
  }
}

void check_formula(const SymTab& st, std::set<std::string>& bound,
                   const Formula& f) {
  switch (f.tag) {
    case Formula::Tag::Atom:
      if (!st.preds.count(f.name)) unknown("predicate", f.name, st.preds);
      [[fallthrough]];
    case Formula::Tag::Eq:
    case Formula::Tag::Lt:
      for (const Term& a : f.args) check_term(st, bound, a);
      return;
    case Formula::Tag::ForAll:
    case Formula::Tag::Exists: {
      bool fresh = bound.insert(f.name).second;
      for (const Formula& k : f.kids) check_formula(st, bound, k);
      if (fresh) bound.erase(f.name);
      return;
    }
    case Formula::Tag::Know:
      if (!st.agents.count(f.name)) unknown("agent", f.name, st.agents);
      [[fallthrough]];
    default:
      for (const Formula& k : f.kids) check_formula(st, bound, k);
      return;
  }
}

// --- JSON documents --------------------------------------------------------

using json = nlohmann::ordered_json;

std::string kind_str(const Kind& k) {
  return (k.is_rcv ? "rcv:" : "local:") + k.channel;
}

Kind parse_kind(const std::string& s, const std::string& where) {
  if (s.rfind("rcv:", 0) == 0) return Kind{true, s.substr(4)};
  if (s.rfind("local:", 0) == 0) return Kind{false, s.substr(6)};
  fail("ParseError", where + ": bad kind '" + s + "' (want rcv:<link> or local:<action>)");
}

json domain_json(const VarDecl& d) {
  json j;
  switch (d.domain) {
    case VarDecl::Domain::None:
      j["kind"] = "open";
      break;
    case VarDecl::Domain::List: {
      j["kind"] = "list";
      json vals = json::array();
      for (const Value& v : d.values) vals.push_back(to_string(v));
      j["values"] = std::move(vals);
      break;
    }
    case VarDecl::Domain::NatRange:
      j["kind"] = "range";
      j["lo"] = d.lo;
      j["hi"] = d.hi;
      break;
    case VarDecl::Domain::Bits:
      j["kind"] = "bits";
      j["width"] = d.width;
      break;
  }
  return j;
}

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) fail("ParseError", where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail("ParseError", where + ": missing field '" + key + "'");
  return *it;
}

std::string need_str(const json& j, const char* key, const std::string& where) {
  const json& v = need(j, key, where);
  if (!v.is_string()) fail("ParseError", where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

uint64_t need_nat(const json& j, const char* key, const std::string& where) {
  const json& v = need(j, key, where);
  if (!v.is_number_unsigned()) fail("ParseError", where + ": field '" + key + "' must be a non-negative integer");
  return v.get<uint64_t>();
}

void parse_domain(VarDecl& d, const json& jd, const std::string& where);

VarDecl parse_var_decl(const json& jv, const std::string& where) {
  VarDecl d;
  d.name = need_str(jv, "name", where);
  parse_domain(d, need(jv, "domain", where), where);
  if (jv.contains("stable")) {
    if (!jv["stable"].is_boolean()) fail("ParseError", where + ": 'stable' must be a boolean");
    d.stable = jv["stable"].get<bool>();
  }
  if (jv.contains("init")) {
    if (!jv["init"].is_string()) fail("ParseError", where + ": 'init' must be a string");
    d.has_init = true;
    d.init = parse_value(jv["init"].get<std::string>());
  }
  return d;
}

void parse_domain(VarDecl& d, const json& jd, const std::string& where) {
  std::string kind = need_str(jd, "kind", where + ".domain");
  if (kind == "open") {
    d.domain = VarDecl::Domain::None;
  } else if (kind == "list") {
    d.domain = VarDecl::Domain::List;
    const json& vals = need(jd, "values", where + ".domain");
    if (!vals.is_array()) fail("ParseError", where + ".domain: 'values' must be an array");
    for (const json& v : vals) {
      if (!v.is_string()) fail("ParseError", where + ".domain: values must be strings");
      d.values.push_back(parse_value(v.get<std::string>()));
    }
  } else if (kind == "range") {
    d.domain = VarDecl::Domain::NatRange;
    d.lo = need_nat(jd, "lo", where + ".domain");
    d.hi = need_nat(jd, "hi", where + ".domain");
    if (d.hi < d.lo) fail("ParseError", where + ".domain: hi < lo");
  } else if (kind == "bits") {
    d.domain = VarDecl::Domain::Bits;
    d.width = need_nat(jd, "width", where + ".domain");
  } else {
    fail("ParseError", where + ".domain: unknown kind '" + kind + "'");
  }
}

}  // namespace

Term parse_term(const std::string& text) {
  return parse_whole<Term>(text, "term", [](Cursor& c) { return parse_term_at(c); });
}

Formula parse_formula(const std::string& text) {
  return parse_whole<Formula>(text, "formula", [](Cursor& c) { return parse_formula_at(c); });
}

std::string serialize_automaton(const MessageAutomaton& a) {
  json j;
  j["format"] = "automaton";
  j["version"] = 1;
  j["kb"] = a.is_kb;
  j["agents"] = a.sig.agents;
  json links = json::array();
  for (const Link& l : a.sig.links)
    links.push_back({{"name", l.name}, {"source", l.source}, {"dest", l.dest}});
  j["links"] = std::move(links);
  json actions = json::array();
  for (const auto& [name, agent] : a.sig.actions)
    actions.push_back({{"name", name}, {"agent", agent}});
  j["actions"] = std::move(actions);
  json vars = json::array();
  for (const auto& [agent, decls] : a.sig.vars) {
    for (const VarDecl& d : decls) {
      json jv;
      jv["agent"] = agent;
      jv["name"] = d.name;
      jv["domain"] = domain_json(d);
      jv["stable"] = d.stable;
      if (d.has_init) jv["init"] = to_string(d.init);
      vars.push_back(std::move(jv));
    }
  }
  j["vars"] = std::move(vars);
  json doms = json::array();
  for (const auto& [mv, d] : a.sig.msg_domains)
    doms.push_back({{"var", mv}, {"domain", domain_json(d)}});
  j["msg_domains"] = std::move(doms);
  json members = json::array();
  for (const BasicProgram& m : a.members) {
    json jm;
    switch (m.tag) {
      case BasicProgram::Tag::Initially:
        jm["member"] = "initially";
        jm["agent"] = m.agent;
        jm["formula"] = to_string(m.formula);
        break;
      case BasicProgram::Tag::Effect:
        jm["member"] = "effect";
        jm["agent"] = m.agent;
        jm["kind"] = kind_str(m.kind);
        jm["var"] = m.var;
        jm["term"] = to_string(m.term);
        break;
      case BasicProgram::Tag::Precondition:
        jm["member"] = "precondition";
        jm["agent"] = m.agent;
        jm["action"] = m.action;
        jm["formula"] = to_string(m.formula);
        break;
      case BasicProgram::Tag::Fairness:
        jm["member"] = "fairness";
        jm["agent"] = m.agent;
        jm["action"] = m.action;
        jm["formula"] = to_string(m.formula);
        break;
      case BasicProgram::Tag::Frame: {
        jm["member"] = "frame";
        jm["agent"] = m.agent;
        json kinds = json::array();
        for (const Kind& k : m.kinds) kinds.push_back(kind_str(k));
        jm["kinds"] = std::move(kinds);
        jm["var"] = m.var;
        break;
      }
    }
    members.push_back(std::move(jm));
  }
  j["members"] = std::move(members);
  json defined = json::array();
  for (const DefinedConstant& d : a.defined) {
    defined.push_back({{"name", d.name},
                       {"agent", d.agent},
                       {"var", d.var},
                       {"bound", d.bound},
                       {"psi", to_string(d.psi)}});
  }
  j["defined"] = std::move(defined);
  return j.dump(2) + "\n";
}

MessageAutomaton parse_automaton_text(const std::string& doc) {
  json j;
  try {
    j = json::parse(doc);
  } catch (const json::parse_error& e) {
    fail("ParseError", e.what());
  }
  if (!j.is_object()) fail("ParseError", "top level: expected an object");

  MessageAutomaton a;
  const json& agents = need(j, "agents", "top level");
  if (!agents.is_array()) fail("ParseError", "'agents' must be an array");
  for (const json& v : agents) {
    if (!v.is_string()) fail("ParseError", "'agents' entries must be strings");
    a.sig.agents.push_back(v.get<std::string>());
  }
  std::sort(a.sig.agents.begin(), a.sig.agents.end());
  if (std::adjacent_find(a.sig.agents.begin(), a.sig.agents.end()) !=
      a.sig.agents.end())
    fail("ParseError", "duplicate agent name");
  std::set<std::string> agent_set(a.sig.agents.begin(), a.sig.agents.end());

  if (j.contains("links")) {
    const json& links = j["links"];
    if (!links.is_array()) fail("ParseError", "'links' must be an array");
    for (size_t k = 0; k < links.size(); ++k) {
      std::string where = "links[" + std::to_string(k) + "]";
      Link l;
      l.name = need_str(links[k], "name", where);
      l.source = need_str(links[k], "source", where);
      l.dest = need_str(links[k], "dest", where);
      if (!agent_set.count(l.source)) unknown("agent", l.source, agent_set);
      if (!agent_set.count(l.dest)) unknown("agent", l.dest, agent_set);
      a.sig.links.push_back(std::move(l));
    }
  }
  std::set<std::string> link_set;
  for (const Link& l : a.sig.links)
    if (!link_set.insert(l.name).second)
      fail("ParseError", "duplicate link name '" + l.name + "'");

  if (j.contains("actions")) {
    const json& actions = j["actions"];
    if (!actions.is_array()) fail("ParseError", "'actions' must be an array");
    for (size_t k = 0; k < actions.size(); ++k) {
      std::string where = "actions[" + std::to_string(k) + "]";
      std::string name = need_str(actions[k], "name", where);
      std::string agent = need_str(actions[k], "agent", where);
      if (!agent_set.count(agent)) unknown("agent", agent, agent_set);
      if (!a.sig.actions.emplace(name, agent).second)
        fail("ParseError", "duplicate action name '" + name + "'");
    }
  }

  SymTab st;
  st.agents = agent_set;
  if (j.contains("vars")) {
    const json& vars = j["vars"];
    if (!vars.is_array()) fail("ParseError", "'vars' must be an array");
    for (size_t k = 0; k < vars.size(); ++k) {
      std::string where = "vars[" + std::to_string(k) + "]";
      std::string agent = need_str(vars[k], "agent", where);
      if (!agent_set.count(agent)) unknown("agent", agent, agent_set);
      VarDecl d = parse_var_decl(vars[k], where);
      for (const VarDecl& prev : a.sig.vars[agent])
        if (prev.name == d.name)
          fail("ParseError", "duplicate variable '" + d.name + "' on agent " + agent);
      st.vars.insert(d.name);
      a.sig.vars[agent].push_back(std::move(d));
    }
  }
  for (const Link& l : a.sig.links) st.vars.insert(msg_var(l.name));

  if (j.contains("msg_domains")) {
    const json& doms = j["msg_domains"];
    if (!doms.is_array()) fail("ParseError", "'msg_domains' must be an array");
    for (size_t k = 0; k < doms.size(); ++k) {
      std::string where = "msg_domains[" + std::to_string(k) + "]";
      std::string mv = need_str(doms[k], "var", where);
      if (!is_msg_var(mv) || !link_set.count(mv.substr(4)))
        unknown("message variable", mv, st.vars);
      VarDecl d;
      d.name = mv;
      parse_domain(d, need(doms[k], "domain", where), where);
      a.sig.msg_domains[mv] = std::move(d);
    }
  }

  Interpretation builtins = default_interpretation();
  for (const auto& [name, fn] : builtins.fns) st.fns.insert(name);
  for (const auto& [name, p] : builtins.preds) st.preds.insert(name);

  if (j.contains("defined")) {
    const json& defined = j["defined"];
    if (!defined.is_array()) fail("ParseError", "'defined' must be an array");
    for (size_t k = 0; k < defined.size(); ++k) {
      std::string where = "defined[" + std::to_string(k) + "]";
      DefinedConstant d;
      d.name = need_str(defined[k], "name", where);
      d.agent = need_str(defined[k], "agent", where);
      d.var = need_str(defined[k], "var", where);
      d.bound = need_nat(defined[k], "bound", where);
      d.psi = parse_formula(need_str(defined[k], "psi", where));
      if (!agent_set.count(d.agent)) unknown("agent", d.agent, agent_set);
      st.fns.insert(d.name);
      a.defined.push_back(std::move(d));
    }
  }

  auto check_f = [&](const Formula& f) {
    std::set<std::string> bound;
    check_formula(st, bound, f);
  };
  auto check_t = [&](const Term& t) {
    std::set<std::string> bound;
    check_term(st, bound, t);
  };
  for (const DefinedConstant& d : a.defined) {
    std::set<std::string> bound{d.var};
    check_formula(st, bound, d.psi);
  }

  std::set<std::string> action_set;
  for (const auto& [name, agent] : a.sig.actions) action_set.insert(name);
  auto check_kind = [&](const Kind& k) {
    if (k.is_rcv) {
      if (!link_set.count(k.channel)) unknown("link", k.channel, link_set);
    } else if (!action_set.count(k.channel)) {
      unknown("action", k.channel, action_set);
    }
  };
  auto var_of_agent = [&](const std::string& agent, const std::string& var) {
    if (is_msg_var(var)) {
      std::string link = var.substr(4);
      if (!link_set.count(link)) unknown("link", link, link_set);
      return;
    }
    std::set<std::string> cand;
    auto it = a.sig.vars.find(agent);
    if (it != a.sig.vars.end())
      for (const VarDecl& d : it->second) cand.insert(d.name);
    if (!cand.count(var)) {
      for (const Link& l : a.sig.links) cand.insert(msg_var(l.name));
      unknown("variable", var, cand);
    }
  };

  if (j.contains("members")) {
    const json& members = j["members"];
    if (!members.is_array()) fail("ParseError", "'members' must be an array");
    for (size_t k = 0; k < members.size(); ++k) {
      std::string where = "members[" + std::to_string(k) + "]";
      const json& jm = members[k];
      std::string type = need_str(jm, "member", where);
      BasicProgram m;
      m.agent = need_str(jm, "agent", where);
      if (!agent_set.count(m.agent)) unknown("agent", m.agent, agent_set);
      if (type == "initially") {
        m.tag = BasicProgram::Tag::Initially;
        m.formula = parse_formula(need_str(jm, "formula", where));
        check_f(m.formula);
      } else if (type == "effect") {
        m.tag = BasicProgram::Tag::Effect;
        m.kind = parse_kind(need_str(jm, "kind", where), where);
        check_kind(m.kind);
        m.var = need_str(jm, "var", where);
        var_of_agent(m.agent, m.var);
        m.term = parse_term(need_str(jm, "term", where));
        check_t(m.term);
      } else if (type == "precondition" || type == "fairness") {
        m.tag = type == "precondition" ? BasicProgram::Tag::Precondition
                                       : BasicProgram::Tag::Fairness;
        m.action = need_str(jm, "action", where);
        if (!action_set.count(m.action)) unknown("action", m.action, action_set);
        if (a.sig.actions.at(m.action) != m.agent)
          fail("ParseError", where + ": action '" + m.action + "' belongs to agent '" +
                                 a.sig.actions.at(m.action) + "'");
        m.formula = parse_formula(need_str(jm, "formula", where));
        check_f(m.formula);
      } else if (type == "frame") {
        m.tag = BasicProgram::Tag::Frame;
        const json& kinds = need(jm, "kinds", where);
        if (!kinds.is_array()) fail("ParseError", where + ": 'kinds' must be an array");
        for (const json& kv : kinds) {
          if (!kv.is_string()) fail("ParseError", where + ": kinds must be strings");
          Kind kk = parse_kind(kv.get<std::string>(), where);
          check_kind(kk);
          m.kinds.push_back(std::move(kk));
        }
        m.var = need_str(jm, "var", where);
        var_of_agent(m.agent, m.var);
      } else {
        fail("ParseError", where + ": unknown member type '" + type + "'");
      }
      a.members.push_back(std::move(m));
    }
  }

  bool modal = false;
  for (const BasicProgram& m : a.members)
    if (m.tag != BasicProgram::Tag::Effect && m.tag != BasicProgram::Tag::Frame)
      modal = modal || is_modal(m.formula);
  a.is_kb = modal || !a.defined.empty();
  if (j.contains("kb")) {
    if (!j["kb"].is_boolean()) fail("ParseError", "'kb' must be a boolean");
    a.is_kb = a.is_kb || j["kb"].get<bool>();
  }
  return a;
}

MessageAutomaton parse_automaton(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("FileError", "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_automaton_text(buf.str());
}

std::string write_trace(const EventStructure& es_in) {
  EventStructure es = canonicalize(es_in);
  std::ostringstream o;
  o << "trace 1\n";
  for (const std::string& a : es.agents) o << "agent " << a << "\n";
  std::vector<Link> links = es.links;
  std::sort(links.begin(), links.end(),
            [](const Link& a, const Link& b) { return a.name < b.name; });
  for (const Link& l : links)
    o << "link " << l.name << " " << l.source << " " << l.dest << "\n";
  std::vector<std::string> actions = es.actions;
  std::sort(actions.begin(), actions.end());
  for (const std::string& a : actions) o << "action " << a << "\n";
  for (const std::string& agent : es.agents) {
    for (const std::string& var : es.vars_of.at(agent)) {
      if (var == kValVar || var == kHistVar || is_msg_var(var)) continue;
      o << "init " << agent << " " << var << " "
        << to_string(es.initstate.at(agent).get(var)) << "\n";
    }
  }
  for (const Event& ev : es.events) {
    o << "event " << ev.id << " " << ev.agent << " " << ev.kind_string() << " "
      << to_string(ev.value);
    if (ev.is_rcv) o << " from " << es.send_of.at(ev.id);
    o << "\n";
    const LocalState& before = es.before.at(ev.id);
    const LocalState& after = es.after.at(ev.id);
    for (const std::string& var : es.vars_of.at(ev.agent)) {
      if (var == kValVar || var == kHistVar) continue;
      if (is_msg_var(var)) {
        const Value& v = after.vars.at(var);
        if (!v.is_bottom()) o << "set " << var << " " << to_string(v) << "\n";
      } else if (!(after.vars.at(var) == before.vars.at(var))) {
        o << "set " << var << " " << to_string(after.vars.at(var)) << "\n";
      }
    }
  }
  return o.str();
}

EventStructure read_trace(const std::string& text) {
  struct EvRec {
    int id = -1;
    std::string agent;
    Kind kind;
    Value value;
    int from = -1;
    std::map<std::string, Value> upd;
  };
  std::vector<std::string> agents, actions;
  std::vector<Link> links;
  struct InitRec {
    std::string agent, var;
    Value value;
  };
  std::vector<InitRec> inits;
  std::vector<EvRec> evs;
  bool saw_header = false;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto bad = [&](const std::string& what) -> void {
    fail("ParseError", "trace line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok) || tok[0] == '#') continue;
    auto word = [&](const std::string& what) {
      std::string w;
      if (!(ls >> w)) bad("missing " + what);
      return w;
    };
    if (tok == "trace") {
      if (word("version") != "1") bad("unsupported trace version");
      saw_header = true;
      continue;
    }
    if (!saw_header) bad("expected 'trace 1' header first");
    if (tok == "agent") {
      agents.push_back(word("agent name"));
    } else if (tok == "link") {
      Link l;
      l.name = word("link name");
      l.source = word("source agent");
      l.dest = word("dest agent");
      links.push_back(std::move(l));
    } else if (tok == "action") {
      actions.push_back(word("action name"));
    } else if (tok == "init") {
      InitRec r;
      r.agent = word("agent");
      r.var = word("variable");
      r.value = parse_value(word("value"));
      inits.push_back(std::move(r));
    } else if (tok == "event") {
      EvRec r;
      std::string id = word("event id");
      if (!all_digits(id)) bad("event id must be a number");
      r.id = std::stoi(id);
      if (r.id != static_cast<int>(evs.size())) bad("event ids must be dense and in order");
      r.agent = word("agent");
      r.kind = parse_kind(word("kind"), "trace line " + std::to_string(lineno));
      r.value = parse_value(word("value"));
      std::string fr;
      if (ls >> fr) {
        if (fr != "from") bad("trailing tokens (want 'from <id>')");
        std::string sid = word("send id");
        if (!all_digits(sid)) bad("send id must be a number");
        r.from = std::stoi(sid);
        if (!r.kind.is_rcv) bad("'from' only applies to receives");
        if (r.from >= r.id) bad("send id must precede the receive");
      } else if (r.kind.is_rcv) {
        bad("receive needs 'from <id>'");
      }
      evs.push_back(std::move(r));
    } else if (tok == "set") {
      if (evs.empty()) bad("'set' before any event");
      std::string var = word("variable");
      evs.back().upd[var] = parse_value(word("value"));
    } else {
      bad("unknown directive '" + tok + "'");
    }
  }
  if (!saw_header) fail("ParseError", "trace: missing 'trace 1' header");
  if (agents.empty()) fail("ParseError", "trace: no agents declared");

  EsBuilder b(agents, links, actions);
  for (const InitRec& r : inits) b.declare_var(r.agent, r.var, r.value);
  std::set<std::string> action_set(actions.begin(), actions.end());
  std::set<std::string> link_names;
  for (const Link& l : links) link_names.insert(l.name);
  for (const EvRec& r : evs) {
    if (r.kind.is_rcv) {
      if (!link_names.count(r.kind.channel))
        fail("ParseError", "trace: unknown link '" + r.kind.channel + "'");
      b.add_rcv(r.agent, r.kind.channel, r.from, r.upd, r.value);
    } else {
      if (!action_set.count(r.kind.channel))
        fail("ParseError", "trace: unknown action '" + r.kind.channel + "'");
      b.add_local(r.agent, r.kind.channel, r.upd, r.value);
    }
  }
  return b.take();
}

}  // namespace ew
