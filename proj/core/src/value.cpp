#include "ew/value.hpp"

#include <cctype>
#include <tuple>

namespace ew {

bool Value::operator==(const Value& o) const {
  if (tag != o.tag) return false;
  switch (tag) {
    case Tag::Nat:
    case Tag::Bit: return nat == o.nat;
    case Tag::Bool: return b == o.b;
    case Tag::Bottom:
    case Tag::Omega: return true;
    case Tag::Agent: return name == o.name;
    case Tag::Pair:
    case Tag::Seq: return kids == o.kids;
  }
  return false;
}

bool Value::operator<(const Value& o) const {
  if (tag != o.tag) return static_cast<int>(tag) < static_cast<int>(o.tag);
  switch (tag) {
    case Tag::Nat:
    case Tag::Bit: return nat < o.nat;
    case Tag::Bool: return b < o.b;
    case Tag::Bottom:
    case Tag::Omega: return false;
    case Tag::Agent: return name < o.name;
    case Tag::Pair:
    case Tag::Seq: return kids < o.kids;
  }
  return false;
}

Value v_nat(uint64_t n) {
  Value v; v.tag = Value::Tag::Nat; v.nat = n; return v;
}
Value v_bool(bool b) {
  Value v; v.tag = Value::Tag::Bool; v.b = b; return v;
}
Value v_bit(int b) {
  Value v; v.tag = Value::Tag::Bit; v.nat = b ? 1 : 0; return v;
}
Value v_bottom() { return Value{}; }
Value v_omega() {
  Value v; v.tag = Value::Tag::Omega; return v;
}
Value v_agent(const std::string& name) {
  Value v; v.tag = Value::Tag::Agent; v.name = name; return v;
}
Value v_pair(Value a, Value b) {
  Value v; v.tag = Value::Tag::Pair; v.kids = {std::move(a), std::move(b)};
  return v;
}
Value v_seq(std::vector<Value> kids) {
  Value v; v.tag = Value::Tag::Seq; v.kids = std::move(kids); return v;
}

std::string to_string(const Value& v) {
  switch (v.tag) {
    case Value::Tag::Nat: return std::to_string(v.nat);
    case Value::Tag::Bool: return v.b ? "true" : "false";
    case Value::Tag::Bit: return v.nat ? "bit:1" : "bit:0";
    case Value::Tag::Bottom: return "bot";
    case Value::Tag::Omega: return "omega";
    case Value::Tag::Agent: return "@" + v.name;
    case Value::Tag::Pair:
      return "(" + to_string(v.kids[0]) + "," + to_string(v.kids[1]) + ")";
    case Value::Tag::Seq: {
      std::string s = "[";
      for (size_t i = 0; i < v.kids.size(); ++i) {
        if (i) s += ",";
        s += to_string(v.kids[i]);
      }
      return s + "]";
    }
  }
  return "bot";
}

namespace {

struct ValueParser {
  const std::string& s;
  size_t pos = 0;

  explicit ValueParser(const std::string& str) : s(str) {}

  char peek() const { return pos < s.size() ? s[pos] : '\0'; }
  char get() { return pos < s.size() ? s[pos++] : '\0'; }

  [[noreturn]] void err(const std::string& msg) {
    fail("ParseError", msg + " at offset " + std::to_string(pos) + " in value '" + s + "'");
  }

  Value parse() {
    char c = peek();
    if (c == '(') {
      get();
      Value a = parse();
      if (get() != ',') err("expected ',' in pair");
      Value b = parse();
      if (get() != ')') err("expected ')' closing pair");
      return v_pair(std::move(a), std::move(b));
    }
    if (c == '[') {
      get();
      std::vector<Value> kids;
      if (peek() == ']') { get(); return v_seq({}); }
      while (true) {
        kids.push_back(parse());
        char d = get();
        if (d == ']') break;
        if (d != ',') err("expected ',' or ']' in seq");
      }
      return v_seq(std::move(kids));
    }
    if (c == '@') {
      get();
      std::string name;
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') name += get();
      if (name.empty()) err("empty agent name");
      return v_agent(name);
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      uint64_t n = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) n = n * 10 + (get() - '0');
      return v_nat(n);
    }
    std::string word;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == ':')
      word += get();
    if (word == "true") return v_bool(true);
    if (word == "false") return v_bool(false);
    if (word == "bot") return v_bottom();
    if (word == "omega") return v_omega();
    if (word == "bit:0") return v_bit(0);
    if (word == "bit:1") return v_bit(1);
    err("unrecognized value token '" + word + "'");
  }
};

}  // namespace

Value parse_value(const std::string& s) {
  ValueParser p(s);
  Value v = p.parse();
  if (p.pos != s.size()) p.err("trailing input");
  return v;
}

}  // namespace ew
