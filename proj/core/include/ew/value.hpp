#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ew {

// Error with a stable machine-readable kind, used across all modules.
struct EwError : std::runtime_error {
  std::string kind;
  EwError(std::string k, const std::string& msg)
      : std::runtime_error(k + ": " + msg), kind(std::move(k)) {}
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& msg) {
  throw EwError(kind, msg);
}

struct Value {
  enum class Tag { Nat, Bool, Bit, Bottom, Pair, Seq, Agent, Omega };
  Tag tag = Tag::Bottom;
  uint64_t nat = 0;          // Nat payload, Bit payload (0/1)
  bool b = false;            // Bool payload
  std::string name;          // Agent payload
  std::vector<Value> kids;   // Pair (2 kids), Seq (n kids)

  bool operator==(const Value& o) const;
  bool operator!=(const Value& o) const { return !(*this == o); }
  bool operator<(const Value& o) const;  // total order for canonical forms

  bool is_bottom() const { return tag == Tag::Bottom; }
  bool is_nat() const { return tag == Tag::Nat; }
};

Value v_nat(uint64_t n);
Value v_bool(bool b);
Value v_bit(int b);
Value v_bottom();
Value v_omega();
Value v_agent(const std::string& name);
Value v_pair(Value a, Value b);
Value v_seq(std::vector<Value> kids);

// Compact single-token rendering: 7 true bit:1 bot omega @S (a,b) [a,b]
std::string to_string(const Value& v);
// Inverse of to_string; throws EwError("ParseError") on bad input.
Value parse_value(const std::string& s);

}  // namespace ew
