#pragma once

#include <map>
#include <string>

#include "ew/value.hpp"

namespace ew {

// Reserved variable names inside a local state.
inline const std::string kValVar = "val";
inline const std::string kHistVar = "hist";
inline std::string msg_var(const std::string& link) { return "msg:" + link; }
inline bool is_msg_var(const std::string& name) { return name.rfind("msg:", 0) == 0; }

struct LocalState {
  std::map<std::string, Value> vars;  // X_i plus val and hist

  const Value& get(const std::string& name) const {
    auto it = vars.find(name);
    if (it == vars.end()) fail("UnboundVariable", "no local variable '" + name + "'");
    return it->second;
  }
  bool has(const std::string& name) const { return vars.count(name) > 0; }
  void set(const std::string& name, Value v) { vars[name] = std::move(v); }

  bool operator==(const LocalState& o) const { return vars == o.vars; }
  bool operator!=(const LocalState& o) const { return !(*this == o); }
};

using GlobalState = std::map<std::string, LocalState>;  // agent -> local state

std::string to_string(const LocalState& s);

}  // namespace ew
