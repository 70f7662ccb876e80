#pragma once

#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "ew/state.hpp"

namespace ew {

struct Link {
  std::string name, source, dest;
  bool operator==(const Link& o) const = default;
};

struct Event {
  int id = -1;
  std::string agent;
  bool is_rcv = false;
  std::string channel;  // link name for receives, action name for local events
  Value value;

  std::string kind_string() const { return (is_rcv ? "rcv:" : "local:") + channel; }
  bool operator==(const Event& o) const = default;
};

struct EventStructure {
  std::vector<std::string> agents;  // sorted
  std::vector<Link> links;
  std::vector<std::string> actions;
  std::map<std::string, std::set<std::string>> vars_of;  // X_i incl msg vars
  std::map<std::string, LocalState> initstate;           // incl val and hist
  std::vector<Event> events;                             // indexed by id
  std::map<std::string, std::vector<int>> per_agent;     // ids in local order
  std::map<int, int> send_of;                            // rcv id -> send id
  std::map<int, LocalState> before, after;               // event agent's state

  const Link* link(const std::string& name) const;
  const Event& ev(int id) const { return events.at(id); }
  // Position of the event inside its agent's order.
  int position(int id) const;
  GlobalState initial_global() const;
};

struct Violation {
  std::string axiom;
  std::string detail;
};

std::vector<Violation> validate(const EventStructure& es);

// Transitive closure of local order and send edges; CycleDetected on a cycle.
std::set<std::pair<int, int>> causal_order(const EventStructure& es);

enum class CutOrder { precedes, equals, succeeds, incomparable };

struct ConsistentCut {
  const EventStructure* es = nullptr;
  int es_index = -1;              // index inside a System, if any
  std::vector<int> frontier;      // per agent (es->agents order): prefix length

  std::set<int> event_ids() const;
  bool contains(int id) const;
  GlobalState state() const;
  bool is_full() const;
};

std::vector<ConsistentCut> enumerate_cuts(const EventStructure& es,
                                          uint64_t cap = 1000000);

CutOrder cut_order(const ConsistentCut& c1, const ConsistentCut& c2);

bool local_equiv(const ConsistentCut& c1, const ConsistentCut& c2,
                 const std::string& agent);

// Local state with history ids replaced by (kind, value) pairs, comparable
// across structures.
LocalState observable_local(const EventStructure& es, const LocalState& s);
std::string observable_key(const EventStructure& es, const std::string& agent,
                           const ConsistentCut& c);

// Relabels event ids in topological order (ties by agent then position) and
// returns the renumbered structure.
EventStructure canonicalize(const EventStructure& es);
// Deterministic full-content serialization; equal strings iff canonicalized
// structures are equal.
std::string canonical_text(const EventStructure& es);

// Incremental construction with state threading. Message variables reset to
// bot at every event of their agent unless the update map sets them.
struct EsBuilder {
  EventStructure es;
  std::map<std::string, LocalState> cur;

  EsBuilder(std::vector<std::string> agents, std::vector<Link> links,
            std::vector<std::string> actions);
  void declare_var(const std::string& agent, const std::string& name, Value init);
  int add_local(const std::string& agent, const std::string& action,
                const std::map<std::string, Value>& updates,
                std::optional<Value> value = std::nullopt);
  int add_rcv(const std::string& agent, const std::string& link, int send_id,
              const std::map<std::string, Value>& updates,
              std::optional<Value> value = std::nullopt);
  EventStructure take();

 private:
  int add_event(Event e, const std::map<std::string, Value>& updates);
};

std::string to_string(const LocalState& s);

}  // namespace ew
