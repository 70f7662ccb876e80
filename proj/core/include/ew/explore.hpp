#pragma once

#include "ew/automata.hpp"

namespace ew {

// Per-link delivery discipline. Default is a reliable FIFO channel; lossy
// adds head-drop moves, reorder delivers any in-flight value, dup keeps the
// delivered entry in flight.
struct ChannelSpec {
  bool lossy = false;
  bool reorder = false;
  bool dup = false;
  bool operator==(const ChannelSpec& o) const = default;
};

enum class ExploreMode { exhaustive, fair };

// What the search dedups on. history keys nodes by per-agent observable
// histories plus channel state and merges interleavings of independent
// events; state keys by current global state only, which is sound for
// state-sweep checks (on_state) but forgets how a state was reached.
enum class DedupMode { history, state };

struct ExploreConfig {
  int depth = 12;
  int window = 4;
  uint64_t max_structures = 100000;
  uint64_t cut_budget = 1000000;
  ExploreMode mode = ExploreMode::exhaustive;
  uint32_t seed = 0;
  ChannelSpec channel;                             // default for every link
  std::map<std::string, ChannelSpec> channel_of;   // per-link override
  // Extra initial-value domains, keyed by variable name. A variable without
  // an initial value draws its initial candidates from here before falling
  // back to its declared domain; this is how input sequences are enumerated.
  std::map<std::string, VarDecl> inputs;
  DedupMode dedup = DedupMode::history;
  // Which fairness reading emitted structures must pass.
  FairnessMode emission = FairnessMode::exact;
  // Called once per visited state (after dedup), fair or not.
  std::function<void(const GlobalState&)> on_state;

  const ChannelSpec& channel_for(const std::string& link) const {
    auto it = channel_of.find(link);
    return it == channel_of.end() ? channel : it->second;
  }
};

struct System {
  MessageAutomaton automaton;              // provenance
  ExploreConfig config;                    // provenance
  std::vector<EventStructure> structures;  // canonicalized, sorted by canon
  std::vector<std::string> canon;          // canonical_text per structure
  bool budget_exceeded = false;
  // Every consistent cut of every structure is itself the full cut of some
  // structure in the set. Holds for exhaustive history-mode exploration
  // whose emission window exceeds the depth, which emits every visited
  // prefix.
  bool prefix_closed = false;
  uint64_t states_visited = 0;

  const Signature& sig() const { return automaton.sig; }
  // Index of the structure with this canonical text, or -1.
  int index_of(const std::string& canon_text) const;
};

System make_system(const MessageAutomaton& pg, std::vector<EventStructure> structures,
                   ExploreConfig cfg = {});

System explore(const Interpretation& i, const MessageAutomaton& pg,
               const ExploreConfig& cfg = {});

// Single maximal run under the deterministic fair scheduler: move classes
// (each agent's actions, each source's links) rotate from a seed-derived
// offset, and any fairness obligation or pending delivery older than the
// window preempts the rotation.
EventStructure run_fair(const Interpretation& i, const MessageAutomaton& pg,
                        const ExploreConfig& cfg, uint32_t seed);

// Cuts of every structure, es_index set; fails with CutBudgetExceeded.
std::vector<ConsistentCut> system_cuts(const System& sys, uint64_t cap = 1000000);

// Finite restatement of send fairness: over the subsequence of source
// events that send on the link, every w consecutive sends see at least one
// delivery whose send is at or after the first of them.
bool check_fairsend(const EventStructure& es, const std::string& link, int w);
Specification fairsend_spec(const std::string& link, int w);

struct DecompStep {
  std::string label;
  bool ok = true;
  std::string detail;  // counterexample or note
};

struct DecompReport {
  bool ok = false;
  MessageAutomaton composed;
  std::vector<DecompStep> steps;
  std::string summary() const;  // includes the bounded-scale disclaimer
};

// Bounded check of the decomposition scheme: (1) the part specs together
// imply the goal on every structure explored for the composition; (2) each
// part automaton meets its own spec on its own exploration over the merged
// signature; (3) the composition meets the goal. Fails with
// ExplorationBudgetExceeded if any exploration is truncated.
DecompReport verify_decomposition(
    const Interpretation& i, const Specification& goal,
    const std::vector<std::pair<Specification, MessageAutomaton>>& parts,
    const ExploreConfig& cfg = {});

}  // namespace ew
