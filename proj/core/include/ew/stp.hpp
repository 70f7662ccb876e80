#pragma once

#include "ew/know.hpp"

namespace ew {

// Sequence transmission between a sender S holding a stable bit vector X and
// a receiver R assembling its prefix in Y. The scenario fixes the bit count,
// the channel faults, the vocabulary names and the exploration budgets.
struct StpScenario {
  uint64_t n_bits = 2;
  ChannelSpec channel;
  std::string link_sr = "data";
  std::string link_rs = "req";
  std::string action_s = "send_data";
  std::string action_r = "send_req";
  std::string sender = "S";
  std::string receiver = "R";
  int depth = 12;
  int window = 4;
  uint32_t seed = 1;
  uint64_t max_structures = 100000;
  uint64_t cut_budget = 1000000;
};

// Y on the receiver is a prefix of X on the sender at every cut. On failure
// an optional witness names the offending cut and values.
bool stp_spec_safety(const EventStructure& es, std::string* witness = nullptr);

// Eventually(K_R(X(n)=0) or K_R(X(n)=1)) holds at the initial cut of every
// structure of the system. IndexOutOfRange when n is not below the declared
// bit width; false (vacuous-failure) for a system with no structures.
bool stp_spec_kb(const Interpretation& i, const System& sys, uint64_t n);

// The knowledge-based program: two fair sender parts plus, per agent, an
// initial-knowledge member pinning the defined constant to the least unknown
// index. Exposes defined constants c_S and c_R.
KbAutomaton build_stp_kb(const StpScenario& sc);
KbAutomaton build_stp_kb(uint64_t n_bits);

// The standard program: counters x_S and x_R drive retransmission, the
// receiver appends accepted bits to Y. a distinct-action scenario is
// required; BadScenario otherwise.
MessageAutomaton build_stenning(const StpScenario& sc);
MessageAutomaton build_stenning(uint64_t n_bits);

struct PsiCondition {
  std::string name;
  bool ok = true;
  std::string note;  // witness on failure, remark otherwise
};

struct PsiReport {
  std::vector<PsiCondition> conditions;
  bool ok() const;
  std::string summary() const;
};

// The generalized transmission conditions instantiated with
// phi_S(m) := x_S > m and phi_R(m) := x_R > m, checked on every structure
// of the system for every m up to the bit count.
PsiReport check_psi_conditions(const Interpretation& i, const System& sys,
                               const StpScenario& sc);

struct StpVerdict {
  bool safety_ok = true;
  std::string safety_counterexample;  // replayable trace text, empty when safe
  struct BitLiveness {
    uint64_t bit = 0;
    bool ok = false;
    // Receiver-local depth of the earliest cut where the bit is known,
    // worst case over the fair runs; -1 when some run never learns it
    // within the horizon (deepest reached depth is reported in the note).
    int depth = -1;
    std::string note;
  };
  std::vector<BitLiveness> liveness;
  Verdict implements;
  PsiReport psi;
  bool budget_exceeded = false;  // some step was truncated; partial verdict
  uint64_t states_checked = 0;

  bool ok() const;
};

// Safety on the exhaustive state space, per-bit knowledge liveness on fair
// runs, implementation of the knowledge-based program, and the generalized
// conditions, in that order.
StpVerdict verify_stp(const StpScenario& sc);

}  // namespace ew
