#pragma once

#include "ew/explore.hpp"

namespace ew {

// Knowledge and temporal evaluation over the consistent cuts of a System.
// Know(i,f) holds iff f holds at every cut of every structure whose
// observable i-local state matches; Always/Eventually range over the cuts
// at or above c inside the same structure (bounded-horizon reading).
// Formulas produced by translate() evaluate identically: the reserved
// "@cut" quantifiers range over all cuts of the system and the "@ls-eq" /
// "@cut-ge" guards are interpreted here. Errors: CutNotInSystem.
bool eval_know(const Interpretation& i, const System& sys, const ConsistentCut& c,
               const Formula& f);

// Least n <= dc.bound with psi(n) false at c; Omega when psi holds for the
// whole range. psi is evaluated with dc.var bound to n and may contain Know.
Value resolve_defined_constant(const Interpretation& i, const System& sys,
                               const ConsistentCut& c, const DefinedConstant& dc);

// instantiate() output: a standard automaton plus the interpretation
// carrying its lookup tables as nonrigid "@kt:"/"@tt:" symbols.
struct Instantiated {
  MessageAutomaton automaton;
  Interpretation interp;
};

// Replaces every modal test and every clause mentioning a defined constant
// by a table keyed on the owning agent's observable local state with val
// dropped (the history subsumes it), computed by eval_know over sys.
// Terms under a table must not read val. Initially members tabulate over
// initial cuts only. Errors: UnresolvableConstant when one key would need
// two different table entries.
Instantiated instantiate(const Interpretation& i, const System& sys,
                         const MessageAutomaton& kb);

// sys represents kb iff re-exploring the instantiated automaton under cfg
// reproduces exactly the structures of sys projected onto kb's vocabulary.
// A table lookup that re-exploration misses counts as a mismatch and is
// reported as a witness. Errors: BudgetExceeded.
Verdict check_represents(const Interpretation& i, const System& sys,
                         const MessageAutomaton& kb, const ExploreConfig& cfg);

// Explores pg under cfg and checks that the result represents kb.
Verdict check_implements(const Interpretation& i, const MessageAutomaton& pg,
                         const MessageAutomaton& kb, const ExploreConfig& cfg);

// Predicate on a whole System; the kb analogue of Specification.
struct KbSpecification {
  std::string tag;
  std::function<bool(const System&, std::string* why)> pred;

  bool check(const System& sys, std::string* why = nullptr) const {
    return pred(sys, why);
  }
};

// Per-member soundness axiom with Know tests evaluated against the checked
// system; kb supplies the defined constants the member may mention. Tags:
// Ax-initK, Ax-causeK, Ax-ifK, Ax-fairK, Ax-affectsK, Ax-sendsK. There is
// deliberately no composition axiom; see the epistemics tests for the
// two-program counterexample.
KbSpecification kb_axiom_spec(const Interpretation& i, const MessageAutomaton& kb,
                              const BasicProgram& bp);

}  // namespace ew
