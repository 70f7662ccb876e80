#include "ew/explore.hpp"

#include <algorithm>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <unordered_set>

namespace ew {

int System::index_of(const std::string& canon_text) const {
  auto it = std::lower_bound(canon.begin(), canon.end(), canon_text);
  if (it == canon.end() || *it != canon_text) return -1;
  return static_cast<int>(it - canon.begin());
}

System make_system(const MessageAutomaton& pg, std::vector<EventStructure> structures,
                   ExploreConfig cfg) {
  System sys;
  sys.automaton = pg;
  sys.config = std::move(cfg);
  std::map<std::string, EventStructure> by_canon;
  for (EventStructure& es : structures) {
    EventStructure c = canonicalize(es);
    std::string key = canonical_text(c);
    by_canon.emplace(std::move(key), std::move(c));
  }
  for (auto& [key, es] : by_canon) {
    sys.canon.push_back(key);
    sys.structures.push_back(std::move(es));
  }
  return sys;
}

std::vector<ConsistentCut> system_cuts(const System& sys, uint64_t cap) {
  std::vector<ConsistentCut> out;
  for (size_t k = 0; k < sys.structures.size(); ++k) {
    if (out.size() > cap) fail("CutBudgetExceeded", "more than " + std::to_string(cap) + " cuts");
    std::vector<ConsistentCut> cs =
        enumerate_cuts(sys.structures[k], cap - out.size() + 1);
    for (ConsistentCut& c : cs) {
      c.es_index = static_cast<int>(k);
      out.push_back(std::move(c));
    }
  }
  if (out.size() > cap) fail("CutBudgetExceeded", "more than " + std::to_string(cap) + " cuts");
  return out;
}

namespace {

// ---- hashing ------------------------------------------------------------

struct Key {
  uint64_t a = 0, b = 0;
  bool operator==(const Key& o) const = default;
};
struct KeyHash {
  size_t operator()(const Key& k) const { return k.a ^ (k.b * 0x9e3779b97f4a7c15ull); }
};

uint64_t fnv(uint64_t h, const char* p, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= 0x100000001b3ull;
  }
  return h;
}
uint64_t fnv(uint64_t h, const std::string& s) { return fnv(h, s.data(), s.size()); }

constexpr uint64_t kSeedA = 0xcbf29ce484222325ull;
constexpr uint64_t kSeedB = 0x84222325cbf29ce4ull;

// ---- member indexes -----------------------------------------------------

struct Members {
  // (agent, action) -> precondition formulas
  std::map<std::pair<std::string, std::string>, std::vector<const Formula*>> precs;
  // (agent, kind, var) -> effect terms
  std::map<std::string, std::map<Kind, std::map<std::string, std::vector<const Term*>>>>
      effects;
  // agent -> frame members
  std::map<std::string, std::vector<const BasicProgram*>> frames;
  std::vector<const BasicProgram*> fairness;
  std::vector<const BasicProgram*> initially;

  explicit Members(const MessageAutomaton& pg) {
    for (const BasicProgram& bp : pg.members) {
      switch (bp.tag) {
        case BasicProgram::Tag::Initially:
          initially.push_back(&bp);
          break;
        case BasicProgram::Tag::Effect:
          effects[bp.agent][bp.kind][bp.var].push_back(&bp.term);
          break;
        case BasicProgram::Tag::Precondition:
          precs[{bp.agent, bp.action}].push_back(&bp.formula);
          break;
        case BasicProgram::Tag::Fairness:
          fairness.push_back(&bp);
          break;
        case BasicProgram::Tag::Frame:
          frames[bp.agent].push_back(&bp);
          break;
      }
    }
  }

  const std::vector<const Term*>* effects_for(const std::string& agent, const Kind& k,
                                              const std::string& var) const {
    auto a = effects.find(agent);
    if (a == effects.end()) return nullptr;
    auto ki = a->second.find(k);
    if (ki == a->second.end()) return nullptr;
    auto vi = ki->second.find(var);
    if (vi == ki->second.end()) return nullptr;
    return &vi->second;
  }

  // True if some frame member for this variable excludes the kind.
  bool frozen(const std::string& agent, const Event& e, const std::string& var) const {
    auto a = frames.find(agent);
    if (a == frames.end()) return false;
    for (const BasicProgram* f : a->second) {
      if (f->var != var) continue;
      bool listed = false;
      for (const Kind& k : f->kinds)
        if (k.matches(e)) listed = true;
      if (!listed) return true;
    }
    return false;
  }
};

// ---- search node --------------------------------------------------------

struct QEntry {
  int send_node = -1;   // node whose event sent this message
  int send_pos = -1;    // position of the send in the source agent's order
  Value value;
};

struct Node {
  int parent = -1;
  int depth = 0;  // event count
  bool is_drop = false;

  // event appended relative to parent (unused for roots and drops)
  Event ev;
  int send_node = -1;
  std::map<std::string, Value> updates;

  std::vector<std::shared_ptr<const LocalState>> ls;  // per agent, no hist
  std::vector<std::vector<QEntry>> queues;            // per link
  std::vector<int> agent_events;
  std::vector<int> streaks;      // per fairness member
  std::vector<uint64_t> ahash;   // per-agent history hash (lane A)
  std::vector<uint64_t> bhash;   // lane B
};

struct Engine {
  const Interpretation& I;
  const MessageAutomaton& pg;
  const ExploreConfig& cfg;
  Members mem;

  std::vector<std::string> agents;
  std::map<std::string, int> agent_idx;
  std::vector<Link> links;  // name-sorted
  std::map<std::string, int> link_idx;
  std::vector<std::pair<std::string, std::string>> action_list;  // (agent, action)
  // per agent: declared vars name-sorted, then outgoing msg vars
  std::map<std::string, std::vector<VarDecl>> decls;
  std::map<std::string, std::vector<std::string>> out_links;

  std::deque<Node> nodes;
  std::unordered_set<Key, KeyHash> visited;

  Engine(const Interpretation& i, const MessageAutomaton& p, const ExploreConfig& c)
      : I(i), pg(p), cfg(c), mem(p) {
    agents = pg.sig.agents;
    for (size_t k = 0; k < agents.size(); ++k) agent_idx[agents[k]] = static_cast<int>(k);
    links = pg.sig.links;
    std::sort(links.begin(), links.end(),
              [](const Link& a, const Link& b) { return a.name < b.name; });
    for (size_t k = 0; k < links.size(); ++k) link_idx[links[k].name] = static_cast<int>(k);
    for (const auto& [act, owner] : pg.sig.actions) action_list.push_back({owner, act});
    std::sort(action_list.begin(), action_list.end());
    for (const std::string& a : agents) {
      std::vector<VarDecl> ds;
      auto it = pg.sig.vars.find(a);
      if (it != pg.sig.vars.end()) ds = it->second;
      std::sort(ds.begin(), ds.end(),
                [](const VarDecl& x, const VarDecl& y) { return x.name < y.name; });
      decls[a] = std::move(ds);
      std::vector<std::string> ol;
      for (const Link& l : links)
        if (l.source == a) ol.push_back(l.name);
      out_links[a] = std::move(ol);
    }
  }

  GlobalState one(const std::string& agent, const LocalState& s) const {
    GlobalState g;
    g[agent] = s;
    return g;
  }

  bool eval_f(const Formula& f, const std::string& agent, const LocalState& s) const {
    return eval_formula_nonmodal(I, {}, one(agent, s), f);
  }

  // ---- initial nodes ----

  // Initial-value choices for a variable: declared init, else cfg.inputs
  // override, else the declared domain.
  std::vector<Value> init_choices(const VarDecl& d) const {
    if (d.has_init) return {d.init};
    auto it = cfg.inputs.find(d.name);
    if (it != cfg.inputs.end()) return it->second.enumerate();
    return d.enumerate();
  }

  std::vector<Node> roots() {
    std::vector<std::map<std::string, LocalState>> assigns;
    {
      std::map<std::string, LocalState> base;
      for (const std::string& a : agents) {
        LocalState s;
        s.set(kValVar, v_bottom());
        // history carried in observable form: (kind, value) pairs
        s.set(kHistVar, v_seq({}));
        for (const std::string& l : out_links[a]) s.set(msg_var(l), v_bottom());
        base[a] = s;
      }
      assigns.push_back(base);
    }
    for (const std::string& a : agents)
      for (const VarDecl& d : decls[a]) {
        std::vector<Value> choices = init_choices(d);
        std::vector<std::map<std::string, LocalState>> next;
        for (const auto& asg : assigns)
          for (const Value& v : choices) {
            auto a2 = asg;
            a2[a].set(d.name, v);
            next.push_back(std::move(a2));
          }
        assigns = std::move(next);
      }

    std::vector<Node> out;
    for (auto& asg : assigns) {
      bool ok = true;
      for (const BasicProgram* ini : mem.initially)
        if (!eval_f(ini->formula, ini->agent, asg.at(ini->agent))) ok = false;
      if (!ok) continue;
      Node n;
      n.queues.resize(links.size());
      n.agent_events.assign(agents.size(), 0);
      for (const std::string& a : agents) {
        n.ls.push_back(std::make_shared<const LocalState>(asg.at(a)));
        n.ahash.push_back(fnv(kSeedA, to_string(asg.at(a))));
        n.bhash.push_back(fnv(kSeedB, to_string(asg.at(a))));
      }
      for (const BasicProgram* fb : mem.fairness)
        n.streaks.push_back(
            eval_f(fb->formula, fb->agent, *n.ls[agent_idx[fb->agent]]) ? 1 : 0);
      out.push_back(std::move(n));
    }
    return out;
  }

  // ---- keys ----

  Key key_of(const Node& n) const {
    uint64_t a = kSeedA, b = kSeedB;
    if (cfg.dedup == DedupMode::history) {
      for (size_t k = 0; k < agents.size(); ++k) {
        a = fnv(a, reinterpret_cast<const char*>(&n.ahash[k]), 8);
        b = fnv(b, reinterpret_cast<const char*>(&n.bhash[k]), 8);
      }
    } else {
      // state keys drop the history; sweeps target automata whose members
      // never read it
      for (size_t k = 0; k < agents.size(); ++k) {
        LocalState trimmed = *n.ls[k];
        trimmed.vars.erase(kHistVar);
        std::string s = to_string(trimmed);
        a = fnv(a, s);
        b = fnv(b, s);
      }
    }
    for (size_t li = 0; li < links.size(); ++li) {
      std::vector<std::string> entries;
      for (const QEntry& q : n.queues[li]) {
        if (cfg.dedup == DedupMode::history)
          entries.push_back(std::to_string(q.send_pos) + ":" + to_string(q.value));
        else
          entries.push_back(to_string(q.value));
      }
      // without reconstruction the queue is a multiset under reordering
      if (cfg.dedup == DedupMode::state && cfg.channel_for(links[li].name).reorder)
        std::sort(entries.begin(), entries.end());
      a = fnv(a, "|");
      b = fnv(b, "|");
      for (const std::string& e : entries) {
        a = fnv(a, e);
        b = fnv(b, e);
      }
    }
    return {a, b};
  }

  // ---- move generation ----

  // Update choices for one variable at an event; each choice is (present,
  // value). Absent means untouched (msg vars: reset to bot). Returns false
  // if effects disagree or leave the declared domain.
  bool var_choices(const std::string& agent, const Event& ev, const LocalState& before,
                   const std::string& var, const VarDecl* decl, bool is_msg,
                   const GlobalState& gen_ctx, std::vector<std::optional<Value>>* out) const {
    const std::vector<const Term*>* efs = mem.effects_for(agent, Kind{ev.is_rcv, ev.channel}, var);
    if (efs) {
      Value v = eval_term(I, {}, gen_ctx, *(*efs)[0]);
      for (size_t k = 1; k < efs->size(); ++k)
        if (eval_term(I, {}, gen_ctx, *(*efs)[k]) != v) return false;
      if (is_msg) {
        if (v.is_bottom()) {
          out->push_back(std::nullopt);
          return true;
        }
        auto md = pg.sig.msg_domains.find(var);
        if (md != pg.sig.msg_domains.end() && !md->second.contains(v)) return false;
      } else if (decl && decl->enumerable() && !decl->contains(v)) {
        return false;
      }
      out->push_back(v);
      return true;
    }
    if (!is_msg && decl && decl->stable) {
      out->push_back(std::nullopt);
      return true;
    }
    if (mem.frozen(agent, ev, var)) {
      out->push_back(std::nullopt);
      return true;
    }
    if (is_msg) {
      out->push_back(std::nullopt);  // no message
      auto md = pg.sig.msg_domains.find(var);
      if (md != pg.sig.msg_domains.end())
        for (const Value& v : md->second.enumerate()) out->push_back(v);
      return true;
    }
    for (const Value& v : decl->enumerate()) out->push_back(v);
    return true;
  }

  struct Candidate {
    Event ev;              // id unset
    int send_node = -1;    // for rcv
    int queue_pick = -1;   // index into the link queue (for rcv)
    std::map<std::string, Value> updates;
    LocalState after;
  };

  // All update combinations for an event of this kind at this agent.
  // rcv_value holds the delivered value for receives.
  std::vector<Candidate> event_candidates(const std::string& agent, Event ev,
                                          const LocalState& before,
                                          const Value* rcv_value) const {
    GlobalState gen_ctx = one(agent, before);
    if (rcv_value) gen_ctx[agent].set(kValVar, *rcv_value);

    struct Slot {
      std::string var;
      bool is_msg;
      std::vector<std::optional<Value>> choices;
    };
    std::vector<Slot> slots;
    auto dit = decls.find(agent);
    for (const VarDecl& d : dit->second) {
      Slot s{d.name, false, {}};
      if (!var_choices(agent, ev, before, d.name, &d, false, gen_ctx, &s.choices))
        return {};
      slots.push_back(std::move(s));
    }
    for (const std::string& l : out_links.at(agent)) {
      Slot s{msg_var(l), true, {}};
      if (!var_choices(agent, ev, before, s.var, nullptr, true, gen_ctx, &s.choices))
        return {};
      slots.push_back(std::move(s));
    }

    std::vector<Candidate> out;
    std::vector<size_t> pick(slots.size(), 0);
    while (true) {
      Candidate c;
      c.ev = ev;
      for (size_t k = 0; k < slots.size(); ++k) {
        const auto& ch = slots[k].choices[pick[k]];
        if (ch) c.updates[slots[k].var] = *ch;
      }
      // event value: delivered value for receives, sent messages for locals
      if (rcv_value) {
        c.ev.value = *rcv_value;
      } else {
        std::vector<Value> sent;
        for (const std::string& l : out_links.at(agent)) {
          auto u = c.updates.find(msg_var(l));
          if (u != c.updates.end()) sent.push_back(u->second);
        }
        if (sent.empty())
          c.ev.value = v_bottom();
        else if (sent.size() == 1)
          c.ev.value = sent[0];
        else
          c.ev.value = v_seq(sent);
      }
      // effects re-checked with val bound to the event value
      bool ok = true;
      GlobalState ectx = one(agent, before);
      ectx[agent].set(kValVar, c.ev.value);
      for (size_t k = 0; k < slots.size() && ok; ++k) {
        const std::vector<const Term*>* efs =
            mem.effects_for(agent, Kind{ev.is_rcv, ev.channel}, slots[k].var);
        if (!efs) continue;
        Value want = eval_term(I, {}, ectx, *(*efs)[0]);
        auto u = c.updates.find(slots[k].var);
        Value got = u != c.updates.end() ? u->second : v_bottom();
        if (slots[k].is_msg) {
          if (got != want && !(want.is_bottom() && u == c.updates.end())) ok = false;
        } else if (got != want) {
          ok = false;
        }
      }
      if (ok) {
        // after-state: thread the before state like the builder does
        LocalState after = before;
        for (const std::string& l : out_links.at(agent)) after.set(msg_var(l), v_bottom());
        for (const auto& [var, v] : c.updates) after.set(var, v);
        after.set(kValVar, c.ev.value);
        if (after.has(kHistVar)) {
          Value h = after.get(kHistVar);
          h.kids.push_back(v_pair(v_agent(ev.kind_string()), c.ev.value));
          after.set(kHistVar, std::move(h));
        }
        c.after = std::move(after);
        out.push_back(std::move(c));
      }
      size_t k = 0;
      while (k < slots.size() && ++pick[k] == slots[k].choices.size()) pick[k++] = 0;
      if (k == slots.size()) break;
    }
    return out;
  }

  std::vector<Candidate> moves_of(const Node& n) const {
    std::vector<Candidate> out;
    for (const auto& [agent, action] : action_list) {
      const LocalState& before = *n.ls[agent_idx.at(agent)];
      auto pit = mem.precs.find({agent, action});
      bool enabled = true;
      if (pit != mem.precs.end())
        for (const Formula* f : pit->second)
          if (!eval_f(*f, agent, before)) enabled = false;
      if (!enabled) continue;
      Event ev;
      ev.agent = agent;
      ev.is_rcv = false;
      ev.channel = action;
      for (Candidate& c : event_candidates(agent, ev, before, nullptr))
        out.push_back(std::move(c));
    }
    for (size_t li = 0; li < links.size(); ++li) {
      const auto& q = n.queues[li];
      if (q.empty()) continue;
      const Link& l = links[li];
      const ChannelSpec& ch = cfg.channel_for(l.name);
      std::vector<int> picks;
      if (!ch.reorder) {
        picks.push_back(0);
      } else {
        // oldest entry of each distinct value, in queue order
        for (size_t k = 0; k < q.size(); ++k) {
          bool seen = false;
          for (int p : picks)
            if (q[p].value == q[k].value) seen = true;
          if (!seen) picks.push_back(static_cast<int>(k));
        }
      }
      const LocalState& before = *n.ls[agent_idx.at(l.dest)];
      for (int p : picks) {
        Event ev;
        ev.agent = l.dest;
        ev.is_rcv = true;
        ev.channel = l.name;
        for (Candidate& c : event_candidates(l.dest, ev, before, &q[p].value)) {
          c.send_node = q[p].send_node;
          c.queue_pick = p;
          out.push_back(std::move(c));
        }
      }
    }
    return out;
  }

  Node apply(const Node& n, int n_index, const Candidate& c) const {
    Node m;
    m.parent = n_index;
    m.depth = n.depth + 1;
    m.ev = c.ev;
    m.send_node = c.send_node;
    m.updates = c.updates;
    m.ls = n.ls;
    m.queues = n.queues;
    m.agent_events = n.agent_events;
    m.ahash = n.ahash;
    m.bhash = n.bhash;
    m.streaks = n.streaks;
    int ai = agent_idx.at(c.ev.agent);
    m.ls[ai] = std::make_shared<const LocalState>(c.after);
    m.agent_events[ai]++;
    return m;
  }

  void finish(Node& m, int self_index) {
    int ai = agent_idx.at(m.ev.agent);
    // history hash folds the event, its updates, and the send position
    std::ostringstream rec;
    rec << m.ev.kind_string() << "|" << to_string(m.ev.value) << "|";
    for (const auto& [var, v] : m.updates) rec << var << "=" << to_string(v) << ",";
    if (m.ev.is_rcv && m.send_node >= 0) {
      const Node& snd = nodes[m.send_node];
      rec << "<<" << agent_idx.at(snd.ev.agent) << ":"
          << snd.agent_events[agent_idx.at(snd.ev.agent)] - 1;
    }
    m.ahash[ai] = fnv(m.ahash[ai], rec.str());
    m.bhash[ai] = fnv(m.bhash[ai], rec.str());
    // consume the delivered entry, enqueue new sends
    if (m.ev.is_rcv) {
      int li = link_idx.at(m.ev.channel);
      int pick = -1;
      // recover the pick: oldest entry wired to this send node
      for (size_t k = 0; k < m.queues[li].size(); ++k)
        if (m.queues[li][k].send_node == m.send_node) {
          pick = static_cast<int>(k);
          break;
        }
      if (!cfg.channel_for(m.ev.channel).dup) m.queues[li].erase(m.queues[li].begin() + pick);
    }
    for (const std::string& l : out_links.at(m.ev.agent)) {
      auto u = m.updates.find(msg_var(l));
      if (u == m.updates.end()) continue;
      QEntry q;
      q.send_node = self_index;
      q.send_pos = m.agent_events[agent_idx.at(m.ev.agent)] - 1;
      q.value = u->second;
      m.queues[link_idx.at(l)].push_back(q);
    }
    // fairness streaks
    for (size_t f = 0; f < mem.fairness.size(); ++f) {
      const BasicProgram* fb = mem.fairness[f];
      if (fb->agent != m.ev.agent) {
        m.streaks[f] = nodes[m.parent].streaks[f];
        continue;
      }
      bool is_action = !m.ev.is_rcv && m.ev.channel == fb->action;
      if (is_action || !eval_f(fb->formula, fb->agent, *m.ls[agent_idx.at(fb->agent)])) {
        m.streaks[f] = 0;
      } else {
        const Node& p = nodes[m.parent];
        int prev = p.agent_events[agent_idx.at(fb->agent)] == 0 ? 0 : p.streaks[f];
        m.streaks[f] = prev + 1;
      }
    }
  }

  bool emits(const Node& n) const {
    for (size_t f = 0; f < mem.fairness.size(); ++f) {
      const BasicProgram* fb = mem.fairness[f];
      int count = n.agent_events[agent_idx.at(fb->agent)];
      if (cfg.emission == FairnessMode::exact) {
        if (n.streaks[f] != 0) return false;
      } else {
        if (count > 0 && n.streaks[f] >= cfg.window) return false;
      }
    }
    return true;
  }

  EventStructure reconstruct(int index) const {
    std::vector<int> chain;
    for (int k = index; k >= 0; k = nodes[k].parent)
      if (!nodes[k].is_drop && nodes[k].parent >= 0) chain.push_back(k);
    int root = index;
    while (nodes[root].parent >= 0) root = nodes[root].parent;
    std::reverse(chain.begin(), chain.end());

    std::vector<std::string> actions;
    for (const auto& [act, owner] : pg.sig.actions) actions.push_back(act);
    EsBuilder b(agents, pg.sig.links, actions);
    for (const std::string& a : agents) {
      const LocalState& init = *nodes[root].ls[agent_idx.at(a)];
      for (const VarDecl& d : decls.at(a)) b.declare_var(a, d.name, init.get(d.name));
    }
    std::map<int, int> id_of;
    for (int k : chain) {
      const Node& n = nodes[k];
      if (n.ev.is_rcv)
        id_of[k] = b.add_rcv(n.ev.agent, n.ev.channel, id_of.at(n.send_node), n.updates,
                             n.ev.value);
      else
        id_of[k] = b.add_local(n.ev.agent, n.ev.channel, n.updates, n.ev.value);
    }
    return b.take();
  }
};

}  // namespace

System explore(const Interpretation& i, const MessageAutomaton& pg,
               const ExploreConfig& cfg) {
  if (cfg.mode == ExploreMode::fair)
    return make_system(pg, {run_fair(i, pg, cfg, cfg.seed)}, cfg);

  Engine eng(i, pg, cfg);
  System sys;
  sys.automaton = pg;
  sys.config = cfg;
  sys.prefix_closed = cfg.dedup == DedupMode::history &&
                      cfg.emission == FairnessMode::window &&
                      cfg.window > cfg.depth;

  std::map<std::string, EventStructure> emitted;
  bool full = false;
  std::deque<int> work;

  auto visit = [&](Node&& n) {
    Key k = eng.key_of(n);
    if (!eng.visited.insert(k).second) return;
    eng.nodes.push_back(std::move(n));
    int index = static_cast<int>(eng.nodes.size()) - 1;
    sys.states_visited++;
    const Node& stored = eng.nodes[index];
    if (cfg.on_state && !stored.is_drop) {
      GlobalState g;
      for (size_t a = 0; a < eng.agents.size(); ++a) g[eng.agents[a]] = *stored.ls[a];
      cfg.on_state(g);
    }
    if (cfg.dedup == DedupMode::history && !full && eng.emits(stored)) {
      EventStructure es = canonicalize(eng.reconstruct(index));
      std::string key = canonical_text(es);
      if (!emitted.count(key)) {
        if (emitted.size() >= cfg.max_structures) {
          sys.budget_exceeded = true;
          full = true;
        } else {
          emitted.emplace(std::move(key), std::move(es));
        }
      }
    }
    work.push_back(index);
  };

  for (Node& r : eng.roots()) visit(std::move(r));

  while (!work.empty() && !full) {
    int cur = work.front();
    work.pop_front();
    if (eng.nodes[cur].depth >= cfg.depth) continue;
    for (const Engine::Candidate& c : eng.moves_of(eng.nodes[cur])) {
      Node m = eng.apply(eng.nodes[cur], cur, c);
      eng.finish(m, static_cast<int>(eng.nodes.size()));
      visit(std::move(m));
      if (full) break;
    }
    if (full) break;
    // head drops on lossy FIFO links
    for (size_t li = 0; li < eng.links.size() && !full; ++li) {
      const ChannelSpec& ch = cfg.channel_for(eng.links[li].name);
      if (!ch.lossy || ch.reorder) continue;
      if (eng.nodes[cur].queues[li].empty()) continue;
      Node m = eng.nodes[cur];
      m.parent = cur;
      m.is_drop = true;
      m.updates.clear();
      m.queues[li].erase(m.queues[li].begin());
      visit(std::move(m));
    }
  }

  for (auto& [key, es] : emitted) {
    sys.canon.push_back(key);
    sys.structures.push_back(std::move(es));
  }
  return sys;
}

bool check_fairsend(const EventStructure& es, const std::string& link, int w) {
  const Link* l = es.link(link);
  if (!l) fail("UnknownLink", "no link '" + link + "' in the structure");
  std::string mv = msg_var(link);
  std::vector<int> sends;  // positions in source order
  auto it = es.per_agent.find(l->source);
  const std::vector<int> empty;
  const std::vector<int>& order = it == es.per_agent.end() ? empty : it->second;
  for (size_t k = 0; k < order.size(); ++k) {
    const LocalState& a = es.after.at(order[k]);
    if (a.has(mv) && !a.get(mv).is_bottom()) sends.push_back(static_cast<int>(k));
  }
  std::vector<int> delivered_pos;  // source positions of delivered sends
  for (const Event& e : es.events)
    if (e.is_rcv && e.channel == link)
      delivered_pos.push_back(es.position(es.send_of.at(e.id)));
  if (w <= 0) w = 1;
  for (size_t p = 0; p + w <= sends.size(); ++p) {
    bool ok = false;
    for (int dp : delivered_pos)
      if (dp >= sends[p]) ok = true;
    if (!ok) return false;
  }
  return true;
}

Specification fairsend_spec(const std::string& link, int w) {
  return {"FairSend(" + link + "," + std::to_string(w) + ")",
          [link, w](const EventStructure& es, std::string* why) {
            if (check_fairsend(es, link, w)) return true;
            if (why)
              *why = std::to_string(w) + " consecutive sends on " + link +
                     " without a delivery at or after the first";
            return false;
          }};
}

// ---- fair scheduler -----------------------------------------------------

namespace {

struct MoveClass {
  bool is_link = false;
  std::string agent;
  std::string name;  // action or link
};

}  // namespace

EventStructure run_fair(const Interpretation& i, const MessageAutomaton& pg,
                        const ExploreConfig& cfg, uint32_t seed) {
  Engine eng(i, pg, cfg);
  std::mt19937 rng(seed);

  std::vector<MoveClass> classes;
  for (const std::string& a : eng.agents) {
    for (const auto& [agent, action] : eng.action_list)
      if (agent == a) classes.push_back({false, a, action});
    for (const std::string& l : eng.out_links.at(a)) classes.push_back({true, a, l});
  }

  // one deterministic initial assignment; multi-valued inputs drawn from rng
  std::vector<std::string> actions;
  for (const auto& [act, owner] : pg.sig.actions) actions.push_back(act);
  EsBuilder b(eng.agents, pg.sig.links, actions);
  for (const std::string& a : eng.agents)
    for (const VarDecl& d : eng.decls.at(a)) {
      std::vector<Value> choices = eng.init_choices(d);
      if (choices.empty()) fail("UnboundedBranching", "no initial value for " + d.name);
      Value v = choices.size() == 1 ? choices[0] : choices[rng() % choices.size()];
      b.declare_var(a, d.name, v);
    }
  // evaluation contexts carry the history in observable form
  auto obs = [&](const std::string& a) { return observable_local(b.es, b.cur.at(a)); };
  for (const BasicProgram* ini : eng.mem.initially)
    if (!eng.eval_f(ini->formula, ini->agent, obs(ini->agent)))
      fail("EmptySemantics", "initial condition rejects the chosen initial state");

  std::vector<std::vector<QEntry>> queues(eng.links.size());
  std::vector<int> fair_age(eng.mem.fairness.size(), 0);
  std::vector<int> link_age(eng.links.size(), 0);

  auto enabled_action = [&](const MoveClass& c) {
    auto pit = eng.mem.precs.find({c.agent, c.name});
    if (pit == eng.mem.precs.end()) return true;
    for (const Formula* f : pit->second)
      if (!eng.eval_f(*f, c.agent, obs(c.agent))) return false;
    return true;
  };

  // Applies one move; returns false if the class has no candidate.
  auto fire_action = [&](const std::string& agent, const std::string& action) {
    Event ev;
    ev.agent = agent;
    ev.is_rcv = false;
    ev.channel = action;
    auto cands = eng.event_candidates(agent, ev, obs(agent), nullptr);
    if (cands.empty()) return false;
    const Engine::Candidate& c = cands.size() == 1 ? cands[0] : cands[rng() % cands.size()];
    int id = b.add_local(agent, action, c.updates, c.ev.value);
    for (const std::string& l : eng.out_links.at(agent)) {
      auto u = c.updates.find(msg_var(l));
      if (u == c.updates.end()) continue;
      queues[eng.link_idx.at(l)].push_back({id, 0, u->second});
    }
    return true;
  };

  auto deliver = [&](size_t li) {
    auto& q = queues[li];
    const Link& l = eng.links[li];
    const ChannelSpec& ch = cfg.channel_for(l.name);
    if (q.empty()) return false;
    while (ch.lossy && link_age[li] < cfg.window - 1 && rng() % 3 == 0) {
      q.erase(q.begin());
      if (q.empty()) return false;
    }
    size_t pick = 0;
    if (ch.reorder && q.size() > 1) pick = rng() % q.size();
    QEntry ent = q[pick];
    Event ev;
    ev.agent = l.dest;
    ev.is_rcv = true;
    ev.channel = l.name;
    auto cands = eng.event_candidates(l.dest, ev, obs(l.dest), &ent.value);
    if (cands.empty()) return false;
    const Engine::Candidate& c = cands.size() == 1 ? cands[0] : cands[rng() % cands.size()];
    int id = b.add_rcv(l.dest, l.name, ent.send_node, c.updates, c.ev.value);
    for (const std::string& ol : eng.out_links.at(l.dest)) {
      auto u = c.updates.find(msg_var(ol));
      if (u == c.updates.end()) continue;
      queues[eng.link_idx.at(ol)].push_back({id, 0, u->second});
    }
    if (!ch.dup) q.erase(q.begin() + pick);
    link_age[li] = 0;
    return true;
  };

  size_t rot = classes.empty() ? 0 : seed % classes.size();
  int events = 0;
  while (events < cfg.depth) {
    bool moved = false;
    // overdue obligations first
    for (size_t f = 0; f < eng.mem.fairness.size() && !moved; ++f) {
      if (fair_age[f] < cfg.window) continue;
      const BasicProgram* fb = eng.mem.fairness[f];
      if (!enabled_action({false, fb->agent, fb->action})) continue;
      moved = fire_action(fb->agent, fb->action);
    }
    for (size_t li = 0; li < eng.links.size() && !moved; ++li) {
      if (link_age[li] < cfg.window || queues[li].empty()) continue;
      moved = deliver(li);
    }
    // rotation
    for (size_t step = 0; step < classes.size() && !moved; ++step) {
      const MoveClass& c = classes[(rot + step) % classes.size()];
      if (c.is_link) {
        moved = deliver(eng.link_idx.at(c.name));
      } else if (enabled_action(c)) {
        moved = fire_action(c.agent, c.name);
      }
      if (moved) rot = (rot + step + 1) % classes.size();
    }
    if (!moved) break;
    ++events;
    for (size_t f = 0; f < eng.mem.fairness.size(); ++f) {
      const BasicProgram* fb = eng.mem.fairness[f];
      const Event& last = b.es.events.back();
      bool fired = last.agent == fb->agent && !last.is_rcv && last.channel == fb->action;
      if (fired || !eng.eval_f(fb->formula, fb->agent, obs(fb->agent)))
        fair_age[f] = 0;
      else
        fair_age[f]++;
    }
    for (size_t li = 0; li < eng.links.size(); ++li)
      link_age[li] = queues[li].empty() ? 0 : link_age[li] + 1;
  }
  return canonicalize(b.take());
}

// ---- decomposition ------------------------------------------------------

std::string DecompReport::summary() const {
  std::ostringstream o;
  o << (ok ? "PASS" : "FAIL") << " (bounded-scale check, not a proof)\n";
  for (const DecompStep& s : steps) {
    o << "  " << (s.ok ? "pass" : "FAIL") << "  " << s.label;
    if (!s.detail.empty()) o << ": " << s.detail;
    o << "\n";
  }
  return o.str();
}

DecompReport verify_decomposition(
    const Interpretation& i, const Specification& goal,
    const std::vector<std::pair<Specification, MessageAutomaton>>& parts,
    const ExploreConfig& cfg) {
  DecompReport r;
  MessageAutomaton composed;
  for (size_t k = 0; k < parts.size(); ++k)
    composed = k == 0 ? parts[k].second : compose(composed, parts[k].second);
  r.composed = composed;

  System sys = explore(i, composed, cfg);
  if (sys.budget_exceeded)
    fail("ExplorationBudgetExceeded", "composed exploration truncated");

  DecompStep s1{"joint part specs imply goal '" + goal.tag + "'", true, ""};
  for (const EventStructure& es : sys.structures) {
    bool all = true;
    for (const auto& [spec, part] : parts) {
      std::string w;
      if (!spec.check(es, &w)) all = false;
    }
    if (!all) continue;
    std::string w;
    if (!goal.check(es, &w)) {
      s1.ok = false;
      s1.detail = w + " on a structure with " + std::to_string(es.events.size()) +
                  " events satisfying all part specs";
      break;
    }
  }
  r.steps.push_back(s1);

  for (size_t k = 0; k < parts.size(); ++k) {
    DecompStep s{"part " + std::to_string(k + 1) + " meets '" + parts[k].first.tag + "'",
                 true, ""};
    MessageAutomaton over_merged = parts[k].second;
    over_merged.sig = composed.sig;
    System pk = explore(i, over_merged, cfg);
    if (pk.budget_exceeded)
      fail("ExplorationBudgetExceeded", "part exploration truncated");
    for (const EventStructure& es : pk.structures) {
      std::string w;
      if (!parts[k].first.check(es, &w)) {
        s.ok = false;
        s.detail = w;
        break;
      }
    }
    r.steps.push_back(s);
  }

  DecompStep s3{"composition meets goal '" + goal.tag + "'", true, ""};
  for (const EventStructure& es : sys.structures) {
    std::string w;
    if (!goal.check(es, &w)) {
      s3.ok = false;
      s3.detail = w;
      break;
    }
  }
  r.steps.push_back(s3);

  r.ok = std::all_of(r.steps.begin(), r.steps.end(),
                     [](const DecompStep& s) { return s.ok; });
  return r;
}

}  // namespace ew
