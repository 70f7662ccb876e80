#include "ew/events.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace ew {

std::string to_string(const LocalState& s) {
  std::string out = "{";
  bool first = true;
  for (const auto& [k, v] : s.vars) {
    if (!first) out += ",";
    first = false;
    out += k + "=" + to_string(v);
  }
  return out + "}";
}

const Link* EventStructure::link(const std::string& name) const {
  for (const Link& l : links)
    if (l.name == name) return &l;
  return nullptr;
}

int EventStructure::position(int id) const {
  const auto& order = per_agent.at(events.at(id).agent);
  auto it = std::find(order.begin(), order.end(), id);
  return it == order.end() ? -1 : static_cast<int>(it - order.begin());
}

GlobalState EventStructure::initial_global() const {
  GlobalState g;
  for (const auto& a : agents) {
    auto it = initstate.find(a);
    g[a] = it == initstate.end() ? LocalState{} : it->second;
  }
  return g;
}

namespace {

// Direct predecessor edges: previous event of the same agent, and the send
// of a receive.
std::vector<std::vector<int>> direct_succs(const EventStructure& es) {
  std::vector<std::vector<int>> succ(es.events.size());
  for (const auto& [agent, order] : es.per_agent)
    for (size_t k = 1; k < order.size(); ++k) succ[order[k - 1]].push_back(order[k]);
  for (const auto& [rcv, snd] : es.send_of)
    if (snd >= 0 && snd < static_cast<int>(es.events.size())) succ[snd].push_back(rcv);
  return succ;
}

std::vector<int> topo_order(const EventStructure& es, bool* cyclic) {
  size_t n = es.events.size();
  auto succ = direct_succs(es);
  std::vector<int> indeg(n, 0);
  for (const auto& ss : succ)
    for (int t : ss) ++indeg[t];
  // ready events picked by (agent, position) for canonical numbering
  auto key = [&](int id) {
    return std::make_pair(es.events[id].agent, es.position(id));
  };
  std::vector<int> ready;
  for (size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
  std::vector<int> out;
  while (!ready.empty()) {
    auto it = std::min_element(ready.begin(), ready.end(),
                               [&](int a, int b) { return key(a) < key(b); });
    int id = *it;
    ready.erase(it);
    out.push_back(id);
    for (int t : succ[id])
      if (--indeg[t] == 0) ready.push_back(t);
  }
  if (cyclic) *cyclic = out.size() != n;
  return out;
}

}  // namespace

std::vector<Violation> validate(const EventStructure& es) {
  std::vector<Violation> v;
  auto bad = [&](const std::string& axiom, const std::string& detail) {
    v.push_back({axiom, detail});
  };

  size_t n = es.events.size();
  std::vector<int> seen(n, 0);
  for (size_t i = 0; i < n; ++i) {
    const Event& e = es.events[i];
    if (e.id != static_cast<int>(i)) bad("Structure", "event at index " + std::to_string(i) + " has id " + std::to_string(e.id));
    if (std::find(es.agents.begin(), es.agents.end(), e.agent) == es.agents.end())
      bad("Structure", "event " + std::to_string(i) + " names unknown agent " + e.agent);
    if (e.is_rcv) {
      const Link* l = es.link(e.channel);
      if (!l) {
        bad("Structure", "event " + std::to_string(i) + " receives on unknown link " + e.channel);
      } else if (l->dest != e.agent) {
        bad("RcvValue", "event " + std::to_string(i) + " receives on " + e.channel +
                            " but is not at dest " + l->dest);
      }
    } else if (std::find(es.actions.begin(), es.actions.end(), e.channel) == es.actions.end()) {
      bad("Structure", "event " + std::to_string(i) + " has unknown action " + e.channel);
    }
    if (!es.before.count(e.id) || !es.after.count(e.id))
      bad("Structure", "event " + std::to_string(i) + " is missing states");
  }
  for (const auto& [agent, order] : es.per_agent) {
    for (int id : order) {
      if (id < 0 || id >= static_cast<int>(n)) {
        bad("TotalOrder", "agent " + agent + " order names unknown event " + std::to_string(id));
        continue;
      }
      if (es.events[id].agent != agent)
        bad("TotalOrder", "event " + std::to_string(id) + " listed under wrong agent " + agent);
      if (seen[id]++)
        bad("TotalOrder", "event " + std::to_string(id) + " appears twice in agent orders");
    }
  }
  for (size_t i = 0; i < n; ++i)
    if (!seen[i]) bad("TotalOrder", "event " + std::to_string(i) + " missing from agent orders");
  if (!v.empty()) return v;  // structural problems make the rest unreliable

  // RcvValue and send map well-formedness
  for (const Event& e : es.events) {
    if (!e.is_rcv) continue;
    auto it = es.send_of.find(e.id);
    if (it == es.send_of.end()) {
      bad("RcvValue", "receive " + std::to_string(e.id) + " has no send");
      continue;
    }
    int snd = it->second;
    if (snd < 0 || snd >= static_cast<int>(n)) {
      bad("RcvValue", "receive " + std::to_string(e.id) + " maps to unknown send " + std::to_string(snd));
      continue;
    }
    const Link* l = es.link(e.channel);
    const Event& se = es.events[snd];
    if (l && se.agent != l->source)
      bad("RcvValue", "send " + std::to_string(snd) + " of receive " + std::to_string(e.id) +
                          " is not at source " + l->source);
    const LocalState& sa = es.after.at(snd);
    std::string mv = msg_var(e.channel);
    if (!sa.has(mv) || sa.get(mv) != e.value)
      bad("RcvValue", "receive " + std::to_string(e.id) + " value " + to_string(e.value) +
                          " differs from msg(" + e.channel + ") after send " + std::to_string(snd));
  }
  for (const auto& [rcv, snd] : es.send_of)
    if (rcv < 0 || rcv >= static_cast<int>(n) || !es.events[rcv].is_rcv)
      bad("RcvValue", "send map entry for non-receive " + std::to_string(rcv));

  // First, history threading, val threading, FrameBetween
  for (const auto& agent : es.agents) {
    auto oit = es.per_agent.find(agent);
    if (oit == es.per_agent.end() || oit->second.empty()) continue;
    const auto& order = oit->second;
    const LocalState& init = es.initstate.at(agent);
    if (es.before.at(order[0]) != init)
      bad("First", "state before first event of " + agent + " differs from initstate");
    for (size_t k = 0; k < order.size(); ++k) {
      int id = order[k];
      const LocalState& b = es.before.at(id);
      const LocalState& a = es.after.at(id);
      if (k > 0) {
        const LocalState& pa = es.after.at(order[k - 1]);
        if (pa != b) {
          std::string diff;
          for (const auto& [key, val] : pa.vars)
            if (!b.has(key) || b.get(key) != val) { diff = key; break; }
          bad("FrameBetween", "state before event " + std::to_string(id) +
                                  " differs from state after its pred at '" + diff + "'");
        }
      }
      if (!a.has(kValVar) || a.get(kValVar) != es.events[id].value)
        bad("ValAfter", "val after event " + std::to_string(id) + " is not the event value");
      Value hb = b.has(kHistVar) ? b.get(kHistVar) : v_seq({});
      Value ha = a.has(kHistVar) ? a.get(kHistVar) : v_seq({});
      if (hb.tag == Value::Tag::Bottom) hb = v_seq({});
      bool ok = ha.tag == Value::Tag::Seq && hb.tag == Value::Tag::Seq &&
                ha.kids.size() == hb.kids.size() + 1 &&
                std::equal(hb.kids.begin(), hb.kids.end(), ha.kids.begin()) &&
                ha.kids.back() == v_nat(static_cast<uint64_t>(id));
      if (!ok) bad("History", "history does not grow by event " + std::to_string(id));
    }
  }

  bool cyclic = false;
  topo_order(es, &cyclic);
  if (cyclic) bad("WellFounded", "causal order has a cycle");
  return v;
}

std::set<std::pair<int, int>> causal_order(const EventStructure& es) {
  bool cyclic = false;
  topo_order(es, &cyclic);
  if (cyclic) fail("CycleDetected", "causal order has a cycle");
  auto succ = direct_succs(es);
  std::set<std::pair<int, int>> rel;
  size_t n = es.events.size();
  for (size_t s = 0; s < n; ++s) {
    std::deque<int> q(succ[s].begin(), succ[s].end());
    std::set<int> vis;
    while (!q.empty()) {
      int t = q.front();
      q.pop_front();
      if (!vis.insert(t).second) continue;
      rel.emplace(static_cast<int>(s), t);
      for (int u : succ[t]) q.push_back(u);
    }
  }
  return rel;
}

std::set<int> ConsistentCut::event_ids() const {
  std::set<int> ids;
  for (size_t a = 0; a < es->agents.size(); ++a) {
    const auto& order = es->per_agent.at(es->agents[a]);
    for (int k = 0; k < frontier[a]; ++k) ids.insert(order[k]);
  }
  return ids;
}

bool ConsistentCut::contains(int id) const {
  const Event& e = es->ev(id);
  size_t a = std::find(es->agents.begin(), es->agents.end(), e.agent) - es->agents.begin();
  return es->position(id) < frontier[a];
}

GlobalState ConsistentCut::state() const {
  GlobalState g;
  for (size_t a = 0; a < es->agents.size(); ++a) {
    const std::string& agent = es->agents[a];
    const auto& order = es->per_agent.at(agent);
    if (frontier[a] == 0)
      g[agent] = es->initstate.at(agent);
    else
      g[agent] = es->after.at(order[frontier[a] - 1]);
  }
  return g;
}

bool ConsistentCut::is_full() const {
  for (size_t a = 0; a < es->agents.size(); ++a)
    if (frontier[a] != static_cast<int>(es->per_agent.at(es->agents[a]).size()))
      return false;
  return true;
}

std::vector<ConsistentCut> enumerate_cuts(const EventStructure& es, uint64_t cap) {
  size_t na = es.agents.size();
  std::map<std::string, size_t> aidx;
  for (size_t a = 0; a < na; ++a) aidx[es.agents[a]] = a;

  // A frontier extension by agent a is admissible when the next event's send
  // (if it is a receive) is already inside the cut; the local predecessor is
  // inside by construction.
  auto admissible = [&](const std::vector<int>& f, size_t a) {
    const auto& order = es.per_agent.at(es.agents[a]);
    if (f[a] >= static_cast<int>(order.size())) return false;
    int id = order[f[a]];
    const Event& e = es.events[id];
    if (!e.is_rcv) return true;
    int snd = es.send_of.at(id);
    const Event& se = es.events[snd];
    size_t sa = aidx.at(se.agent);
    return es.position(snd) < f[sa];
  };

  std::set<std::vector<int>> seen;
  std::deque<std::vector<int>> q;
  std::vector<int> zero(na, 0);
  seen.insert(zero);
  q.push_back(zero);
  while (!q.empty()) {
    std::vector<int> f = q.front();
    q.pop_front();
    for (size_t a = 0; a < na; ++a) {
      if (!admissible(f, a)) continue;
      std::vector<int> g = f;
      ++g[a];
      if (seen.insert(g).second) {
        if (seen.size() > cap)
          fail("CutBudgetExceeded", "more than " + std::to_string(cap) + " cuts");
        q.push_back(g);
      }
    }
  }
  std::vector<ConsistentCut> out;
  out.reserve(seen.size());
  for (const auto& f : seen) {
    ConsistentCut c;
    c.es = &es;
    c.frontier = f;
    out.push_back(std::move(c));
  }
  return out;  // set iteration is lexicographic, the canonical ordering
}

CutOrder cut_order(const ConsistentCut& c1, const ConsistentCut& c2) {
  if (c1.es != c2.es) fail("DifferentStructures", "cut order needs one structure");
  bool le = true, ge = true;
  for (size_t a = 0; a < c1.frontier.size(); ++a) {
    if (c1.frontier[a] > c2.frontier[a]) le = false;
    if (c1.frontier[a] < c2.frontier[a]) ge = false;
  }
  if (le && ge) return CutOrder::equals;
  if (le) return CutOrder::precedes;
  if (ge) return CutOrder::succeeds;
  return CutOrder::incomparable;
}

LocalState observable_local(const EventStructure& es, const LocalState& s) {
  LocalState o = s;
  auto it = o.vars.find(kHistVar);
  if (it == o.vars.end()) return o;
  Value h = it->second;
  std::vector<Value> obs;
  if (h.tag == Value::Tag::Seq) {
    for (const Value& idv : h.kids) {
      const Event& e = es.ev(static_cast<int>(idv.nat));
      obs.push_back(v_pair(v_agent(e.kind_string()), e.value));
    }
  }
  it->second = v_seq(std::move(obs));
  return o;
}

std::string observable_key(const EventStructure& es, const std::string& agent,
                           const ConsistentCut& c) {
  size_t a = std::find(es.agents.begin(), es.agents.end(), agent) - es.agents.begin();
  const auto& order = es.per_agent.at(agent);
  const LocalState& raw =
      c.frontier[a] == 0 ? es.initstate.at(agent) : es.after.at(order[c.frontier[a] - 1]);
  return to_string(observable_local(es, raw));
}

bool local_equiv(const ConsistentCut& c1, const ConsistentCut& c2,
                 const std::string& agent) {
  return observable_key(*c1.es, agent, c1) == observable_key(*c2.es, agent, c2);
}

EventStructure canonicalize(const EventStructure& es) {
  bool cyclic = false;
  std::vector<int> order = topo_order(es, &cyclic);
  if (cyclic) fail("CycleDetected", "cannot canonicalize a cyclic structure");
  std::vector<int> newid(es.events.size());
  for (size_t k = 0; k < order.size(); ++k) newid[order[k]] = static_cast<int>(k);

  EventStructure out = es;
  out.events.clear();
  out.events.resize(es.events.size());
  out.send_of.clear();
  out.before.clear();
  out.after.clear();
  auto renum_hist = [&](LocalState s) {
    auto it = s.vars.find(kHistVar);
    if (it != s.vars.end() && it->second.tag == Value::Tag::Seq)
      for (Value& idv : it->second.kids) idv = v_nat(newid[idv.nat]);
    return s;
  };
  for (const Event& e : es.events) {
    Event ne = e;
    ne.id = newid[e.id];
    out.events[ne.id] = ne;
    out.before[ne.id] = renum_hist(es.before.at(e.id));
    out.after[ne.id] = renum_hist(es.after.at(e.id));
  }
  for (auto& [agent, ids] : out.per_agent)
    for (int& id : ids) id = newid[id];
  for (const auto& [rcv, snd] : es.send_of) out.send_of[newid[rcv]] = newid[snd];
  return out;
}

std::string canonical_text(const EventStructure& es) {
  std::ostringstream o;
  o << "agents";
  for (const auto& a : es.agents) o << " " << a;
  o << "\n";
  std::vector<Link> links = es.links;
  std::sort(links.begin(), links.end(),
            [](const Link& a, const Link& b) { return a.name < b.name; });
  for (const Link& l : links) o << "link " << l.name << " " << l.source << " " << l.dest << "\n";
  std::vector<std::string> acts = es.actions;
  std::sort(acts.begin(), acts.end());
  for (const auto& a : acts) o << "action " << a << "\n";
  for (const auto& agent : es.agents) {
    auto it = es.initstate.find(agent);
    if (it == es.initstate.end()) continue;
    for (const auto& [k, v] : it->second.vars)
      o << "init " << agent << " " << k << " " << to_string(v) << "\n";
  }
  for (const Event& e : es.events)
    o << e.id << " " << e.agent << " " << e.kind_string() << " " << to_string(e.value) << "\n";
  for (const auto& [rcv, snd] : es.send_of) o << rcv << " -> " << snd << "\n";
  for (const Event& e : es.events) {
    const LocalState& b = es.before.at(e.id);
    const LocalState& a = es.after.at(e.id);
    for (const auto& [k, v] : a.vars) {
      if (k == kHistVar || k == kValVar) continue;
      if (!b.has(k) || b.get(k) != v)
        o << "set " << e.id << " " << k << " " << to_string(v) << "\n";
    }
  }
  return o.str();
}

EsBuilder::EsBuilder(std::vector<std::string> agents, std::vector<Link> links,
                     std::vector<std::string> actions) {
  std::sort(agents.begin(), agents.end());
  es.agents = std::move(agents);
  es.links = std::move(links);
  es.actions = std::move(actions);
  for (const auto& a : es.agents) {
    LocalState s;
    s.set(kValVar, v_bottom());
    s.set(kHistVar, v_seq({}));
    es.initstate[a] = s;
    es.per_agent[a] = {};
    es.vars_of[a] = {};
  }
  for (const Link& l : es.links) {
    es.vars_of[l.source].insert(msg_var(l.name));
    es.initstate[l.source].set(msg_var(l.name), v_bottom());
  }
  cur = es.initstate;
}

void EsBuilder::declare_var(const std::string& agent, const std::string& name, Value init) {
  es.vars_of[agent].insert(name);
  es.initstate[agent].set(name, init);
  cur[agent].set(name, std::move(init));
}

int EsBuilder::add_event(Event e, const std::map<std::string, Value>& updates) {
  e.id = static_cast<int>(es.events.size());
  LocalState before = cur.at(e.agent);
  LocalState after = before;
  for (const auto& mv : es.vars_of.at(e.agent))
    if (is_msg_var(mv)) after.set(mv, v_bottom());
  for (const auto& [k, v] : updates) after.set(k, v);
  after.set(kValVar, e.value);
  Value h = before.get(kHistVar);
  if (h.tag != Value::Tag::Seq) h = v_seq({});
  h.kids.push_back(v_nat(static_cast<uint64_t>(e.id)));
  after.set(kHistVar, h);
  es.before[e.id] = before;
  es.after[e.id] = after;
  cur[e.agent] = after;
  es.per_agent[e.agent].push_back(e.id);
  es.events.push_back(e);
  return e.id;
}

int EsBuilder::add_local(const std::string& agent, const std::string& action,
                         const std::map<std::string, Value>& updates,
                         std::optional<Value> value) {
  Event e;
  e.agent = agent;
  e.is_rcv = false;
  e.channel = action;
  if (value) {
    e.value = *value;
  } else {
    std::vector<Value> sent;
    for (const auto& [k, v] : updates)
      if (is_msg_var(k) && !v.is_bottom()) sent.push_back(v);
    e.value = sent.empty() ? v_bottom() : sent.size() == 1 ? sent[0] : v_seq(sent);
  }
  return add_event(std::move(e), updates);
}

int EsBuilder::add_rcv(const std::string& agent, const std::string& link, int send_id,
                       const std::map<std::string, Value>& updates,
                       std::optional<Value> value) {
  Event e;
  e.agent = agent;
  e.is_rcv = true;
  e.channel = link;
  if (value) {
    e.value = *value;
  } else {
    const LocalState& sa = es.after.at(send_id);
    e.value = sa.has(msg_var(link)) ? sa.get(msg_var(link)) : v_bottom();
  }
  int id = add_event(std::move(e), updates);
  es.send_of[id] = send_id;
  return id;
}

EventStructure EsBuilder::take() { return std::move(es); }

}  // namespace ew
