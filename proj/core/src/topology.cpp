#include "fedmesh/topology.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <set>

#include "fedmesh/errors.hpp"

namespace fedmesh {

namespace {

std::pair<std::string, std::string> ordered(const std::string& a, const std::string& b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

}  // namespace

Topology Topology::build(const TopologyConfig& cfg, bool require_connected) {
  Topology t;
  if (cfg.routers.empty()) throw ConfigError("topology: router list is empty");

  std::set<std::string> ids;
  for (const auto& r : cfg.routers) {
    if (r.empty()) throw ConfigError("topology: empty router id");
    if (r.front() == '@') throw ConfigError("topology: router id may not start with '@': " + r);
    if (!ids.insert(r).second) throw ConfigError("topology: duplicate router id: " + r);
  }
  t.routers_ = cfg.routers;
  std::sort(t.routers_.begin(), t.routers_.end());

  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& l : cfg.links) {
    if (!ids.count(l.a) || !ids.count(l.b))
      throw ConfigError("topology: link references unknown router: " + l.a + "-" + l.b);
    if (l.a == l.b) throw ConfigError("topology: self-link on " + l.a);
    if (!seen.insert(ordered(l.a, l.b)).second)
      throw ConfigError("topology: duplicate link: " + l.a + "-" + l.b);
    if (!(l.capacity_mbps > 0))
      throw ConfigError("topology: non-positive capacity on link " + l.a + "-" + l.b);
    if (l.proc_delay_ms < 0)
      throw ConfigError("topology: negative proc delay on link " + l.a + "-" + l.b);
    t.links_.push_back(l);
    t.adj_[l.a].push_back(l.b);
    t.adj_[l.b].push_back(l.a);
    const auto params = std::make_pair(l.capacity_mbps * 1e6, l.proc_delay_ms);
    t.link_params_[{l.a, l.b}] = params;
    t.link_params_[{l.b, l.a}] = params;
  }
  for (auto& [r, nbrs] : t.adj_) std::sort(nbrs.begin(), nbrs.end());

  for (const auto& [ep, router] : cfg.hosts) {
    if (ep.empty()) throw ConfigError("topology: empty endpoint id");
    if (ep.front() == '@') throw ConfigError("topology: endpoint id may not start with '@': " + ep);
    if (ids.count(ep)) throw ConfigError("topology: endpoint id collides with router id: " + ep);
    if (!ids.count(router))
      throw ConfigError("topology: host " + ep + " attaches to unknown router " + router);
  }
  t.hosts_ = cfg.hosts;

  if (require_connected && t.routers_.size() > 1) {
    std::set<std::string> reached;
    std::deque<std::string> frontier{t.routers_.front()};
    reached.insert(t.routers_.front());
    while (!frontier.empty()) {
      auto r = frontier.front();
      frontier.pop_front();
      auto it = t.adj_.find(r);
      if (it == t.adj_.end()) continue;
      for (const auto& n : it->second)
        if (reached.insert(n).second) frontier.push_back(n);
    }
    if (reached.size() != t.routers_.size())
      throw ConfigError("topology: router graph is disconnected");
  }
  return t;
}

bool Topology::has_router(const std::string& id) const {
  return std::binary_search(routers_.begin(), routers_.end(), id);
}

const std::vector<std::string>& Topology::neighbors(const std::string& router) const {
  static const std::vector<std::string> kNone;
  auto it = adj_.find(router);
  return it == adj_.end() ? kNone : it->second;
}

const std::string& Topology::router_of(const std::string& endpoint) const {
  if (!endpoint.empty() && endpoint.front() == '@') {
    auto it = std::lower_bound(routers_.begin(), routers_.end(), endpoint.substr(1));
    if (it != routers_.end() && *it == endpoint.substr(1)) return *it;
    throw ConfigError("unknown control endpoint: " + endpoint);
  }
  auto it = hosts_.find(endpoint);
  if (it == hosts_.end()) throw ConfigError("unknown endpoint: " + endpoint);
  return it->second;
}

double Topology::capacity_bps(const std::string& from, const std::string& to) const {
  auto it = link_params_.find({from, to});
  if (it == link_params_.end()) throw ConfigError("no link " + from + "->" + to);
  return it->second.first;
}

double Topology::proc_delay_ms(const std::string& from, const std::string& to) const {
  auto it = link_params_.find({from, to});
  if (it == link_params_.end()) throw ConfigError("no link " + from + "->" + to);
  return it->second.second;
}

bool Topology::has_link(const std::string& from, const std::string& to) const {
  return link_params_.count({from, to}) > 0;
}

namespace {

void dfs_all_paths(const Topology& topo, const std::string& node, const std::string& egress,
                   Path& cur, std::set<std::string>& on_path, std::vector<Path>& out) {
  if (node == egress) {
    out.push_back(cur);
    return;
  }
  for (const auto& n : topo.neighbors(node)) {
    if (on_path.count(n)) continue;
    cur.push_back(n);
    on_path.insert(n);
    dfs_all_paths(topo, n, egress, cur, on_path, out);
    on_path.erase(n);
    cur.pop_back();
  }
}

// Uniform-cost search over simple paths: partial paths pop in
// (length, lexicographic) order, so completed paths are emitted as the
// k minimum-hop paths with deterministic tie-breaks.
std::vector<Path> k_min_hop_paths(const Topology& topo, const std::string& ingress,
                                  const std::string& egress, int k) {
  struct Cmp {
    bool operator()(const Path& a, const Path& b) const {
      if (a.size() != b.size()) return a.size() > b.size();
      return a > b;  // min-heap: lexicographically smaller first
    }
  };
  std::priority_queue<Path, std::vector<Path>, Cmp> frontier;
  frontier.push({ingress});
  std::vector<Path> out;
  std::size_t expansions = 0;
  while (!frontier.empty() && static_cast<int>(out.size()) < k) {
    if (++expansions > 5'000'000)
      throw ConfigError("path enumeration budget exceeded between " + ingress + " and " + egress);
    Path p = frontier.top();
    frontier.pop();
    if (p.back() == egress) {
      out.push_back(std::move(p));
      continue;
    }
    for (const auto& n : topo.neighbors(p.back())) {
      if (std::find(p.begin(), p.end(), n) != p.end()) continue;
      Path q = p;
      q.push_back(n);
      frontier.push(std::move(q));
    }
  }
  return out;
}

}  // namespace

std::vector<Path> enumerate_loopfree_paths(const Topology& topo, const std::string& ingress,
                                           const std::string& egress, const RefineConfig& cfg) {
  if (!topo.has_router(ingress)) throw ConfigError("enumerate: unknown ingress " + ingress);
  if (!topo.has_router(egress)) throw ConfigError("enumerate: unknown egress " + egress);
  if (ingress == egress) throw ConfigError("enumerate: ingress equals egress: " + ingress);
  if (cfg.k < 1) throw ConfigError("enumerate: k must be >= 1");

  auto method = cfg.method;
  if (method == RefineConfig::Method::Auto)
    method = topo.size() <= static_cast<std::size_t>(cfg.exhaustive_node_ceiling)
                 ? RefineConfig::Method::ExhaustiveDfs
                 : RefineConfig::Method::KShortest;

  std::vector<Path> paths;
  if (method == RefineConfig::Method::ExhaustiveDfs) {
    Path cur{ingress};
    std::set<std::string> on_path{ingress};
    dfs_all_paths(topo, ingress, egress, cur, on_path, paths);
    std::sort(paths.begin(), paths.end(), [](const Path& a, const Path& b) {
      if (a.size() != b.size()) return a.size() < b.size();
      return a < b;
    });
  } else {
    paths = k_min_hop_paths(topo, ingress, egress, cfg.k);
  }
  return paths;
}

PairActionSpaces refine_action_spaces(const std::vector<Path>& paths) {
  PairActionSpaces spaces;
  if (paths.empty()) return spaces;

  const std::string& ingress = paths.front().front();
  const std::string& egress = paths.front().back();
  std::map<std::string, std::set<std::string>> sets;
  for (const auto& p : paths) {
    if (p.size() < 2) throw ConfigError("refine: path with fewer than two routers");
    if (p.front() != ingress || p.back() != egress)
      throw ConfigError("refine: paths do not share one ingress/egress pair");
    std::set<std::string> visited;
    for (const auto& r : p)
      if (!visited.insert(r).second) throw ConfigError("refine: path revisits router " + r);
    for (std::size_t i = 0; i + 1 < p.size(); ++i) sets[p[i]].insert(p[i + 1]);
  }
  for (auto& [r, s] : sets) spaces[r] = std::vector<std::string>(s.begin(), s.end());
  return spaces;
}

namespace {

void reachable_from(const PairActionSpaces& spaces, const std::string& start,
                    std::set<std::string>& out) {
  std::deque<std::string> frontier{start};
  out.insert(start);
  while (!frontier.empty()) {
    auto r = frontier.front();
    frontier.pop_front();
    auto it = spaces.find(r);
    if (it == spaces.end()) continue;
    for (const auto& n : it->second)
      if (out.insert(n).second) frontier.push_back(n);
  }
}

}  // namespace

PairActionSpaces dag_filter(const PairActionSpaces& spaces, const std::string& ingress,
                            const std::string& egress) {
  if (spaces.empty()) return {};

  // lexicographic DFS forest; edges to a node still on the stack are cycles
  std::set<std::pair<std::string, std::string>> removed;
  std::map<std::string, int> color;  // 0 white, 1 gray, 2 black
  std::vector<std::string> nodes;
  for (const auto& [r, _] : spaces) nodes.push_back(r);

  struct Frame {
    std::string node;
    std::size_t next = 0;
  };
  for (const auto& root : nodes) {
    if (color[root] != 0) continue;
    std::vector<Frame> stack{{root}};
    color[root] = 1;
    while (!stack.empty()) {
      Frame& f = stack.back();
      auto it = spaces.find(f.node);
      const auto* acts = it == spaces.end() ? nullptr : &it->second;
      if (!acts || f.next >= acts->size()) {
        color[f.node] = 2;
        stack.pop_back();
        continue;
      }
      const std::string& child = (*acts)[f.next++];
      int c = color[child];
      if (c == 1) {
        removed.insert({f.node, child});
      } else if (c == 0) {
        color[child] = 1;
        stack.push_back({child});
      }
    }
  }

  PairActionSpaces out;
  for (const auto& [r, acts] : spaces) {
    std::vector<std::string> kept;
    for (const auto& a : acts)
      if (!removed.count({r, a})) kept.push_back(a);
    if (!kept.empty()) out[r] = std::move(kept);
  }

  // cascade: every remaining action must lead to the egress or to a router
  // that still has a way forward; stranded routers are removed outright
  for (bool changed = true; changed;) {
    changed = false;
    for (auto it = out.begin(); it != out.end();) {
      auto& acts = it->second;
      auto end = std::remove_if(acts.begin(), acts.end(), [&](const std::string& a) {
        return a != egress && !out.count(a);
      });
      if (end != acts.end()) {
        acts.erase(end, acts.end());
        changed = true;
      }
      if (acts.empty()) {
        it = out.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
  }

  std::set<std::string> reach;
  reachable_from(out, ingress, reach);
  if (!out.count(ingress) || !reach.count(egress))
    throw ConfigError("dag filter disconnected " + ingress + " from " + egress);
  return out;
}

void ActionSpaceMap::set(const std::string& ingress, const std::string& egress,
                         PairActionSpaces spaces) {
  by_pair_[{ingress, egress}] = std::move(spaces);
}

const std::vector<std::string>* ActionSpaceMap::actions(const std::string& router,
                                                        const std::string& ingress,
                                                        const std::string& egress) const {
  auto it = by_pair_.find({ingress, egress});
  if (it == by_pair_.end()) return nullptr;
  auto jt = it->second.find(router);
  return jt == it->second.end() ? nullptr : &jt->second;
}

const PairActionSpaces* ActionSpaceMap::pair(const std::string& ingress,
                                             const std::string& egress) const {
  auto it = by_pair_.find({ingress, egress});
  return it == by_pair_.end() ? nullptr : &it->second;
}

std::size_t ActionSpaceMap::pair_count(const std::string& router) const {
  std::size_t n = 0;
  for (const auto& [key, spaces] : by_pair_)
    if (spaces.count(router)) ++n;
  return n;
}

}  // namespace fedmesh
