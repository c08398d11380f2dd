#ifndef FEDMESH_TOPOLOGY_HPP
#define FEDMESH_TOPOLOGY_HPP

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fedmesh {

// One undirected wireless link; the simulator instantiates a directed queue
// per direction with these parameters.
struct LinkSpec {
  std::string a;
  std::string b;
  double capacity_mbps = 40.0;
  double proc_delay_ms = 0.5;
};

struct TopologyConfig {
  std::vector<std::string> routers;
  std::vector<LinkSpec> links;
  // endpoint id -> router it attaches to (workers, aggregator, traffic hosts)
  std::map<std::string, std::string> hosts;
};

class Topology {
 public:
  // Validates and freezes a topology. Rejects unknown/duplicate router ids,
  // self-links, duplicate links, non-positive capacities, negative processing
  // delays, dangling host attachments and (by default) disconnected graphs.
  static Topology build(const TopologyConfig& cfg, bool require_connected = true);

  const std::vector<std::string>& routers() const { return routers_; }
  const std::vector<LinkSpec>& links() const { return links_; }
  const std::map<std::string, std::string>& hosts() const { return hosts_; }

  std::size_t size() const { return routers_.size(); }
  bool has_router(const std::string& id) const;
  // sorted by router id, so traversals are deterministic
  const std::vector<std::string>& neighbors(const std::string& router) const;

  // router an endpoint attaches to; "@R5" names router R5's own control plane
  const std::string& router_of(const std::string& endpoint) const;

  // directed link parameter lookup; throws if (from,to) is not a link
  double capacity_bps(const std::string& from, const std::string& to) const;
  double proc_delay_ms(const std::string& from, const std::string& to) const;
  bool has_link(const std::string& from, const std::string& to) const;

 private:
  std::vector<std::string> routers_;
  std::vector<LinkSpec> links_;
  std::map<std::string, std::string> hosts_;
  std::map<std::string, std::vector<std::string>> adj_;
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> link_params_;
};

// A loop-free route, listed ingress first, egress last.
using Path = std::vector<std::string>;

struct RefineConfig {
  enum class Method { Auto, ExhaustiveDfs, KShortest };
  Method method = Method::Auto;
  int k = 16;                      // candidate count for k-shortest
  int exhaustive_node_ceiling = 12;  // Auto switches to k-shortest above this
  bool dag_filter = true;
};

// All candidate simple paths between one ingress/egress pair, sorted by
// (hop count, lexicographic path). Exhaustive DFS below the node ceiling,
// k-minimum-hop enumeration above it.
std::vector<Path> enumerate_loopfree_paths(const Topology& topo,
                                           const std::string& ingress,
                                           const std::string& egress,
                                           const RefineConfig& cfg = {});

// Per-router candidate next hops for one ingress/egress pair. The egress
// router carries no entry (traffic exits there).
using PairActionSpaces = std::map<std::string, std::vector<std::string>>;

// Collapse a path set into per-router action sets: the actions of router r
// are exactly the successors of r across the given paths.
PairActionSpaces refine_action_spaces(const std::vector<Path>& paths);

// Remove back-edges (discovered by lexicographic DFS) from the union of
// action edges so that any walk over the remaining actions provably reaches
// the egress without revisiting a router. Routers whose action set empties
// are cascaded away. Throws ConfigError if pruning disconnects ingress from
// egress.
PairActionSpaces dag_filter(const PairActionSpaces& spaces, const std::string& ingress,
                            const std::string& egress);

// Action spaces for every (ingress, egress) pair a run routes adaptively.
class ActionSpaceMap {
 public:
  void set(const std::string& ingress, const std::string& egress, PairActionSpaces spaces);
  // nullptr when the router has no action set for the pair
  const std::vector<std::string>* actions(const std::string& router,
                                          const std::string& ingress,
                                          const std::string& egress) const;
  const PairActionSpaces* pair(const std::string& ingress, const std::string& egress) const;
  // distinct (ingress, egress) keys this router participates in
  std::size_t pair_count(const std::string& router) const;
  const std::map<std::pair<std::string, std::string>, PairActionSpaces>& by_pair() const {
    return by_pair_;
  }

 private:
  std::map<std::pair<std::string, std::string>, PairActionSpaces> by_pair_;
};

}  // namespace fedmesh

#endif
