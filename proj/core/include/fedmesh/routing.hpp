#ifndef FEDMESH_ROUTING_HPP
#define FEDMESH_ROUTING_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fedmesh/simnet.hpp"
#include "fedmesh/topology.hpp"

namespace fedmesh {

enum class PolicyKind { Greedy, EpsilonGreedyDecay, Softmax, UniformRandom };

struct PolicyConfig {
  PolicyKind kind = PolicyKind::Greedy;
  double alpha = 0.7;        // learning rate, also the estimate smoothing factor
  double epsilon0 = 0.5;     // initial exploration probability
  double decay_beta = 0.99;  // epsilon multiplier per simulated second
  double tau = 2.0;          // softmax temperature
  void validate() const;     // throws ConfigError on out-of-range values
};

struct EstimateReport {
  std::string upstream;  // router the estimate is for
  FlowKey flow;
  double estimate;  // smoothed (-one-hop delay + own value) sample
};

// Per-router learner. Values are indexed by (flow, next hop); missing entries
// read as zero, so untried actions stay optimistic until real delays arrive.
class RouterAgent {
 public:
  RouterAgent(std::string router, const PolicyConfig& cfg, std::uint64_t seed);

  const std::string& router() const { return router_; }

  // policy decision over the refined action set (sorted); greedy ties break
  // to the lexicographically smallest action
  const std::string& select_action(const FlowKey& flow, const std::vector<std::string>& actions,
                                   double now_ms);

  // exponentially weighted update toward a reported sample; the action must
  // be inside the refined set
  double update_q(const FlowKey& flow, const std::string& action, double sample,
                  const std::vector<std::string>& actions);

  double q(const FlowKey& flow, const std::string& action) const;
  double best_q(const FlowKey& flow, const std::vector<std::string>& actions) const;

  // fold one measured hop into the running estimate for an upstream router
  void accumulate(const FlowKey& flow, const std::string& upstream, double sample);

  // estimates refreshed since the previous drain, in deterministic order
  std::vector<EstimateReport> drain_reports();

  double epsilon_at(double now_ms) const;

  // selection probabilities under the softmax policy, exposed for inspection
  std::vector<double> softmax_probs(const FlowKey& flow,
                                    const std::vector<std::string>& actions) const;

  const std::map<std::pair<FlowKey, std::string>, double>& qtable() const { return q_; }

 private:
  std::string router_;
  PolicyConfig cfg_;
  std::mt19937_64 rng_;
  std::map<std::pair<FlowKey, std::string>, double> q_;
  struct Estimate {
    double value = 0;
    bool seeded = false;
    bool dirty = false;
  };
  std::map<std::pair<FlowKey, std::string>, Estimate> est_;
};

// Min-hop distance-vector equivalent: BFS hop counts with lexicographic
// next-hop tie-breaks, fixed for the lifetime of the run.
class BaselineTable {
 public:
  explicit BaselineTable(const Topology& topo);
  std::optional<std::string> next_hop(const std::string& router, const std::string& dst) const;
  int hop_distance(const std::string& from, const std::string& to) const;  // -1 if unreachable

 private:
  std::map<std::pair<std::string, std::string>, std::string> nh_;
  std::map<std::pair<std::string, std::string>, int> dist_;
};

// one-shot convenience wrapper over BaselineTable
std::optional<std::string> baseline_next_hop(const Topology& topo, const std::string& router,
                                             const std::string& dst);

// Fixed min-hop forwarding toward the destination endpoint's router.
class BaselineForwarder : public Forwarder {
 public:
  BaselineForwarder(const Topology& topo, const BaselineTable& table)
      : topo_(topo), table_(table) {}
  std::optional<std::string> next_hop(const std::string& router, const Packet& pkt,
                                      double now_ms) override;

 private:
  const Topology& topo_;
  const BaselineTable& table_;
};

// Static per-flow routes for background traffic pinned to explicit paths;
// anything without a pinned route falls back to the baseline table.
class FixedPathForwarder : public Forwarder {
 public:
  FixedPathForwarder(const Topology& topo, const BaselineTable& table)
      : topo_(topo), table_(table) {}
  void pin(const FlowKey& flow, Path path);
  std::optional<std::string> next_hop(const std::string& router, const Packet& pkt,
                                      double now_ms) override;

 private:
  const Topology& topo_;
  const BaselineTable& table_;
  std::map<FlowKey, Path> routes_;
};

// Adaptive forwarding: every router runs its own agent over the refined
// action spaces; downstream routers meter one-hop delays from telemetry and
// push smoothed estimates back upstream on a fixed period, as zero-payload
// control stubs routed by the baseline table.
class RlForwarder : public Forwarder {
 public:
  RlForwarder(const Topology& topo, const ActionSpaceMap& spaces, const PolicyConfig& cfg,
              std::uint64_t rl_seed);

  std::optional<std::string> next_hop(const std::string& router, const Packet& pkt,
                                      double now_ms) override;
  void on_hop_measured(const std::string& router, const Packet& pkt, const std::string& from,
                       double delay_ms, double now_ms) override;

  // drain all agents and ship estimates upstream through the mesh
  void flush_reports(MeshNet& net);

  // schedule periodic flushes on the event queue until `active` returns false
  void start_reporting(EventQueue& q, MeshNet& net, double period_ms,
                       std::function<bool()> active);

  RouterAgent& agent(const std::string& router);
  const RouterAgent& agent(const std::string& router) const;
  const ActionSpaceMap& spaces() const { return spaces_; }

  // (ingress, egress) routers for a flow, resolved through host attachments
  std::pair<std::string, std::string> flow_routers(const FlowKey& flow) const;

 private:
  const std::vector<std::string>* actions_for(const std::string& router, const FlowKey& flow) const;

  const Topology& topo_;
  ActionSpaceMap spaces_;
  std::map<std::string, RouterAgent> agents_;
  std::vector<std::shared_ptr<std::function<void()>>> timers_;
};

}  // namespace fedmesh

#endif
