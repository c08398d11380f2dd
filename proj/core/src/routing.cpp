#include "fedmesh/routing.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "fedmesh/errors.hpp"
#include "fedmesh/util.hpp"

namespace fedmesh {

void PolicyConfig::validate() const {
  if (!(alpha > 0 && alpha <= 1)) throw ConfigError("routing: alpha must be in (0,1]");
  if (!(tau > 0)) throw ConfigError("routing: tau must be positive");
  if (!(decay_beta > 0 && decay_beta <= 1)) throw ConfigError("routing: decay_beta must be in (0,1]");
  if (!(epsilon0 >= 0 && epsilon0 < 1)) throw ConfigError("routing: epsilon0 must be in [0,1)");
  if (kind == PolicyKind::EpsilonGreedyDecay && epsilon0 <= 0)
    throw ConfigError("routing: epsilon-greedy needs epsilon0 in (0,1)");
}

RouterAgent::RouterAgent(std::string router, const PolicyConfig& cfg, std::uint64_t seed)
    : router_(std::move(router)), cfg_(cfg), rng_(seed) {
  cfg_.validate();
}

double RouterAgent::q(const FlowKey& flow, const std::string& action) const {
  auto it = q_.find({flow, action});
  return it == q_.end() ? 0.0 : it->second;
}

double RouterAgent::best_q(const FlowKey& flow, const std::vector<std::string>& actions) const {
  if (actions.empty()) throw SimError("best_q over empty action set at " + router_);
  double best = q(flow, actions.front());
  for (std::size_t i = 1; i < actions.size(); ++i) best = std::max(best, q(flow, actions[i]));
  return best;
}

double RouterAgent::epsilon_at(double now_ms) const {
  return cfg_.epsilon0 * std::pow(cfg_.decay_beta, now_ms / 1e3);
}

std::vector<double> RouterAgent::softmax_probs(const FlowKey& flow,
                                               const std::vector<std::string>& actions) const {
  std::vector<double> p(actions.size());
  double qmax = best_q(flow, actions);
  double sum = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    p[i] = std::exp((q(flow, actions[i]) - qmax) / cfg_.tau);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

const std::string& RouterAgent::select_action(const FlowKey& flow,
                                              const std::vector<std::string>& actions,
                                              double now_ms) {
  if (actions.empty()) throw SimError("select_action over empty action set at " + router_);
  if (actions.size() == 1) return actions.front();

  const auto greedy_index = [&] {
    std::size_t best = 0;
    double bq = q(flow, actions[0]);
    for (std::size_t i = 1; i < actions.size(); ++i) {
      const double v = q(flow, actions[i]);
      if (v > bq) {
        bq = v;
        best = i;
      }
    }
    return best;  // actions are sorted, so ties keep the smallest id
  };

  switch (cfg_.kind) {
    case PolicyKind::Greedy:
      return actions[greedy_index()];
    case PolicyKind::EpsilonGreedyDecay: {
      const double u = std::uniform_real_distribution<double>(0, 1)(rng_);
      const std::size_t g = greedy_index();
      if (u >= epsilon_at(now_ms)) return actions[g];
      // explore uniformly over the non-greedy actions
      std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 2);
      std::size_t i = pick(rng_);
      if (i >= g) ++i;
      return actions[i];
    }
    case PolicyKind::Softmax: {
      const auto p = softmax_probs(flow, actions);
      const double u = std::uniform_real_distribution<double>(0, 1)(rng_);
      double acc = 0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return actions[i];
      }
      return actions.back();
    }
    case PolicyKind::UniformRandom: {
      std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
      return actions[pick(rng_)];
    }
  }
  throw SimError("unknown policy kind");
}

double RouterAgent::update_q(const FlowKey& flow, const std::string& action, double sample,
                             const std::vector<std::string>& actions) {
  if (!std::binary_search(actions.begin(), actions.end(), action))
    throw SimError("update_q: action " + action + " outside the refined set at " + router_);
  if (!std::isfinite(sample)) throw SimError("update_q: non-finite sample at " + router_);
  double& value = q_[{flow, action}];
  value += cfg_.alpha * (sample - value);
  return value;
}

void RouterAgent::accumulate(const FlowKey& flow, const std::string& upstream, double sample) {
  if (!std::isfinite(sample)) throw SimError("accumulate: non-finite sample at " + router_);
  auto& e = est_[{flow, upstream}];
  if (!e.seeded) {
    e.value = sample;
    e.seeded = true;
  } else {
    e.value += cfg_.alpha * (sample - e.value);
  }
  e.dirty = true;
}

std::vector<EstimateReport> RouterAgent::drain_reports() {
  std::vector<EstimateReport> out;
  for (auto& [key, e] : est_) {
    if (!e.dirty) continue;
    out.push_back({key.second, key.first, e.value});
    e.dirty = false;
  }
  return out;
}

BaselineTable::BaselineTable(const Topology& topo) {
  for (const auto& dst : topo.routers()) {
    std::map<std::string, int> dist{{dst, 0}};
    std::deque<std::string> frontier{dst};
    while (!frontier.empty()) {
      auto r = frontier.front();
      frontier.pop_front();
      for (const auto& n : topo.neighbors(r)) {
        if (dist.count(n)) continue;
        dist[n] = dist[r] + 1;
        frontier.push_back(n);
      }
    }
    for (const auto& [r, d] : dist) {
      dist_[{r, dst}] = d;
      if (r == dst) continue;
      for (const auto& n : topo.neighbors(r)) {
        auto it = dist.find(n);
        if (it != dist.end() && it->second == d - 1) {
          nh_[{r, dst}] = n;  // neighbors are sorted: first hit is the tie-break
          break;
        }
      }
    }
  }
}

std::optional<std::string> BaselineTable::next_hop(const std::string& router,
                                                   const std::string& dst) const {
  auto it = nh_.find({router, dst});
  if (it == nh_.end()) return std::nullopt;
  return it->second;
}

int BaselineTable::hop_distance(const std::string& from, const std::string& to) const {
  auto it = dist_.find({from, to});
  return it == dist_.end() ? -1 : it->second;
}

std::optional<std::string> baseline_next_hop(const Topology& topo, const std::string& router,
                                             const std::string& dst) {
  return BaselineTable(topo).next_hop(router, dst);
}

std::optional<std::string> BaselineForwarder::next_hop(const std::string& router,
                                                       const Packet& pkt, double) {
  return table_.next_hop(router, topo_.router_of(pkt.flow.dst));
}

void FixedPathForwarder::pin(const FlowKey& flow, Path path) {
  routes_[flow] = std::move(path);
}

std::optional<std::string> FixedPathForwarder::next_hop(const std::string& router,
                                                        const Packet& pkt, double) {
  auto it = routes_.find(pkt.flow);
  if (it != routes_.end()) {
    const auto& p = it->second;
    auto pos = std::find(p.begin(), p.end(), router);
    if (pos != p.end() && pos + 1 != p.end()) return *(pos + 1);
  }
  return table_.next_hop(router, topo_.router_of(pkt.flow.dst));
}

RlForwarder::RlForwarder(const Topology& topo, const ActionSpaceMap& spaces,
                         const PolicyConfig& cfg, std::uint64_t rl_seed)
    : topo_(topo), spaces_(spaces) {
  for (const auto& r : topo.routers())
    agents_.emplace(r, RouterAgent(r, cfg, derive_seed(rl_seed, "agent:" + r)));
}

RouterAgent& RlForwarder::agent(const std::string& router) { return agents_.at(router); }
const RouterAgent& RlForwarder::agent(const std::string& router) const {
  return agents_.at(router);
}

std::pair<std::string, std::string> RlForwarder::flow_routers(const FlowKey& flow) const {
  return {topo_.router_of(flow.src), topo_.router_of(flow.dst)};
}

const std::vector<std::string>* RlForwarder::actions_for(const std::string& router,
                                                         const FlowKey& flow) const {
  const auto [ingress, egress] = flow_routers(flow);
  return spaces_.actions(router, ingress, egress);
}

std::optional<std::string> RlForwarder::next_hop(const std::string& router, const Packet& pkt,
                                                 double now_ms) {
  const auto* acts = actions_for(router, pkt.flow);
  if (!acts || acts->empty()) return std::nullopt;
  return agents_.at(router).select_action(pkt.flow, *acts, now_ms);
}

void RlForwarder::on_hop_measured(const std::string& router, const Packet& pkt,
                                  const std::string& from, double delay_ms, double) {
  const auto [ingress, egress] = flow_routers(pkt.flow);
  double own_value = 0;  // the egress hands traffic off the mesh: zero onward cost
  if (router != egress) {
    const auto* acts = spaces_.actions(router, ingress, egress);
    if (!acts || acts->empty()) return;  // off the refined space: nothing to learn from
    own_value = agents_.at(router).best_q(pkt.flow, *acts);
  }
  agents_.at(router).accumulate(pkt.flow, from, -delay_ms + own_value);
}

void RlForwarder::flush_reports(MeshNet& net) {
  for (auto& [router, agent] : agents_) {
    for (const auto& rep : agent.drain_reports()) {
      const std::string downstream = router;
      net.send_control(downstream, rep.upstream,
                       [this, rep, downstream](double) {
                         const auto* acts = actions_for(rep.upstream, rep.flow);
                         if (!acts) return;
                         agents_.at(rep.upstream).update_q(rep.flow, downstream, rep.estimate,
                                                           *acts);
                       });
    }
  }
}

void RlForwarder::start_reporting(EventQueue& q, MeshNet& net, double period_ms,
                                  std::function<bool()> active) {
  if (!(period_ms > 0)) throw ConfigError("routing: report period must be positive");
  timers_.push_back(std::make_shared<std::function<void()>>());
  auto* fn = timers_.back().get();
  *fn = [this, &q, &net, period_ms, active, fn] {
    if (active && !active()) return;
    flush_reports(net);
    q.post(q.now() + period_ms, [fn] { (*fn)(); });
  };
  q.post(q.now() + period_ms, [fn] { (*fn)(); });
}

}  // namespace fedmesh
