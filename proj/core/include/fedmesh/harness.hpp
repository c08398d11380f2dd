#ifndef FEDMESH_HARNESS_HPP
#define FEDMESH_HARNESS_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "fedmesh/config.hpp"
#include "fedmesh/fedcore.hpp"
#include "fedmesh/metrics.hpp"
#include "fedmesh/routing.hpp"
#include "fedmesh/simnet.hpp"
#include "fedmesh/topology.hpp"

namespace fedmesh {

// Transport backed by the mesh. Model-bearing messages ride FlData packets
// sized by the serializer; everything else rides small FlControl packets.
class MeshTransport : public Transport {
 public:
  MeshTransport(MeshNet& net, EventQueue& q, std::size_t payload_override_bytes = 0)
      : net_(net), q_(q), payload_override_(payload_override_bytes) {}

  double now() const override { return q_.now(); }
  void post_after(double delay_ms, std::function<void()> fn) override;
  void send(const std::string& from, const std::string& to, CommMessage msg,
            std::function<void(double)> on_delivered = {}) override;
  void register_endpoint(
      const std::string& ep,
      std::function<void(const CommMessage&, double, double)> handler) override;

  static std::size_t wire_bytes(const CommMessage& msg, std::size_t payload_override_bytes);

 private:
  MeshNet& net_;
  EventQueue& q_;
  std::size_t payload_override_;
  std::map<std::string, std::function<void(const CommMessage&, double, double)>> handlers_;
};

// Candidate next-hop sets for both directions of every (worker router,
// aggregator router) pair.
ActionSpaceMap build_fl_action_spaces(const Topology& topo,
                                      const std::vector<std::string>& worker_eps,
                                      const std::string& aggregator_ep,
                                      const RefineConfig& refine);

// JSON dump of the final per-router value tables (empty for baseline runs)
std::string q_table_snapshot(const RlForwarder& fwd);

// One full run: build the mesh, the data shards and the protocol machines
// from cfg, drive the event loop to completion, return every metric.
// Throws SimError if the run stalls or overruns sim.max_sim_s.
MetricsLog run_experiment(const ExperimentConfig& cfg);

}  // namespace fedmesh

#endif
