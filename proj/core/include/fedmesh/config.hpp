#ifndef FEDMESH_CONFIG_HPP
#define FEDMESH_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedmesh/datagen.hpp"
#include "fedmesh/routing.hpp"
#include "fedmesh/simnet.hpp"
#include "fedmesh/topology.hpp"

namespace fedmesh {

struct RoutingSection {
  std::string protocol = "baseline";  // baseline | rl-greedy | rl-epsilon | rl-softmax | rl-uniform
  PolicyConfig policy;                // kind is derived from protocol
  double report_period_s = 5.0;
  RefineConfig refine;
  bool is_rl() const { return protocol != "baseline"; }
};

PolicyKind policy_kind_for(const std::string& protocol);

struct FlSection {
  double eta = 0.1;
  double rho = 0.0;
  int batch_size = 20;
  int rounds = 20;
  std::optional<double> target_loss;
  std::string model = "logistic";  // logistic | mlp | synthetic-payload
  int hidden = 16;
  std::size_t synthetic_dim = 16;
  std::size_t payload_override_bytes = 0;
  double per_batch_compute_ms = 5.0;
  int local_epochs = 5;
  std::string aggregator = "SERVER";
  std::vector<std::string> workers;  // empty: every host except aggregator and traffic sources
};

struct DataSection {
  int n = 1800;
  int d = 20;
  int classes = 5;
  double separation = 3.0;
  std::string partition = "iid";  // iid | dirichlet
  double dirichlet_beta = 0.5;
  std::optional<StragglerSpec> stragglers;
};

struct SimSection {
  std::size_t mtu_bytes = 1500;
  double jitter_ms = 0.0;
  int ttl = 0;  // 0 = four hops per router
  std::size_t queue_capacity = 0;
  double max_sim_s = 7200.0;
  bool trace = false;
};

struct SeedSection {
  std::uint64_t sim = 1;
  std::uint64_t rl = 2;
  std::uint64_t data = 3;
  std::uint64_t model = 4;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string note;
  TopologyConfig topology;
  RoutingSection routing;
  FlSection fl;
  DataSection data;
  std::vector<BackgroundFlowSpec> background;
  SimSection sim;
  SeedSection seeds;
  bool record_models = false;  // keep per-round global models in memory

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_json_file(const std::string& path);
  std::string to_json_text() const;
  void write_json_file(const std::string& path) const;

  // canonical dump of everything except the routing section; runs are only
  // comparable when these match
  std::string fingerprint_excluding_routing() const;

  // worker endpoint list with defaults resolved, sorted
  std::vector<std::string> worker_endpoints() const;

  void validate() const;  // throws ConfigError
};

}  // namespace fedmesh

#endif
