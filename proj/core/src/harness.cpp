#include "fedmesh/harness.hpp"

#include <memory>
#include <set>
#include <utility>
#include <vector>

#include "fedmesh/datagen.hpp"
#include "fedmesh/errors.hpp"
#include "fedmesh/util.hpp"
#include "json.hpp"

namespace fedmesh {

void MeshTransport::post_after(double delay_ms, std::function<void()> fn) {
  if (delay_ms < 0) throw SimError("post_after with negative delay");
  q_.post(q_.now() + delay_ms, std::move(fn));
}

std::size_t MeshTransport::wire_bytes(const CommMessage& msg, std::size_t payload_override_bytes) {
  if (msg.model) return serialize_model_bytes(msg.model->dim(), payload_override_bytes);
  return kModelHeaderBytes;  // header-only control message
}

void MeshTransport::send(const std::string& from, const std::string& to, CommMessage msg,
                         std::function<void(double)> on_delivered) {
  std::size_t bytes = wire_bytes(msg, payload_override_);
  PacketKind kind = msg.model ? PacketKind::FlData : PacketKind::FlControl;
  auto shared = std::make_shared<CommMessage>(std::move(msg));
  net_.send_message(
      from, to, bytes, kind,
      [this, shared, to, on_delivered = std::move(on_delivered)](const MessageDelivery& md) {
        auto it = handlers_.find(to);
        if (it == handlers_.end()) {
          throw SimError("message for unregistered endpoint " + to);
        }
        it->second(*shared, md.sent_ms, md.delivered_ms);
        if (on_delivered) on_delivered(md.delivered_ms);
      });
}

void MeshTransport::register_endpoint(
    const std::string& ep, std::function<void(const CommMessage&, double, double)> handler) {
  if (handlers_.count(ep)) throw SimError("endpoint " + ep + " registered twice");
  handlers_[ep] = std::move(handler);
}

ActionSpaceMap build_fl_action_spaces(const Topology& topo,
                                      const std::vector<std::string>& worker_eps,
                                      const std::string& aggregator_ep,
                                      const RefineConfig& refine) {
  const std::string& agg_router = topo.router_of(aggregator_ep);
  std::set<std::pair<std::string, std::string>> pairs;
  for (const std::string& w : worker_eps) {
    const std::string& wr = topo.router_of(w);
    if (wr == agg_router) continue;  // same-router traffic never enters the mesh
    pairs.insert({wr, agg_router});
    pairs.insert({agg_router, wr});
  }
  ActionSpaceMap out;
  for (const auto& [ingress, egress] : pairs) {
    std::vector<Path> paths = enumerate_loopfree_paths(topo, ingress, egress, refine);
    PairActionSpaces spaces = refine_action_spaces(paths);
    if (refine.dag_filter) spaces = dag_filter(spaces, ingress, egress);
    out.set(ingress, egress, std::move(spaces));
  }
  return out;
}

std::string q_table_snapshot(const RlForwarder& fwd) {
  nlohmann::json j = nlohmann::json::object();
  // agents hold the state; walk the spaces to know which routers matter
  std::set<std::string> routers;
  for (const auto& [pair, spaces] : fwd.spaces().by_pair()) {
    (void)pair;
    for (const auto& [router, actions] : spaces) {
      (void)actions;
      routers.insert(router);
    }
  }
  for (const std::string& r : routers) {
    const RouterAgent& a = fwd.agent(r);
    nlohmann::json t = nlohmann::json::object();
    for (const auto& [key, value] : a.qtable()) {
      const auto& [flow, action] = key;
      t[flow.src + ">" + flow.dst + "|" + action] = value;
    }
    if (!t.empty()) j[r] = std::move(t);
  }
  return j.dump();
}

MetricsLog run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Topology topo = Topology::build(cfg.topology);

  // data pipeline, seeded independently of the network
  SyntheticDataset ds =
      generate_dataset(cfg.data.n, cfg.data.d, cfg.data.classes, cfg.data.separation,
                       cfg.seeds.data);
  std::vector<std::string> workers = cfg.worker_endpoints();
  const int K = static_cast<int>(workers.size());

  PartitionSpec part;
  part.mode = cfg.data.partition == "dirichlet" ? PartitionSpec::Mode::Dirichlet
                                                : PartitionSpec::Mode::Iid;
  part.beta = cfg.data.dirichlet_beta;
  std::vector<std::vector<int>> shards = partition_dataset(ds, K, part, cfg.seeds.data);

  std::vector<int> epochs(K, cfg.fl.local_epochs);
  if (cfg.data.stragglers) {
    epochs = assign_stragglers(K, *cfg.data.stragglers, cfg.seeds.data);
  }

  std::unique_ptr<LossModel> model = make_model(cfg.fl.model, cfg.data.d, cfg.data.classes,
                                                cfg.fl.hidden, cfg.fl.synthetic_dim);

  // network
  EventQueue q;
  SimParams sp;
  sp.mtu_bytes = cfg.sim.mtu_bytes;
  sp.jitter_max_ms = cfg.sim.jitter_ms;
  sp.ttl = cfg.sim.ttl;
  sp.queue_capacity = cfg.sim.queue_capacity;
  sp.record_trace = cfg.sim.trace;
  MeshNet net(topo, q, sp, cfg.seeds.sim);

  BaselineTable table(topo);
  BaselineForwarder baseline(topo, table);
  FixedPathForwarder background_fwd(topo, table);
  std::unique_ptr<RlForwarder> rl;

  if (cfg.routing.is_rl()) {
    ActionSpaceMap spaces =
        build_fl_action_spaces(topo, workers, cfg.fl.aggregator, cfg.routing.refine);
    PolicyConfig policy = cfg.routing.policy;
    policy.kind = policy_kind_for(cfg.routing.protocol);
    rl = std::make_unique<RlForwarder>(topo, spaces, policy, cfg.seeds.rl);
    net.set_forwarder(PacketKind::FlData, rl.get());
    net.set_forwarder(PacketKind::FlControl, rl.get());
  } else {
    net.set_forwarder(PacketKind::FlData, &baseline);
    net.set_forwarder(PacketKind::FlControl, &baseline);
  }
  net.set_forwarder(PacketKind::Background, &background_fwd);
  net.set_forwarder(PacketKind::Report, &baseline);

  for (const BackgroundFlowSpec& b : cfg.background) {
    if (b.fixed_route) background_fwd.pin(FlowKey{b.src, b.dst}, b.fixed_path);
    net.add_background(b);
  }

  // protocol machines
  TrainingParams params;
  params.eta = cfg.fl.eta;
  params.rho = cfg.fl.rho;
  params.batch_size = cfg.fl.batch_size;
  params.per_batch_compute_ms = cfg.fl.per_batch_compute_ms;
  params.payload_override_bytes = cfg.fl.payload_override_bytes;

  FlAggregator::Config acfg;
  acfg.ep = cfg.fl.aggregator;
  acfg.max_rounds = cfg.fl.rounds;
  acfg.target_loss = cfg.fl.target_loss;
  acfg.model_init_seed = cfg.seeds.model;
  acfg.params = params;
  acfg.record_models = cfg.record_models;
  std::map<std::string, std::size_t> shard_sizes;
  for (int i = 0; i < K; ++i) {
    acfg.worker_epochs[workers[i]] = epochs[i];
    shard_sizes[workers[i]] = shards[i].size();
  }

  FlAggregator agg(acfg, *model, ds, shard_sizes);

  std::vector<std::unique_ptr<FlWorker>> fl_workers;
  fl_workers.reserve(workers.size());
  for (int i = 0; i < K; ++i) {
    fl_workers.push_back(std::make_unique<FlWorker>(
        workers[i], shards[i], ds, *model, params, epochs[i],
        derive_seed(cfg.seeds.model, "shuffle:" + workers[i])));
  }

  MeshTransport transport(net, q, cfg.fl.payload_override_bytes);
  agg.bind(transport);
  for (auto& w : fl_workers) w->bind(transport, cfg.fl.aggregator);

  if (rl) {
    rl->start_reporting(q, net, cfg.routing.report_period_s * 1e3,
                        [&agg] { return !agg.done(); });
  }

  const double horizon_ms = cfg.sim.max_sim_s * 1e3;
  while (!agg.done()) {
    if (!q.step()) {
      throw SimError("simulation stalled after " + format_fixed(q.now() / 1e3, 3) +
                     " s with the run unfinished");
    }
    if (q.now() > horizon_ms) {
      throw SimError("simulation passed the " + format_fixed(cfg.sim.max_sim_s, 0) +
                     " s horizon before finishing");
    }
  }
  net.stop();

  MetricsLog log;
  log.name = cfg.name;
  log.protocol = cfg.routing.protocol;
  log.fingerprint = cfg.fingerprint_excluding_routing();
  log.rounds = agg.rounds();
  log.round_models = agg.round_models();
  log.bootstrap_end_ms = agg.bootstrap_end_ms();
  log.total_sim_ms = agg.finished_at_ms();
  log.reached_target =
      cfg.fl.target_loss && time_to_target(agg.rounds(), *cfg.fl.target_loss).has_value();
  log.net = net.counters();
  for (const auto& [flow, delays] : net.flow_delays()) {
    log.flows.push_back(summarize_flow(flow, delays));
  }
  if (rl) log.q_snapshot = q_table_snapshot(*rl);
  return log;
}

}  // namespace fedmesh
