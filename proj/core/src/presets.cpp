#include "fedmesh/presets.hpp"

#include <utility>

#include "fedmesh/errors.hpp"
#include "fedmesh/util.hpp"

namespace fedmesh {

namespace {

// Worker attach points. The first three are the edge routers every nine-worker
// scenario uses; scalability sweeps spread over all five.
const std::vector<std::string> kEdgeRouters = {"R0", "R2", "R9", "R5", "R7"};
const char* kServerRouter = "R4";

// the min-hop artery into the server, loaded by the congested variants
const std::vector<std::string> kArtery = {"R2", "R3", "R4"};

struct Placement {
  std::string router;
  int count;
};

void attach_workers(ExperimentConfig& cfg, const std::vector<Placement>& placement) {
  int next = 1;
  for (const Placement& p : placement) {
    for (int i = 0; i < p.count; ++i) {
      std::string w = "W" + std::to_string(next++);
      cfg.topology.hosts[w] = p.router;
      cfg.fl.workers.push_back(w);
    }
  }
}

void add_artery_congestion(ExperimentConfig& cfg, double rate_pps) {
  cfg.topology.hosts["bga"] = kArtery.front();
  cfg.topology.hosts["bgb"] = kArtery.back();
  BackgroundFlowSpec fwd;
  fwd.src = "bga";
  fwd.dst = "bgb";
  fwd.rate_pps = rate_pps;
  fwd.packet_bytes = 1500;
  fwd.fixed_route = true;
  fwd.fixed_path = kArtery;
  BackgroundFlowSpec rev = fwd;
  rev.src = "bgb";
  rev.dst = "bga";
  rev.fixed_path = {kArtery.rbegin(), kArtery.rend()};
  cfg.background.push_back(std::move(fwd));
  cfg.background.push_back(std::move(rev));
}

ExperimentConfig base_config() {
  ExperimentConfig cfg;
  cfg.note = "ten-router mesh is a hand-built reconstruction, not a measured network";
  cfg.topology = mesh10_topology();
  cfg.topology.hosts["SERVER"] = kServerRouter;
  cfg.fl.aggregator = "SERVER";
  cfg.fl.model = "logistic";
  cfg.fl.eta = 0.05;
  cfg.fl.rho = 0.0;
  cfg.fl.batch_size = 20;
  cfg.fl.local_epochs = 5;
  cfg.data.n = 1800;
  cfg.data.d = 20;
  cfg.data.classes = 5;
  cfg.data.separation = 6.0;
  cfg.data.partition = "iid";
  cfg.sim.jitter_ms = 0.1;
  cfg.sim.max_sim_s = 7200;
  cfg.seeds = SeedSection{11, 12, 13, 14};
  return cfg;
}

ExperimentConfig fl_traffic_config() {
  // heavier wire footprint so routing choices show up in round times
  ExperimentConfig cfg = base_config();
  cfg.fl.payload_override_bytes = 1000000;
  cfg.fl.per_batch_compute_ms = 100;
  cfg.fl.rounds = 60;
  cfg.fl.target_loss = 0.025;
  return cfg;
}

const std::vector<std::string> kAllProtocols = {"baseline", "rl-greedy", "rl-epsilon",
                                                "rl-softmax"};
const std::vector<std::string> kComparedProtocols = {"baseline", "rl-softmax"};

std::vector<PresetArm> convergence_preset(bool congested) {
  std::vector<PresetArm> arms;
  for (const std::string& proto : kAllProtocols) {
    ExperimentConfig cfg = fl_traffic_config();
    attach_workers(cfg, {{"R0", 3}, {"R2", 3}, {"R9", 3}});
    if (congested) add_artery_congestion(cfg, 900);
    cfg.routing.protocol = proto;
    cfg.routing.policy.kind = policy_kind_for(proto);
    cfg.name = std::string("convergence") + (congested ? "-congested" : "") + "/" + proto;
    arms.push_back({proto, std::move(cfg)});
  }
  return arms;
}

std::vector<PresetArm> stragglers_preset(bool congested) {
  struct Level {
    const char* tag;
    double fraction;
    double rho;
  };
  const std::vector<Level> levels = {
      {"f00-rho0", 0.0, 0.0},   {"f50-rho0", 0.5, 0.0},   {"f50-rho0.1", 0.5, 0.1},
      {"f90-rho0", 0.9, 0.0},   {"f90-rho0.1", 0.9, 0.1},
  };
  std::vector<PresetArm> arms;
  for (const Level& lv : levels) {
    ExperimentConfig cfg = base_config();
    attach_workers(cfg, {{"R0", 3}, {"R2", 3}, {"R9", 3}});
    if (congested) add_artery_congestion(cfg, 900);
    // hard heterogeneous regime: overlapping classes, near-single-class
    // shards, aggressive steps, strong epoch contrast. This is where the
    // proximal term visibly steadies the round-to-round loss.
    cfg.data.separation = 2.5;
    cfg.data.partition = "dirichlet";
    cfg.data.dirichlet_beta = 0.1;
    StragglerSpec s;
    s.fraction = lv.fraction;
    s.straggler_epochs = 1;
    s.normal_epochs = 10;
    cfg.data.stragglers = s;
    cfg.fl.eta = 0.4;
    cfg.fl.rho = lv.rho;
    cfg.fl.rounds = 175;
    cfg.fl.per_batch_compute_ms = 20;
    cfg.routing.protocol = "baseline";
    cfg.name =
        std::string("stragglers") + (congested ? "-congested" : "") + "/" + lv.tag;
    arms.push_back({lv.tag, std::move(cfg)});
  }
  return arms;
}

std::vector<PresetArm> distributions_preset(bool congested) {
  struct Layout {
    const char* tag;
    int a, b, c;
  };
  const std::vector<Layout> layouts = {{"3-3-3", 3, 3, 3}, {"2-5-2", 2, 5, 2}, {"2-4-3", 2, 4, 3}};
  std::vector<PresetArm> arms;
  for (const Layout& ly : layouts) {
    for (const std::string& proto : kComparedProtocols) {
      ExperimentConfig cfg = fl_traffic_config();
      attach_workers(cfg, {{"R0", ly.a}, {"R2", ly.b}, {"R9", ly.c}});
      if (congested) add_artery_congestion(cfg, 900);
      cfg.routing.protocol = proto;
      cfg.routing.policy.kind = policy_kind_for(proto);
      std::string arm = std::string(ly.tag) + "-" + proto;
      cfg.name = std::string("distributions") + (congested ? "-congested" : "") + "/" + arm;
      arms.push_back({std::move(arm), std::move(cfg)});
    }
  }
  return arms;
}

std::vector<PresetArm> scalability_preset(bool congested) {
  std::vector<PresetArm> arms;
  for (int k = 9; k <= 14; ++k) {
    for (const std::string& proto : kComparedProtocols) {
      ExperimentConfig cfg = fl_traffic_config();
      std::vector<Placement> placement;
      // round-robin over the five edge routers
      std::vector<int> counts(kEdgeRouters.size(), 0);
      for (int i = 0; i < k; ++i) counts[i % kEdgeRouters.size()]++;
      for (std::size_t e = 0; e < kEdgeRouters.size(); ++e) {
        if (counts[e] > 0) placement.push_back({kEdgeRouters[e], counts[e]});
      }
      attach_workers(cfg, placement);
      if (congested) add_artery_congestion(cfg, 900);
      cfg.routing.protocol = proto;
      cfg.routing.policy.kind = policy_kind_for(proto);
      std::string arm = "w" + std::to_string(k) + "-" + proto;
      cfg.name = std::string("scalability") + (congested ? "-congested" : "") + "/" + arm;
      arms.push_back({std::move(arm), std::move(cfg)});
    }
  }
  return arms;
}

}  // namespace

TopologyConfig mesh10_topology() {
  TopologyConfig t;
  for (int i = 0; i <= 9; ++i) t.routers.push_back("R" + std::to_string(i));
  auto link = [&t](const char* a, const char* b) {
    LinkSpec l;
    l.a = a;
    l.b = b;
    l.capacity_mbps = 20;
    l.proc_delay_ms = 0.5;
    t.links.push_back(l);
  };
  // two chains
  link("R0", "R1");
  link("R1", "R2");
  link("R2", "R3");
  link("R3", "R4");
  link("R5", "R6");
  link("R6", "R7");
  link("R7", "R8");
  link("R8", "R9");
  // cross links
  link("R0", "R5");
  link("R1", "R6");
  link("R2", "R7");
  link("R3", "R8");
  link("R4", "R9");
  return t;
}

std::vector<std::string> preset_names() {
  return {"convergence",   "convergence-congested",   "stragglers", "stragglers-congested",
          "distributions", "distributions-congested", "scalability", "scalability-congested"};
}

std::vector<PresetArm> make_preset(const std::string& preset) {
  if (preset == "convergence") return convergence_preset(false);
  if (preset == "convergence-congested") return convergence_preset(true);
  if (preset == "stragglers") return stragglers_preset(false);
  if (preset == "stragglers-congested") return stragglers_preset(true);
  if (preset == "distributions") return distributions_preset(false);
  if (preset == "distributions-congested") return distributions_preset(true);
  if (preset == "scalability") return scalability_preset(false);
  if (preset == "scalability-congested") return scalability_preset(true);
  throw ConfigError("unknown preset \"" + preset + "\"");
}

ExperimentConfig preset_arm(const std::string& preset, const std::string& arm) {
  for (PresetArm& a : make_preset(preset)) {
    if (a.name == arm) return std::move(a.config);
  }
  throw ConfigError("preset " + preset + " has no arm \"" + arm + "\"");
}

ExperimentConfig replicate_config(const ExperimentConfig& base, int replicate) {
  if (replicate < 0) throw ConfigError("replicate index must be >= 0");
  ExperimentConfig cfg = base;
  if (replicate == 0) return cfg;
  const std::string tag = "rep:" + std::to_string(replicate);
  cfg.seeds.sim = derive_seed(base.seeds.sim, tag);
  cfg.seeds.rl = derive_seed(base.seeds.rl, tag);
  cfg.seeds.data = derive_seed(base.seeds.data, tag);
  cfg.seeds.model = derive_seed(base.seeds.model, tag);
  return cfg;
}

void apply_seed_override(ExperimentConfig& cfg, std::uint64_t master_seed) {
  cfg.seeds.sim = derive_seed(master_seed, "sim");
  cfg.seeds.rl = derive_seed(master_seed, "rl");
  cfg.seeds.data = derive_seed(master_seed, "data");
  cfg.seeds.model = derive_seed(master_seed, "model");
}

}  // namespace fedmesh
