#include "fedmesh/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "fedmesh/errors.hpp"
#include "json.hpp"

namespace fedmesh {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::string& where,
                         const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

const json* maybe(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

template <typename T>
void load(const json& j, const char* key, T& out, const std::string& where) {
  if (const json* v = maybe(j, key)) {
    try {
      out = v->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("bad value for \"" + std::string(key) + "\" in " + where + ": " + e.what());
    }
  }
}

TopologyConfig parse_topology(const json& j) {
  reject_unknown_keys(j, "topology", {"routers", "links", "hosts"});
  TopologyConfig cfg;
  load(j, "routers", cfg.routers, "topology");
  if (const json* links = maybe(j, "links")) {
    if (!links->is_array()) throw ConfigError("topology.links must be an array");
    for (const json& e : *links) {
      LinkSpec l;
      if (e.is_array()) {
        // [a, b] or [a, b, capacity_mbps] or [a, b, capacity_mbps, proc_delay_ms]
        if (e.size() < 2 || e.size() > 4) {
          throw ConfigError("topology.links entries take 2 to 4 elements");
        }
        l.a = e.at(0).get<std::string>();
        l.b = e.at(1).get<std::string>();
        if (e.size() >= 3) l.capacity_mbps = e.at(2).get<double>();
        if (e.size() >= 4) l.proc_delay_ms = e.at(3).get<double>();
      } else if (e.is_object()) {
        reject_unknown_keys(e, "topology.links[]", {"a", "b", "capacity_mbps", "proc_delay_ms"});
        load(e, "a", l.a, "topology.links[]");
        load(e, "b", l.b, "topology.links[]");
        load(e, "capacity_mbps", l.capacity_mbps, "topology.links[]");
        load(e, "proc_delay_ms", l.proc_delay_ms, "topology.links[]");
      } else {
        throw ConfigError("topology.links entries must be arrays or objects");
      }
      cfg.links.push_back(std::move(l));
    }
  }
  if (const json* hosts = maybe(j, "hosts")) {
    if (!hosts->is_object()) throw ConfigError("topology.hosts must be an object");
    for (auto it = hosts->begin(); it != hosts->end(); ++it) {
      cfg.hosts[it.key()] = it.value().get<std::string>();
    }
  }
  return cfg;
}

RoutingSection parse_routing(const json& j) {
  reject_unknown_keys(j, "routing",
                      {"protocol", "alpha", "epsilon0", "decay_beta", "tau", "report_period_s",
                       "refine_method", "refine_k", "exhaustive_node_ceiling", "dag_filter"});
  RoutingSection r;
  load(j, "protocol", r.protocol, "routing");
  r.policy.kind = policy_kind_for(r.protocol);
  load(j, "alpha", r.policy.alpha, "routing");
  load(j, "epsilon0", r.policy.epsilon0, "routing");
  load(j, "decay_beta", r.policy.decay_beta, "routing");
  load(j, "tau", r.policy.tau, "routing");
  load(j, "report_period_s", r.report_period_s, "routing");
  std::string method = "auto";
  load(j, "refine_method", method, "routing");
  if (method == "auto") {
    r.refine.method = RefineConfig::Method::Auto;
  } else if (method == "exhaustive") {
    r.refine.method = RefineConfig::Method::ExhaustiveDfs;
  } else if (method == "k-shortest") {
    r.refine.method = RefineConfig::Method::KShortest;
  } else {
    throw ConfigError("routing.refine_method must be auto, exhaustive or k-shortest");
  }
  load(j, "refine_k", r.refine.k, "routing");
  load(j, "exhaustive_node_ceiling", r.refine.exhaustive_node_ceiling, "routing");
  load(j, "dag_filter", r.refine.dag_filter, "routing");
  return r;
}

FlSection parse_fl(const json& j) {
  reject_unknown_keys(j, "fl",
                      {"eta", "rho", "batch_size", "rounds", "target_loss", "model", "hidden",
                       "synthetic_dim", "payload_override_bytes", "per_batch_compute_ms",
                       "local_epochs", "aggregator", "workers"});
  FlSection f;
  load(j, "eta", f.eta, "fl");
  load(j, "rho", f.rho, "fl");
  load(j, "batch_size", f.batch_size, "fl");
  load(j, "rounds", f.rounds, "fl");
  if (const json* t = maybe(j, "target_loss")) {
    if (!t->is_null()) f.target_loss = t->get<double>();
  }
  load(j, "model", f.model, "fl");
  load(j, "hidden", f.hidden, "fl");
  load(j, "synthetic_dim", f.synthetic_dim, "fl");
  load(j, "payload_override_bytes", f.payload_override_bytes, "fl");
  load(j, "per_batch_compute_ms", f.per_batch_compute_ms, "fl");
  load(j, "local_epochs", f.local_epochs, "fl");
  load(j, "aggregator", f.aggregator, "fl");
  load(j, "workers", f.workers, "fl");
  return f;
}

DataSection parse_data(const json& j) {
  reject_unknown_keys(j, "data",
                      {"n", "d", "classes", "separation", "partition", "dirichlet_beta",
                       "straggler_fraction", "straggler_epochs", "normal_epochs"});
  DataSection d;
  load(j, "n", d.n, "data");
  load(j, "d", d.d, "data");
  load(j, "classes", d.classes, "data");
  load(j, "separation", d.separation, "data");
  load(j, "partition", d.partition, "data");
  load(j, "dirichlet_beta", d.dirichlet_beta, "data");
  if (const json* f = maybe(j, "straggler_fraction")) {
    StragglerSpec s;
    s.fraction = f->get<double>();
    load(j, "straggler_epochs", s.straggler_epochs, "data");
    load(j, "normal_epochs", s.normal_epochs, "data");
    d.stragglers = s;
  } else if (maybe(j, "straggler_epochs") || maybe(j, "normal_epochs")) {
    throw ConfigError("data.straggler_epochs/normal_epochs need data.straggler_fraction");
  }
  return d;
}

std::vector<BackgroundFlowSpec> parse_background(const json& j) {
  if (!j.is_array()) throw ConfigError("background must be an array");
  std::vector<BackgroundFlowSpec> out;
  for (const json& e : j) {
    reject_unknown_keys(e, "background[]", {"src", "dst", "rate_pps", "packet_bytes", "path"});
    BackgroundFlowSpec b;
    load(e, "src", b.src, "background[]");
    load(e, "dst", b.dst, "background[]");
    load(e, "rate_pps", b.rate_pps, "background[]");
    load(e, "packet_bytes", b.packet_bytes, "background[]");
    if (const json* p = maybe(e, "path")) {
      b.fixed_route = true;
      b.fixed_path = p->get<Path>();
    }
    out.push_back(std::move(b));
  }
  return out;
}

SimSection parse_sim(const json& j) {
  reject_unknown_keys(
      j, "sim", {"mtu_bytes", "jitter_ms", "ttl", "queue_capacity", "max_sim_s", "trace"});
  SimSection s;
  load(j, "mtu_bytes", s.mtu_bytes, "sim");
  load(j, "jitter_ms", s.jitter_ms, "sim");
  load(j, "ttl", s.ttl, "sim");
  load(j, "queue_capacity", s.queue_capacity, "sim");
  load(j, "max_sim_s", s.max_sim_s, "sim");
  load(j, "trace", s.trace, "sim");
  return s;
}

SeedSection parse_seeds(const json& j) {
  reject_unknown_keys(j, "seeds", {"sim", "rl", "data", "model"});
  SeedSection s;
  load(j, "sim", s.sim, "seeds");
  load(j, "rl", s.rl, "seeds");
  load(j, "data", s.data, "seeds");
  load(j, "model", s.model, "seeds");
  return s;
}

json dump_topology(const TopologyConfig& t) {
  json j;
  j["routers"] = t.routers;
  json links = json::array();
  for (const LinkSpec& l : t.links) {
    links.push_back(json::array({l.a, l.b, l.capacity_mbps, l.proc_delay_ms}));
  }
  j["links"] = links;
  json hosts = json::object();
  for (const auto& [h, r] : t.hosts) hosts[h] = r;
  j["hosts"] = hosts;
  return j;
}

json dump_routing(const RoutingSection& r) {
  json j;
  j["protocol"] = r.protocol;
  j["alpha"] = r.policy.alpha;
  j["epsilon0"] = r.policy.epsilon0;
  j["decay_beta"] = r.policy.decay_beta;
  j["tau"] = r.policy.tau;
  j["report_period_s"] = r.report_period_s;
  switch (r.refine.method) {
    case RefineConfig::Method::Auto: j["refine_method"] = "auto"; break;
    case RefineConfig::Method::ExhaustiveDfs: j["refine_method"] = "exhaustive"; break;
    case RefineConfig::Method::KShortest: j["refine_method"] = "k-shortest"; break;
  }
  j["refine_k"] = r.refine.k;
  j["exhaustive_node_ceiling"] = r.refine.exhaustive_node_ceiling;
  j["dag_filter"] = r.refine.dag_filter;
  return j;
}

json dump_fl(const FlSection& f) {
  json j;
  j["eta"] = f.eta;
  j["rho"] = f.rho;
  j["batch_size"] = f.batch_size;
  j["rounds"] = f.rounds;
  if (f.target_loss) j["target_loss"] = *f.target_loss;
  j["model"] = f.model;
  j["hidden"] = f.hidden;
  j["synthetic_dim"] = f.synthetic_dim;
  j["payload_override_bytes"] = f.payload_override_bytes;
  j["per_batch_compute_ms"] = f.per_batch_compute_ms;
  j["local_epochs"] = f.local_epochs;
  j["aggregator"] = f.aggregator;
  j["workers"] = f.workers;
  return j;
}

json dump_data(const DataSection& d) {
  json j;
  j["n"] = d.n;
  j["d"] = d.d;
  j["classes"] = d.classes;
  j["separation"] = d.separation;
  j["partition"] = d.partition;
  j["dirichlet_beta"] = d.dirichlet_beta;
  if (d.stragglers) {
    j["straggler_fraction"] = d.stragglers->fraction;
    j["straggler_epochs"] = d.stragglers->straggler_epochs;
    j["normal_epochs"] = d.stragglers->normal_epochs;
  }
  return j;
}

json dump_background(const std::vector<BackgroundFlowSpec>& bg) {
  json arr = json::array();
  for (const BackgroundFlowSpec& b : bg) {
    json e;
    e["src"] = b.src;
    e["dst"] = b.dst;
    e["rate_pps"] = b.rate_pps;
    e["packet_bytes"] = b.packet_bytes;
    if (b.fixed_route) e["path"] = b.fixed_path;
    arr.push_back(std::move(e));
  }
  return arr;
}

json dump_sim(const SimSection& s) {
  json j;
  j["mtu_bytes"] = s.mtu_bytes;
  j["jitter_ms"] = s.jitter_ms;
  j["ttl"] = s.ttl;
  j["queue_capacity"] = s.queue_capacity;
  j["max_sim_s"] = s.max_sim_s;
  j["trace"] = s.trace;
  return j;
}

json dump_seeds(const SeedSection& s) {
  json j;
  j["sim"] = s.sim;
  j["rl"] = s.rl;
  j["data"] = s.data;
  j["model"] = s.model;
  return j;
}

json dump_all(const ExperimentConfig& c, bool with_routing) {
  json j;
  j["name"] = c.name;
  if (!c.note.empty()) j["note"] = c.note;
  j["topology"] = dump_topology(c.topology);
  if (with_routing) j["routing"] = dump_routing(c.routing);
  j["fl"] = dump_fl(c.fl);
  j["data"] = dump_data(c.data);
  j["background"] = dump_background(c.background);
  j["sim"] = dump_sim(c.sim);
  j["seeds"] = dump_seeds(c.seeds);
  return j;
}

}  // namespace

PolicyKind policy_kind_for(const std::string& protocol) {
  if (protocol == "baseline" || protocol == "rl-greedy") return PolicyKind::Greedy;
  if (protocol == "rl-epsilon") return PolicyKind::EpsilonGreedyDecay;
  if (protocol == "rl-softmax") return PolicyKind::Softmax;
  if (protocol == "rl-uniform") return PolicyKind::UniformRandom;
  throw ConfigError("unknown routing protocol \"" + protocol + "\"");
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be an object");
  reject_unknown_keys(
      j, "config",
      {"name", "note", "topology", "routing", "fl", "data", "background", "sim", "seeds"});

  ExperimentConfig c;
  load(j, "name", c.name, "config");
  load(j, "note", c.note, "config");
  if (const json* t = maybe(j, "topology")) c.topology = parse_topology(*t);
  else throw ConfigError("config needs a topology section");
  if (const json* r = maybe(j, "routing")) c.routing = parse_routing(*r);
  if (const json* f = maybe(j, "fl")) c.fl = parse_fl(*f);
  if (const json* d = maybe(j, "data")) c.data = parse_data(*d);
  if (const json* b = maybe(j, "background")) c.background = parse_background(*b);
  if (const json* s = maybe(j, "sim")) c.sim = parse_sim(*s);
  if (const json* s = maybe(j, "seeds")) c.seeds = parse_seeds(*s);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string ExperimentConfig::to_json_text() const {
  return dump_all(*this, true).dump(2) + "\n";
}

void ExperimentConfig::write_json_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path);
  out << to_json_text();
}

std::string ExperimentConfig::fingerprint_excluding_routing() const {
  // labels are not identity: runs that differ only in name/note (and routing)
  // measure the same experiment and must stay comparable
  json j = dump_all(*this, false);
  j.erase("name");
  j.erase("note");
  return j.dump();
}

std::vector<std::string> ExperimentConfig::worker_endpoints() const {
  std::vector<std::string> out;
  if (!fl.workers.empty()) {
    out = fl.workers;
  } else {
    std::set<std::string> bg_endpoints;
    for (const BackgroundFlowSpec& b : background) {
      bg_endpoints.insert(b.src);
      bg_endpoints.insert(b.dst);
    }
    for (const auto& [host, router] : topology.hosts) {
      (void)router;
      if (host != fl.aggregator && !bg_endpoints.count(host)) out.push_back(host);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void ExperimentConfig::validate() const {
  policy_kind_for(routing.protocol);
  if (routing.is_rl()) routing.policy.validate();
  if (routing.report_period_s <= 0) throw ConfigError("routing.report_period_s must be positive");
  if (routing.refine.k < 1) throw ConfigError("routing.refine_k must be at least 1");

  if (fl.eta <= 0) throw ConfigError("fl.eta must be positive");
  if (fl.rho < 0) throw ConfigError("fl.rho must be non-negative");
  if (fl.batch_size < 1) throw ConfigError("fl.batch_size must be at least 1");
  if (fl.rounds < 1) throw ConfigError("fl.rounds must be at least 1");
  if (fl.local_epochs < 1) throw ConfigError("fl.local_epochs must be at least 1");
  if (fl.per_batch_compute_ms < 0) throw ConfigError("fl.per_batch_compute_ms must be >= 0");
  if (fl.model != "logistic" && fl.model != "mlp" && fl.model != "synthetic-payload") {
    throw ConfigError("fl.model must be logistic, mlp or synthetic-payload");
  }
  if (fl.model == "mlp" && fl.hidden < 1) throw ConfigError("fl.hidden must be at least 1");
  if (!topology.hosts.count(fl.aggregator)) {
    throw ConfigError("fl.aggregator \"" + fl.aggregator + "\" is not a host in the topology");
  }
  for (const std::string& w : fl.workers) {
    if (!topology.hosts.count(w)) {
      throw ConfigError("fl worker \"" + w + "\" is not a host in the topology");
    }
    if (w == fl.aggregator) throw ConfigError("fl.workers must not contain the aggregator");
  }
  if (worker_endpoints().empty()) throw ConfigError("no worker endpoints");

  if (data.n < 1) throw ConfigError("data.n must be at least 1");
  if (data.d < 1) throw ConfigError("data.d must be at least 1");
  if (data.classes < 2) throw ConfigError("data.classes must be at least 2");
  if (data.separation < 0) throw ConfigError("data.separation must be >= 0");
  if (data.partition != "iid" && data.partition != "dirichlet") {
    throw ConfigError("data.partition must be iid or dirichlet");
  }
  if (data.partition == "dirichlet" && data.dirichlet_beta <= 0) {
    throw ConfigError("data.dirichlet_beta must be positive");
  }
  if (data.stragglers) {
    const StragglerSpec& s = *data.stragglers;
    if (s.fraction < 0 || s.fraction > 1) {
      throw ConfigError("data.straggler_fraction must be in [0, 1]");
    }
    if (s.straggler_epochs < 1 || s.normal_epochs < 1) {
      throw ConfigError("straggler and normal epoch counts must be at least 1");
    }
  }

  for (const BackgroundFlowSpec& b : background) {
    if (b.rate_pps < 0) throw ConfigError("background rate_pps must be >= 0");
    if (b.packet_bytes == 0) throw ConfigError("background packet_bytes must be positive");
    if (!topology.hosts.count(b.src) || !topology.hosts.count(b.dst)) {
      throw ConfigError("background endpoints must be hosts in the topology");
    }
  }

  if (sim.mtu_bytes < 64) throw ConfigError("sim.mtu_bytes must be at least 64");
  if (sim.jitter_ms < 0) throw ConfigError("sim.jitter_ms must be >= 0");
  if (sim.ttl < 0) throw ConfigError("sim.ttl must be >= 0");
  if (sim.max_sim_s <= 0) throw ConfigError("sim.max_sim_s must be positive");

  // full structural validation (also covers connectivity)
  Topology::build(topology);
}

}  // namespace fedmesh
