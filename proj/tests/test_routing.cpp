#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "fedmesh/errors.hpp"
#include "fedmesh/routing.hpp"
#include "fedmesh/simnet.hpp"
#include "fedmesh/topology.hpp"

using namespace fedmesh;

namespace {

const FlowKey kFlow{"W", "V"};

PolicyConfig greedy_cfg() {
  PolicyConfig cfg;
  cfg.kind = PolicyKind::Greedy;
  return cfg;
}

}  // namespace

TEST_CASE("policy parameter ranges are enforced") {
  PolicyConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  SUBCASE("alpha") {
    cfg.alpha = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.alpha = 1.01;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.alpha = 1;
    CHECK_NOTHROW(cfg.validate());
  }
  SUBCASE("tau") {
    cfg.tau = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("decay") {
    cfg.decay_beta = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.decay_beta = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("epsilon0") {
    cfg.epsilon0 = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.epsilon0 = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.kind = PolicyKind::EpsilonGreedyDecay;
    cfg.epsilon0 = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("q updates smooth exponentially toward the sample") {
  RouterAgent agent("R", greedy_cfg(), 1);
  std::vector<std::string> actions = {"X", "Y"};

  CHECK(agent.q(kFlow, "X") == 0.0);  // untried actions read optimistic zero
  CHECK(agent.update_q(kFlow, "X", -7.0, actions) == doctest::Approx(-4.9));

  SUBCASE("fixed point") {
    agent.update_q(kFlow, "X", -4.9, actions);
    double before = agent.q(kFlow, "X");
    agent.update_q(kFlow, "X", before, actions);
    CHECK(agent.q(kFlow, "X") == before);
  }
  SUBCASE("contraction toward a constant sample") {
    double gap = std::abs(agent.q(kFlow, "X") - (-10.0));
    for (int i = 0; i < 10; ++i) {
      agent.update_q(kFlow, "X", -10.0, actions);
      double next = std::abs(agent.q(kFlow, "X") - (-10.0));
      CHECK(next <= gap * 0.3000001);
      gap = next;
    }
    CHECK(agent.q(kFlow, "X") == doctest::Approx(-10.0).epsilon(1e-4));
  }
  SUBCASE("alpha one replaces outright") {
    PolicyConfig cfg = greedy_cfg();
    cfg.alpha = 1.0;
    RouterAgent a2("R", cfg, 1);
    a2.update_q(kFlow, "X", -3.25, actions);
    CHECK(a2.q(kFlow, "X") == -3.25);
  }
  SUBCASE("updates outside the refined set are rejected") {
    CHECK_THROWS_AS(agent.update_q(kFlow, "Z", -1.0, actions), SimError);
    CHECK_THROWS_AS(agent.update_q(kFlow, "X", std::nan(""), actions), SimError);
  }
}

TEST_CASE("exploration decays per simulated second") {
  PolicyConfig cfg;
  cfg.kind = PolicyKind::EpsilonGreedyDecay;
  cfg.epsilon0 = 0.5;
  cfg.decay_beta = 0.9;
  RouterAgent agent("R", cfg, 1);
  CHECK(agent.epsilon_at(0) == 0.5);
  CHECK(agent.epsilon_at(2000) == doctest::Approx(0.5 * 0.81));
  double prev = 1;
  for (double t = 0; t <= 60'000; t += 5000) {
    double e = agent.epsilon_at(t);
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("softmax probabilities") {
  PolicyConfig cfg;
  cfg.kind = PolicyKind::Softmax;
  cfg.tau = 2.0;
  RouterAgent agent("R", cfg, 1);
  std::vector<std::string> actions = {"X", "Y"};

  SUBCASE("two-action oracle") {
    PolicyConfig unit = cfg;
    unit.alpha = 1.0;
    RouterAgent a("R", unit, 1);
    a.update_q(kFlow, "X", -1.0, actions);
    a.update_q(kFlow, "Y", -3.0, actions);
    auto p = a.softmax_probs(kFlow, actions);
    REQUIRE(p.size() == 2);
    CHECK(p[0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.2689414213699951).epsilon(1e-12));
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));

    // shifting every value by a constant changes nothing
    a.update_q(kFlow, "X", -1.0 + 100.0, actions);
    a.update_q(kFlow, "Y", -3.0 + 100.0, actions);
    auto shifted = a.softmax_probs(kFlow, actions);
    CHECK(shifted[0] == doctest::Approx(p[0]).epsilon(1e-12));
  }
  SUBCASE("equal values give the uniform distribution") {
    auto p = agent.softmax_probs(kFlow, {"A", "B", "C"});
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }
  SUBCASE("empirical selection frequency matches") {
    PolicyConfig unit = cfg;
    unit.alpha = 1.0;
    RouterAgent a("R", unit, 99);
    a.update_q(kFlow, "X", -1.0, actions);
    a.update_q(kFlow, "Y", -3.0, actions);
    int hits = 0;
    const int n = 100'000;
    for (int i = 0; i < n; ++i)
      if (a.select_action(kFlow, actions, 0.0) == "X") ++hits;
    CHECK(std::abs(hits / double(n) - 0.7310585786300049) < 0.01);
  }
}

TEST_CASE("greedy selection and tie-breaks") {
  RouterAgent agent("R", greedy_cfg(), 1);
  std::vector<std::string> actions = {"P", "Q", "Z"};
  // all zero: smallest id wins
  CHECK(agent.select_action(kFlow, actions, 0.0) == "P");
  agent.update_q(kFlow, "Z", 1.0, actions);
  CHECK(agent.select_action(kFlow, actions, 0.0) == "Z");
  CHECK(agent.best_q(kFlow, actions) == doctest::Approx(0.7));
  CHECK_THROWS_AS(agent.select_action(kFlow, {}, 0.0), SimError);
}

TEST_CASE("uniform policy visits every action") {
  PolicyConfig cfg;
  cfg.kind = PolicyKind::UniformRandom;
  RouterAgent agent("R", cfg, 7);
  std::vector<std::string> actions = {"A", "B", "C", "D"};
  std::map<std::string, int> seen;
  for (int i = 0; i < 4000; ++i) seen[agent.select_action(kFlow, actions, 0.0)]++;
  for (const auto& a : actions) {
    // Binomial(4000, 1/4): three sigmas is ~82
    CHECK(std::abs(seen[a] - 1000) < 100);
  }
}

TEST_CASE("downstream estimates accumulate and drain once") {
  RouterAgent agent("T", greedy_cfg(), 1);
  // egress-style samples: minus the measured hop delay, no onward value
  agent.accumulate(kFlow, "A", -2.5);
  auto reports = agent.drain_reports();
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].upstream == "A");
  CHECK(reports[0].flow == kFlow);
  CHECK(reports[0].estimate == -2.5);  // first sample seeds the estimate

  CHECK(agent.drain_reports().empty());  // clean until the next sample

  agent.accumulate(kFlow, "A", -4.5);
  reports = agent.drain_reports();
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].estimate == doctest::Approx(-2.5 + 0.7 * (-4.5 + 2.5)));

  SUBCASE("multiple upstreams drain in sorted order") {
    agent.accumulate(kFlow, "C", -1.0);
    agent.accumulate(kFlow, "B", -1.0);
    auto rs = agent.drain_reports();
    REQUIRE(rs.size() == 2);
    CHECK(rs[0].upstream == "B");
    CHECK(rs[1].upstream == "C");
  }
}

TEST_CASE("relay estimates add the hop cost to the best onward value") {
  // composition oracle: relay best own value -4.0, measured hop 2.5
  RouterAgent relay("A", greedy_cfg(), 1);
  std::vector<std::string> acts = {"T"};
  PolicyConfig unit = greedy_cfg();
  unit.alpha = 1.0;
  RouterAgent exact("A", unit, 1);
  exact.update_q(kFlow, "T", -4.0, acts);
  CHECK(exact.best_q(kFlow, acts) == -4.0);
  exact.accumulate(kFlow, "S", -2.5 + exact.best_q(kFlow, acts));
  auto rs = exact.drain_reports();
  REQUIRE(rs.size() == 1);
  CHECK(rs[0].estimate == -6.5);

  // and the upstream folds that report in at alpha 0.7
  RouterAgent up("S", greedy_cfg(), 1);
  up.update_q(kFlow, "A", rs[0].estimate, {"A", "B"});
  CHECK(up.q(kFlow, "A") == doctest::Approx(-4.55));
}

namespace {

Topology diamond_hosts(double fast_proc, double slow_proc) {
  TopologyConfig t;
  t.routers = {"S", "A", "B", "T"};
  t.links = {{"S", "A", 40, fast_proc},
             {"A", "T", 40, fast_proc},
             {"S", "B", 40, slow_proc},
             {"B", "T", 40, slow_proc}};
  t.hosts = {{"W", "S"}, {"V", "T"}};
  return Topology::build(t);
}

}  // namespace

TEST_CASE("baseline table runs min-hop with lexicographic ties") {
  Topology topo = diamond_hosts(0.5, 0.5);
  BaselineTable table(topo);
  CHECK(table.hop_distance("S", "T") == 2);
  CHECK(table.hop_distance("S", "A") == 1);
  CHECK(table.hop_distance("T", "T") == 0);
  // A and B both reach T in one hop; A sorts first
  CHECK(table.next_hop("S", "T") == "A");
  CHECK(table.next_hop("A", "T") == "T");
  CHECK(baseline_next_hop(topo, "S", "T") == "A");
  CHECK_FALSE(table.next_hop("T", "T").has_value());
}

TEST_CASE("fixed-path forwarder follows the pin and falls back to min-hop") {
  Topology topo = diamond_hosts(0.5, 0.5);
  BaselineTable table(topo);
  FixedPathForwarder fwd(topo, table);
  fwd.pin(kFlow, {"S", "B", "T"});

  Packet pkt;
  pkt.flow = kFlow;
  CHECK(fwd.next_hop("S", pkt, 0) == "B");
  CHECK(fwd.next_hop("B", pkt, 0) == "T");

  Packet other;
  other.flow = {"W", "V2"};
  // unpinned flow: baseline route toward V2's router
  TopologyConfig t2;
  t2.routers = {"S", "A", "B", "T"};
  t2.links = {{"S", "A", 40, 0.5}, {"A", "T", 40, 0.5}, {"S", "B", 40, 0.5}, {"B", "T", 40, 0.5}};
  t2.hosts = {{"W", "S"}, {"V", "T"}, {"V2", "T"}};
  Topology topo2 = Topology::build(t2);
  BaselineTable table2(topo2);
  FixedPathForwarder fwd2(topo2, table2);
  CHECK(fwd2.next_hop("S", other, 0) == "A");
}

TEST_CASE("adaptive forwarding learns the end-to-end path cost") {
  // two disjoint paths, 40 Mbps links; the learner is greedy so it stays on
  // the lexicographically first path and its ingress value must converge to
  // minus that path's end-to-end delay
  Topology topo = diamond_hosts(5.0, 15.0);
  ActionSpaceMap spaces;
  spaces.set("S", "T", dag_filter(refine_action_spaces(enumerate_loopfree_paths(topo, "S", "T")),
                                  "S", "T"));

  EventQueue q;
  SimParams params;
  MeshNet net(topo, q, params, 3);
  RlForwarder rl(topo, spaces, greedy_cfg(), 4);
  BaselineTable table(topo);
  BaselineForwarder base(topo, table);
  net.set_forwarder(PacketKind::FlData, &rl);
  net.set_forwarder(PacketKind::Report, &base);

  // 1000 bytes at 40 Mbps is 0.2 ms serialization, plus 5 ms processing
  const double hop_ms = 0.2 + 5.0;
  for (int round = 0; round < 40; ++round) {
    net.send_message("W", "V", 1000, PacketKind::FlData);
    while (q.step()) {
    }
    rl.flush_reports(net);
    while (q.step()) {
    }
  }

  const double q_ingress = rl.agent("S").q(kFlow, "A");
  CHECK(q_ingress == doctest::Approx(-2 * hop_ms).epsilon(0.02));
  // optimistic zeros push greedy through the slow branch until its value
  // drops just under the fast one; from then on selection sticks with A
  CHECK(rl.agent("S").q(kFlow, "B") < q_ingress);
  CHECK(rl.agent("S").select_action(kFlow, {"A", "B"}, q.now()) == "A");
  CHECK(rl.agent("A").q(kFlow, "T") == doctest::Approx(-hop_ms).epsilon(0.02));
  CHECK(rl.flow_routers(kFlow) == std::pair<std::string, std::string>{"S", "T"});
}

TEST_CASE("periodic reporting drives updates without manual flushes") {
  Topology topo = diamond_hosts(5.0, 15.0);
  ActionSpaceMap spaces;
  spaces.set("S", "T", refine_action_spaces(enumerate_loopfree_paths(topo, "S", "T")));

  EventQueue q;
  SimParams params;
  MeshNet net(topo, q, params, 3);
  RlForwarder rl(topo, spaces, greedy_cfg(), 4);
  BaselineTable table(topo);
  BaselineForwarder base(topo, table);
  net.set_forwarder(PacketKind::FlData, &rl);
  net.set_forwarder(PacketKind::Report, &base);

  int sent = 0;
  std::shared_ptr<std::function<void()>> tick = std::make_shared<std::function<void()>>();
  *tick = [&] {
    if (sent >= 50) return;
    ++sent;
    net.send_message("W", "V", 1000, PacketKind::FlData);
    q.post(q.now() + 200, *tick);
  };
  q.post_now(*tick);
  rl.start_reporting(q, net, 500, [&] { return sent < 50; });
  while (q.step()) {
  }
  CHECK(rl.agent("S").q(kFlow, "A") < -9.0);  // reports flowed upstream on their own
}
