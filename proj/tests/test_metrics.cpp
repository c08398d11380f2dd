#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "fedmesh/errors.hpp"
#include "fedmesh/metrics.hpp"

using namespace fedmesh;

namespace {

RoundRecord round_at(int r, double end_ms, double loss) {
  RoundRecord rec;
  rec.round = r;
  rec.start_ms = end_ms - 100;
  rec.end_ms = end_ms;
  rec.loss = loss;
  rec.accuracy = 1.0 - loss;
  rec.tau_max_ms = 12.5;
  rec.mean_e2e_ms = 8.25;
  return rec;
}

}  // namespace

TEST_CASE("flow summaries use nearest-rank percentiles") {
  std::vector<double> delays;
  for (int i = 1; i <= 100; ++i) delays.push_back(static_cast<double>(i));
  FlowStats s = summarize_flow(FlowKey{"a", "b"}, delays);
  CHECK(s.packets == 100);
  CHECK(s.mean_ms == doctest::Approx(50.5));
  CHECK(s.p50_ms == 50.0);
  CHECK(s.p95_ms == 95.0);
  CHECK(s.p99_ms == 99.0);

  SUBCASE("single sample") {
    FlowStats one = summarize_flow(FlowKey{"a", "b"}, {7.0});
    CHECK(one.packets == 1);
    CHECK(one.p50_ms == 7.0);
    CHECK(one.p99_ms == 7.0);
  }
  SUBCASE("order does not matter") {
    std::vector<double> shuffled = {3, 1, 2};
    FlowStats st = summarize_flow(FlowKey{"a", "b"}, shuffled);
    CHECK(st.p50_ms == 2.0);
  }
}

TEST_CASE("time to target picks the first crossing round's end") {
  std::vector<RoundRecord> rounds;
  for (int r = 1; r <= 30; ++r) {
    double loss = 1.0 / r;  // crosses 0.06 at r = 17
    rounds.push_back(round_at(r, r * 1000.0, loss));
  }
  auto ttt = time_to_target(rounds, 1.0 / 17);
  REQUIRE(ttt.has_value());
  CHECK(*ttt == 17'000.0);

  CHECK_FALSE(time_to_target(rounds, 0.001).has_value());
  CHECK(time_to_target(rounds, 2.0) == 1000.0);
  CHECK_FALSE(time_to_target({}, 0.5).has_value());

  SUBCASE("nan losses never count as crossings") {
    std::vector<RoundRecord> nans;
    for (int r = 1; r <= 5; ++r)
      nans.push_back(round_at(r, r * 1000.0, std::numeric_limits<double>::quiet_NaN()));
    CHECK_FALSE(time_to_target(nans, 100.0).has_value());
  }
}

TEST_CASE("round csv round-trips doubles exactly") {
  std::vector<RoundRecord> rounds;
  rounds.push_back(round_at(1, 1234.567890123456, 0.47324193142964177));
  rounds.push_back(round_at(2, 2345.0, 1e-17));
  rounds.push_back(round_at(3, 3456.0, std::numeric_limits<double>::quiet_NaN()));

  const std::string text = round_csv_text(rounds);
  CHECK(text.substr(0, text.find('\n')) ==
        "round,start_ms,end_ms,loss,accuracy,tau_max_ms,mean_e2e_ms");

  std::vector<RoundRecord> back = parse_round_csv(text);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].round == rounds[i].round);
    CHECK(back[i].start_ms == rounds[i].start_ms);
    CHECK(back[i].end_ms == rounds[i].end_ms);
    if (std::isnan(rounds[i].loss))
      CHECK(std::isnan(back[i].loss));
    else
      CHECK(back[i].loss == rounds[i].loss);
    if (std::isnan(rounds[i].accuracy))
      CHECK(std::isnan(back[i].accuracy));
    else
      CHECK(back[i].accuracy == rounds[i].accuracy);
    CHECK(back[i].tau_max_ms == rounds[i].tau_max_ms);
    CHECK(back[i].mean_e2e_ms == rounds[i].mean_e2e_ms);
  }

  SUBCASE("empty log is just the header") {
    const std::string empty = round_csv_text({});
    CHECK(empty == "round,start_ms,end_ms,loss,accuracy,tau_max_ms,mean_e2e_ms\n");
    CHECK(parse_round_csv(empty).empty());
  }
  SUBCASE("foreign headers are refused") {
    CHECK_THROWS_AS(parse_round_csv("round,loss\n1,0.5\n"), SimError);
  }
  SUBCASE("short rows are refused") {
    CHECK_THROWS_AS(
        parse_round_csv("round,start_ms,end_ms,loss,accuracy,tau_max_ms,mean_e2e_ms\n1,2,3\n"),
        SimError);
  }
  SUBCASE("non-numeric cells are refused") {
    CHECK_THROWS_AS(
        parse_round_csv(
            "round,start_ms,end_ms,loss,accuracy,tau_max_ms,mean_e2e_ms\n1,2,3,x,5,6,7\n"),
        SimError);
  }
}

TEST_CASE("emitted files land on disk and read back") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "fedmesh_metrics_test";
  fs::remove_all(dir);

  MetricsLog log;
  log.name = "unit";
  log.protocol = "baseline";
  log.fingerprint = "fp";
  log.rounds = {round_at(1, 1000, 0.5), round_at(2, 2000, 0.25)};
  log.total_sim_ms = 2000;
  log.net.injected = 10;
  log.net.delivered = 10;
  log.flows.push_back(summarize_flow(FlowKey{"W1", "SERVER"}, {1.0, 2.0, 3.0}));

  emit_metrics(log, dir.string());
  CHECK(fs::exists(dir / "metrics.csv"));
  CHECK(fs::exists(dir / "flows.csv"));
  CHECK(fs::exists(dir / "summary.json"));

  std::vector<RoundRecord> back = read_round_csv((dir / "metrics.csv").string());
  REQUIRE(back.size() == 2);
  CHECK(back[1].loss == 0.25);

  std::ifstream flows(dir / "flows.csv");
  std::string header;
  std::getline(flows, header);
  CHECK(header == "src,dst,packets,mean_ms,p50_ms,p95_ms,p99_ms");

  fs::remove_all(dir);
}

namespace {

MetricsLog make_log(const std::string& name, const std::string& protocol,
                    const std::vector<double>& losses, const std::string& fp = "fp") {
  MetricsLog log;
  log.name = name;
  log.protocol = protocol;
  log.fingerprint = fp;
  for (std::size_t i = 0; i < losses.size(); ++i)
    log.rounds.push_back(round_at(static_cast<int>(i + 1), (i + 1) * 1000.0, losses[i]));
  return log;
}

}  // namespace

TEST_CASE("run comparison ranks by time to target against the baseline") {
  MetricsLog base = make_log("slow", "baseline", {0.9, 0.6, 0.4, 0.2});
  MetricsLog fast = make_log("fast", "rl-softmax", {0.9, 0.6, 0.2, 0.1});
  fast.rounds[2].end_ms = 2500;  // crosses earlier in wall time

  ComparisonReport rep = compare_runs({fast, base}, 0.25);
  CHECK(rep.reference == "slow");
  REQUIRE(rep.entries.size() == 2);
  // sorted by time to target: the rl run crossed at 2.5 s, baseline at 4 s
  CHECK(rep.entries[0].name == "fast");
  CHECK(rep.entries[0].speedup == doctest::Approx(4000.0 / 2500.0));
  CHECK(rep.entries[1].speedup == doctest::Approx(1.0));
  CHECK_FALSE(rep.entries[0].loss_curve_matches_reference);
  CHECK(rep.entries[1].loss_curve_matches_reference);

  const std::string text = rep.to_text();
  CHECK(text.find("fast") != std::string::npos);
  CHECK(text.find("slow") != std::string::npos);
}

TEST_CASE("comparing a run with itself is the identity") {
  MetricsLog a = make_log("one", "baseline", {0.8, 0.3});
  ComparisonReport rep = compare_runs({a, a}, 0.5);
  REQUIRE(rep.entries.size() == 2);
  CHECK(rep.entries[0].speedup == doctest::Approx(1.0));
  CHECK(rep.entries[1].speedup == doctest::Approx(1.0));
  CHECK(rep.entries[0].loss_curve_matches_reference);
  CHECK(rep.entries[1].loss_curve_matches_reference);
}

TEST_CASE("curve equality treats nan as equal to nan") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  MetricsLog a = make_log("a", "baseline", {nan, 0.5});
  MetricsLog b = make_log("b", "rl-greedy", {nan, 0.5});
  ComparisonReport rep = compare_runs({a, b}, 0.25);
  CHECK(rep.entries[0].loss_curve_matches_reference);
  CHECK(rep.entries[1].loss_curve_matches_reference);
  // no run crossed: speedups are undefined
  for (const auto& e : rep.entries) {
    CHECK_FALSE(e.time_to_target_ms.has_value());
    CHECK(std::isnan(e.speedup));
  }
}

TEST_CASE("comparison refuses mismatched experiment fingerprints") {
  MetricsLog a = make_log("a", "baseline", {0.5}, "fp1");
  MetricsLog b = make_log("b", "rl-greedy", {0.5}, "fp2");
  CHECK_THROWS_AS(compare_runs({a, b}, 0.25), ConfigError);
  CHECK_THROWS_AS(compare_runs({}, 0.25), ConfigError);
}
