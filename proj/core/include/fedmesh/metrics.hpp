#ifndef FEDMESH_METRICS_HPP
#define FEDMESH_METRICS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedmesh/fedcore.hpp"
#include "fedmesh/simnet.hpp"

namespace fedmesh {

struct FlowStats {
  FlowKey flow;
  std::uint64_t packets = 0;
  double mean_ms = 0;
  double p50_ms = 0;
  double p95_ms = 0;
  double p99_ms = 0;
};

// Everything a single run produces, in memory. The CSV emitters below write
// the durable form.
struct MetricsLog {
  std::string name;
  std::string protocol;
  std::string fingerprint;  // config minus routing; compare() requires a match
  std::vector<RoundRecord> rounds;
  std::vector<ModelVector> round_models;  // only when recording is on
  double bootstrap_end_ms = 0;
  double total_sim_ms = 0;
  bool reached_target = false;
  NetCounters net;
  std::vector<FlowStats> flows;
  std::string q_snapshot;  // JSON dump of final per-router value tables
};

FlowStats summarize_flow(const FlowKey& flow, std::vector<double> delays);

// first round whose loss is at or below target; value is that round's end_ms
std::optional<double> time_to_target(const std::vector<RoundRecord>& rounds, double target_loss);

// writes metrics.csv, flows.csv and summary.json under dir (created if absent)
void emit_metrics(const MetricsLog& log, const std::string& dir);

std::string round_csv_text(const std::vector<RoundRecord>& rounds);

// strict reader for the metrics.csv format; loss and accuracy round-trip
// to the exact in-memory doubles
std::vector<RoundRecord> parse_round_csv(const std::string& text);
std::vector<RoundRecord> read_round_csv(const std::string& path);

struct ComparisonEntry {
  std::string name;
  std::string protocol;
  std::optional<double> time_to_target_ms;
  double speedup = 1.0;  // reference time / own time, >1 means faster
  bool loss_curve_matches_reference = false;
};

struct ComparisonReport {
  double target_loss = 0;
  std::string reference;  // name of the entry speedups are relative to
  std::vector<ComparisonEntry> entries;
  std::string to_text() const;
};

// Rank runs of the same experiment under different routing protocols. Throws
// ConfigError when fingerprints differ. The baseline-protocol run is the
// reference; without one, the first run is.
ComparisonReport compare_runs(const std::vector<MetricsLog>& logs, double target_loss);

}  // namespace fedmesh

#endif
