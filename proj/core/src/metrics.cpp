#include "fedmesh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fedmesh/errors.hpp"
#include "fedmesh/util.hpp"
#include "json.hpp"

namespace fedmesh {

namespace {

double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0;
  // nearest-rank
  std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
  if (rank == 0) rank = 1;
  if (rank > sorted.size()) rank = sorted.size();
  return sorted[rank - 1];
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double_field(const std::string& s, std::size_t lineno) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw SimError("metrics.csv line " + std::to_string(lineno) + ": bad number \"" + s + "\"");
  }
  return v;
}

}  // namespace

FlowStats summarize_flow(const FlowKey& flow, std::vector<double> delays) {
  FlowStats st;
  st.flow = flow;
  st.packets = delays.size();
  if (delays.empty()) return st;
  std::sort(delays.begin(), delays.end());
  st.mean_ms = std::accumulate(delays.begin(), delays.end(), 0.0) /
               static_cast<double>(delays.size());
  st.p50_ms = percentile(delays, 0.50);
  st.p95_ms = percentile(delays, 0.95);
  st.p99_ms = percentile(delays, 0.99);
  return st;
}

std::optional<double> time_to_target(const std::vector<RoundRecord>& rounds, double target_loss) {
  for (const RoundRecord& r : rounds) {
    if (std::isfinite(r.loss) && r.loss <= target_loss) return r.end_ms;
  }
  return std::nullopt;
}

std::string round_csv_text(const std::vector<RoundRecord>& rounds) {
  std::ostringstream out;
  out << "round,start_ms,end_ms,loss,accuracy,tau_max_ms,mean_e2e_ms\n";
  for (const RoundRecord& r : rounds) {
    out << r.round << ',' << format_double(r.start_ms) << ',' << format_double(r.end_ms) << ','
        << format_double(r.loss) << ',' << format_double(r.accuracy) << ','
        << format_double(r.tau_max_ms) << ',' << format_double(r.mean_e2e_ms) << '\n';
  }
  return out.str();
}

std::vector<RoundRecord> parse_round_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SimError("metrics.csv is empty");
  if (line != "round,start_ms,end_ms,loss,accuracy,tau_max_ms,mean_e2e_ms") {
    throw SimError("metrics.csv has an unexpected header: " + line);
  }
  std::vector<RoundRecord> rounds;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 7) {
      throw SimError("metrics.csv line " + std::to_string(lineno) + ": expected 7 fields");
    }
    RoundRecord r;
    r.round = std::atoi(f[0].c_str());
    r.start_ms = parse_double_field(f[1], lineno);
    r.end_ms = parse_double_field(f[2], lineno);
    r.loss = parse_double_field(f[3], lineno);
    r.accuracy = parse_double_field(f[4], lineno);
    r.tau_max_ms = parse_double_field(f[5], lineno);
    r.mean_e2e_ms = parse_double_field(f[6], lineno);
    rounds.push_back(r);
  }
  return rounds;
}

std::vector<RoundRecord> read_round_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_round_csv(buf.str());
}

void emit_metrics(const MetricsLog& log, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw SimError("cannot create output directory " + dir + ": " + ec.message());

  {
    std::ofstream out(fs::path(dir) / "metrics.csv");
    if (!out) throw SimError("cannot write metrics.csv under " + dir);
    out << round_csv_text(log.rounds);
  }
  {
    std::ofstream out(fs::path(dir) / "flows.csv");
    if (!out) throw SimError("cannot write flows.csv under " + dir);
    out << "src,dst,packets,mean_ms,p50_ms,p95_ms,p99_ms\n";
    for (const FlowStats& f : log.flows) {
      out << f.flow.src << ',' << f.flow.dst << ',' << f.packets << ','
          << format_double(f.mean_ms) << ',' << format_double(f.p50_ms) << ','
          << format_double(f.p95_ms) << ',' << format_double(f.p99_ms) << '\n';
    }
  }
  {
    nlohmann::json j;
    j["name"] = log.name;
    j["protocol"] = log.protocol;
    j["rounds"] = log.rounds.size();
    j["bootstrap_end_ms"] = log.bootstrap_end_ms;
    j["total_sim_ms"] = log.total_sim_ms;
    j["reached_target"] = log.reached_target;
    j["packets_injected"] = log.net.injected;
    j["packets_delivered"] = log.net.delivered;
    j["packets_dropped_ttl"] = log.net.dropped_ttl;
    j["packets_dropped_queue"] = log.net.dropped_queue;
    j["packets_dropped_fault"] = log.net.dropped_fault;
    j["packets_in_flight"] = log.net.in_flight();
    if (!log.q_snapshot.empty()) j["q_tables"] = nlohmann::json::parse(log.q_snapshot);
    std::ofstream out(fs::path(dir) / "summary.json");
    if (!out) throw SimError("cannot write summary.json under " + dir);
    out << j.dump(2) << "\n";
  }
}

std::string ComparisonReport::to_text() const {
  std::ostringstream out;
  out << "target loss " << format_double(target_loss) << ", reference " << reference << "\n";
  for (const ComparisonEntry& e : entries) {
    out << "  " << e.name << " [" << e.protocol << "] ";
    if (e.time_to_target_ms) {
      out << "time-to-target " << format_fixed(*e.time_to_target_ms / 1e3, 3) << " s, speedup "
          << format_fixed(e.speedup, 4) << "x";
    } else {
      out << "target not reached";
    }
    if (e.loss_curve_matches_reference) out << ", identical loss curve";
    out << "\n";
  }
  return out.str();
}

ComparisonReport compare_runs(const std::vector<MetricsLog>& logs, double target_loss) {
  if (logs.empty()) throw ConfigError("nothing to compare");
  for (std::size_t i = 1; i < logs.size(); ++i) {
    if (logs[i].fingerprint != logs[0].fingerprint) {
      throw ConfigError("runs \"" + logs[0].name + "\" and \"" + logs[i].name +
                        "\" differ outside the routing section and are not comparable");
    }
  }
  std::size_t ref = 0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (logs[i].protocol == "baseline") {
      ref = i;
      break;
    }
  }

  auto curve = [](const MetricsLog& log) {
    std::vector<double> c;
    c.reserve(log.rounds.size());
    for (const RoundRecord& r : log.rounds) c.push_back(r.loss);
    return c;
  };
  const std::vector<double> ref_curve = curve(logs[ref]);
  const std::optional<double> ref_ttt = time_to_target(logs[ref].rounds, target_loss);

  ComparisonReport rep;
  rep.target_loss = target_loss;
  rep.reference = logs[ref].name;
  for (const MetricsLog& log : logs) {
    ComparisonEntry e;
    e.name = log.name;
    e.protocol = log.protocol;
    e.time_to_target_ms = time_to_target(log.rounds, target_loss);
    if (ref_ttt && e.time_to_target_ms) {
      e.speedup = *ref_ttt / *e.time_to_target_ms;
    } else {
      e.speedup = std::numeric_limits<double>::quiet_NaN();
    }
    std::vector<double> own = curve(log);
    e.loss_curve_matches_reference =
        own.size() == ref_curve.size() &&
        std::equal(own.begin(), own.end(), ref_curve.begin(), [](double a, double b) {
          return (std::isnan(a) && std::isnan(b)) || a == b;
        });
    rep.entries.push_back(std::move(e));
  }
  std::stable_sort(rep.entries.begin(), rep.entries.end(),
                   [](const ComparisonEntry& a, const ComparisonEntry& b) {
                     double ta = a.time_to_target_ms.value_or(std::numeric_limits<double>::max());
                     double tb = b.time_to_target_ms.value_or(std::numeric_limits<double>::max());
                     return ta < tb;
                   });
  return rep;
}

}  // namespace fedmesh
