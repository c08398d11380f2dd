#ifndef FEDMESH_SIMNET_HPP
#define FEDMESH_SIMNET_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "fedmesh/topology.hpp"

namespace fedmesh {

// Single-threaded discrete-event clock. Events fire in (time, insertion)
// order, so simultaneous events run in the order they were posted.
class EventQueue {
 public:
  double now() const { return now_; }
  void post(double t_ms, std::function<void()> fn);
  void post_now(std::function<void()> fn) { post(now_, std::move(fn)); }
  // runs the earliest event; false when nothing is pending
  bool step();
  std::size_t pending() const { return q_.size(); }

 private:
  struct Ev {
    double t;
    std::uint64_t seq;
    std::shared_ptr<std::function<void()>> fn;
  };
  struct Later {
    bool operator()(const Ev& a, const Ev& b) const {
      if (a.t != b.t) return a.t > b.t;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Ev, std::vector<Ev>, Later> q_;
  double now_ = 0.0;
  std::uint64_t seq_ = 0;
};

struct FlowKey {
  std::string src;
  std::string dst;
  auto operator<=>(const FlowKey&) const = default;
};

enum class PacketKind { FlData, FlControl, Background, Report };

// In-band measurement header: at most one per packet, present only while the
// packet is in flight on a single hop.
struct TelemetryHeader {
  std::string sender;
  double send_ms = 0;
};

struct HopStamp {
  std::string router;
  double arrival_ms;
};

struct Packet {
  std::uint64_t id = 0;
  FlowKey flow;
  std::size_t payload_bytes = 0;  // 0 for control stubs
  PacketKind kind = PacketKind::FlData;
  std::optional<TelemetryHeader> telemetry;
  std::vector<HopStamp> hop_trace;
  int ttl = 0;
  double injected_ms = 0;
  double reward_sum = 0;  // running sum of per-hop rewards (negative delays)
  std::uint64_t message_id = 0;
  std::uint32_t frag_index = 0;
  std::uint32_t frag_count = 1;
};

// Attach the measurement header at the instant the packet is handed to a
// link. Throws SimError if a header is already present.
void stamp_telemetry(Packet& pkt, const std::string& router, double now_ms);

// Remove the header on arrival at the next router and return the measured
// one-hop delay. Throws SimError if no header is present.
double pop_telemetry(Packet& pkt, double now_ms);

// One direction of a wireless link: an implicit FIFO queue tracked through
// busy-until bookkeeping.
struct LinkState {
  double capacity_bps = 40e6;
  double proc_delay_ms = 0.5;
  double jitter_max_ms = 0;
  std::size_t queue_capacity = 0;  // packets in flight; 0 = unbounded
  std::mt19937_64 jitter_rng;

  double busy_until_ms = 0;
  double last_delivery_ms = 0;
  std::size_t in_flight = 0;

  std::uint64_t enqueued = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
};

struct TransmitResult {
  bool accepted = true;
  double deliver_at_ms = 0;  // absolute delivery instant
  double delay_ms = 0;       // queueing + transmission + processing + jitter
};

// Schedule one packet on a directed link. Delay decomposes into queueing
// (wait for earlier traffic), payload_bits / capacity transmission time,
// fixed processing delay, and an optional bounded jitter draw. Delivery order
// on a link always equals enqueue order.
TransmitResult transmit(LinkState& link, std::size_t payload_bytes, double now_ms);

struct BackgroundFlowSpec {
  std::string src;  // endpoint ids
  std::string dst;
  double rate_pps = 0;  // Poisson arrival rate
  std::size_t packet_bytes = 1500;
  bool fixed_route = false;
  Path fixed_path;  // router list, used when fixed_route
};

// Pluggable per-packet forwarding decision. MeshNet asks the forwarder
// registered for the packet's kind at every router.
class Forwarder {
 public:
  virtual ~Forwarder() = default;
  // next router for pkt currently at `router`; nullopt = unroutable
  virtual std::optional<std::string> next_hop(const std::string& router, const Packet& pkt,
                                              double now_ms) = 0;
  // telemetry-measured one-hop delay, reported on arrival at `router`
  virtual void on_hop_measured(const std::string& router, const Packet& pkt,
                               const std::string& from, double delay_ms, double now_ms) {
    (void)router; (void)pkt; (void)from; (void)delay_ms; (void)now_ms;
  }
};

struct SimParams {
  std::size_t mtu_bytes = 1500;
  double jitter_max_ms = 0;
  int ttl = 0;  // 0 = 4 * router count
  std::size_t queue_capacity = 0;
  bool record_trace = false;       // per-hop log (memory)
  bool record_deliveries = false;  // per delivered packet log (memory)
};

struct NetCounters {
  std::uint64_t injected = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_ttl = 0;
  std::uint64_t dropped_queue = 0;
  std::uint64_t dropped_fault = 0;  // no route / empty action set
  std::uint64_t in_flight() const {
    return injected - delivered - dropped_ttl - dropped_queue - dropped_fault;
  }
};

struct HopLogEntry {
  std::uint64_t packet_id;
  std::string from;
  std::string to;
  double enqueue_ms;
  double deliver_ms;
  double computed_delay_ms;  // from the transmit schedule
  double measured_delay_ms;  // recovered from the telemetry header
};

struct DeliveredPacket {
  std::uint64_t id;
  FlowKey flow;
  PacketKind kind;
  double injected_ms;
  double delivered_ms;
  double reward_sum;
  std::vector<std::string> route;
};

struct MessageDelivery {
  std::uint64_t message_id;
  FlowKey flow;
  double sent_ms;
  double delivered_ms;  // last fragment arrival
  std::size_t bytes;
};

// Store-and-forward mesh driven by the event queue: fragmentation to MTU,
// per-hop forwarding through pluggable forwarders, telemetry stamping,
// TTL enforcement, reassembly at the egress router, Poisson background
// traffic, and conservation accounting.
class MeshNet {
 public:
  MeshNet(const Topology& topo, EventQueue& q, const SimParams& params, std::uint64_t sim_seed);

  void set_forwarder(PacketKind kind, Forwarder* f);

  // Fragments, injects at the source endpoint's router and calls cb once the
  // last fragment reaches the destination endpoint's router.
  std::uint64_t send_message(const std::string& src_ep, const std::string& dst_ep,
                             std::size_t bytes, PacketKind kind,
                             std::function<void(const MessageDelivery&)> cb = {});

  // Zero-payload router-to-router control stub (estimate reports).
  void send_control(const std::string& src_router, const std::string& dst_router,
                    std::function<void(double now_ms)> cb = {});

  // Poisson packet generator; runs until stop() or the horizon.
  void add_background(const BackgroundFlowSpec& spec);

  // background generators stop rescheduling once called
  void stop() { stopped_ = true; }

  const Topology& topology() const { return topo_; }
  int initial_ttl() const { return ttl_; }
  const NetCounters& counters() const { return counters_; }
  const std::map<std::pair<std::string, std::string>, LinkState>& link_states() const {
    return links_;
  }
  const std::vector<HopLogEntry>& hop_log() const { return hop_log_; }
  const std::vector<DeliveredPacket>& deliveries() const { return deliveries_; }
  // per-flow end-to-end packet delays, for the metrics emitters
  const std::map<FlowKey, std::vector<double>>& flow_delays() const { return flow_delays_; }

  // aborts the run with SimError when a baseline-routed packet is unroutable
  void set_strict_faults(bool strict) { strict_faults_ = strict; }

 private:
  struct PendingMessage {
    std::uint32_t remaining;
    double sent_ms;
    std::size_t bytes;
    FlowKey flow;
    std::function<void(const MessageDelivery&)> cb;
  };

  void inject(const std::shared_ptr<Packet>& pkt, const std::string& router);
  void arrive(const std::shared_ptr<Packet>& pkt, const std::string& router,
              std::optional<std::string> from);
  void forward(const std::shared_ptr<Packet>& pkt, const std::string& router);
  void deliver(const std::shared_ptr<Packet>& pkt, const std::string& router);
  void schedule_background(std::size_t idx);
  const std::string& egress_router(const Packet& pkt) const;

  const Topology& topo_;
  EventQueue& q_;
  SimParams params_;
  std::uint64_t sim_seed_;
  int ttl_;
  bool stopped_ = false;
  bool strict_faults_ = false;
  std::uint64_t next_packet_id_ = 1;
  std::uint64_t next_message_id_ = 1;
  std::map<std::pair<std::string, std::string>, LinkState> links_;
  std::map<std::uint64_t, PendingMessage> pending_;
  std::map<PacketKind, Forwarder*> forwarders_;
  std::vector<BackgroundFlowSpec> background_;
  std::vector<std::mt19937_64> background_rng_;
  NetCounters counters_;
  std::vector<HopLogEntry> hop_log_;
  std::vector<DeliveredPacket> deliveries_;
  std::map<FlowKey, std::vector<double>> flow_delays_;
  std::map<std::uint64_t, double> pending_hop_computed_;  // packet id -> scheduled hop delay
};

}  // namespace fedmesh

#endif
