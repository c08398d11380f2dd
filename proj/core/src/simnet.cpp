#include "fedmesh/simnet.hpp"

#include <algorithm>
#include <cmath>

#include "fedmesh/errors.hpp"
#include "fedmesh/util.hpp"

namespace fedmesh {

void EventQueue::post(double t_ms, std::function<void()> fn) {
  if (!(t_ms >= now_))
    throw SimError("event posted in the past: t=" + format_double(t_ms) +
                   " now=" + format_double(now_));
  q_.push(Ev{t_ms, seq_++, std::make_shared<std::function<void()>>(std::move(fn))});
}

bool EventQueue::step() {
  if (q_.empty()) return false;
  Ev ev = q_.top();
  q_.pop();
  now_ = ev.t;
  (*ev.fn)();
  return true;
}

void stamp_telemetry(Packet& pkt, const std::string& router, double now_ms) {
  if (pkt.telemetry)
    throw SimError("telemetry header already present on packet " + std::to_string(pkt.id));
  pkt.telemetry = TelemetryHeader{router, now_ms};
}

double pop_telemetry(Packet& pkt, double now_ms) {
  if (!pkt.telemetry)
    throw SimError("no telemetry header on packet " + std::to_string(pkt.id));
  const double delay = now_ms - pkt.telemetry->send_ms;
  pkt.telemetry.reset();
  return delay;
}

TransmitResult transmit(LinkState& link, std::size_t payload_bytes, double now_ms) {
  if (link.queue_capacity > 0 && link.in_flight >= link.queue_capacity) {
    ++link.dropped;
    return {false, 0, 0};
  }
  const double start = std::max(now_ms, link.busy_until_ms);
  const double tx_ms =
      payload_bytes == 0 ? 0.0 : static_cast<double>(payload_bytes) * 8.0 / link.capacity_bps * 1e3;
  double jitter = 0;
  if (link.jitter_max_ms > 0)
    jitter = std::uniform_real_distribution<double>(0, link.jitter_max_ms)(link.jitter_rng);
  const double raw = start + tx_ms + link.proc_delay_ms + jitter;
  // jitter must not reorder deliveries on a link
  const double deliver = std::max(raw, link.last_delivery_ms);
  link.busy_until_ms = start + tx_ms;
  link.last_delivery_ms = deliver;
  ++link.in_flight;
  ++link.enqueued;
  return {true, deliver, deliver - now_ms};
}

MeshNet::MeshNet(const Topology& topo, EventQueue& q, const SimParams& params,
                 std::uint64_t sim_seed)
    : topo_(topo), q_(q), params_(params), sim_seed_(sim_seed) {
  ttl_ = params.ttl > 0 ? params.ttl : static_cast<int>(4 * topo.size());
  for (const auto& l : topo.links()) {
    for (const auto& [from, to] : {std::make_pair(l.a, l.b), std::make_pair(l.b, l.a)}) {
      LinkState s;
      s.capacity_bps = l.capacity_mbps * 1e6;
      s.proc_delay_ms = l.proc_delay_ms;
      s.jitter_max_ms = params.jitter_max_ms;
      s.queue_capacity = params.queue_capacity;
      s.jitter_rng.seed(derive_seed(sim_seed, "jitter:" + from + ">" + to));
      links_.emplace(std::make_pair(from, to), std::move(s));
    }
  }
}

void MeshNet::set_forwarder(PacketKind kind, Forwarder* f) { forwarders_[kind] = f; }

const std::string& MeshNet::egress_router(const Packet& pkt) const {
  return topo_.router_of(pkt.flow.dst);
}

std::uint64_t MeshNet::send_message(const std::string& src_ep, const std::string& dst_ep,
                                    std::size_t bytes, PacketKind kind,
                                    std::function<void(const MessageDelivery&)> cb) {
  const std::string& ingress = topo_.router_of(src_ep);
  topo_.router_of(dst_ep);  // validate early
  const std::size_t mtu = params_.mtu_bytes;
  const std::uint32_t frags =
      bytes == 0 ? 1 : static_cast<std::uint32_t>((bytes + mtu - 1) / mtu);
  const std::uint64_t mid = next_message_id_++;
  const FlowKey flow{src_ep, dst_ep};
  pending_[mid] = PendingMessage{frags, q_.now(), bytes, flow, std::move(cb)};
  for (std::uint32_t i = 0; i < frags; ++i) {
    auto pkt = std::make_shared<Packet>();
    pkt->id = next_packet_id_++;
    pkt->flow = flow;
    pkt->payload_bytes = bytes == 0 ? 0 : (i + 1 < frags ? mtu : bytes - mtu * (frags - 1));
    pkt->kind = kind;
    pkt->ttl = ttl_;
    pkt->injected_ms = q_.now();
    pkt->message_id = mid;
    pkt->frag_index = i;
    pkt->frag_count = frags;
    inject(pkt, ingress);
  }
  return mid;
}

void MeshNet::send_control(const std::string& src_router, const std::string& dst_router,
                           std::function<void(double)> cb) {
  send_message("@" + src_router, "@" + dst_router, 0, PacketKind::Report,
               [cb = std::move(cb)](const MessageDelivery& d) {
                 if (cb) cb(d.delivered_ms);
               });
}

void MeshNet::add_background(const BackgroundFlowSpec& spec) {
  const std::string& src_router = topo_.router_of(spec.src);
  const std::string& dst_router = topo_.router_of(spec.dst);
  if (spec.rate_pps < 0) throw ConfigError("background flow: negative rate");
  if (spec.packet_bytes == 0) throw ConfigError("background flow: zero packet size");
  if (spec.fixed_route) {
    const auto& p = spec.fixed_path;
    if (p.size() < 2 || p.front() != src_router || p.back() != dst_router)
      throw ConfigError("background flow: fixed path must run " + src_router + ".." + dst_router);
    for (std::size_t i = 0; i + 1 < p.size(); ++i)
      if (!topo_.has_link(p[i], p[i + 1]))
        throw ConfigError("background flow: fixed path uses missing link " + p[i] + "-" + p[i + 1]);
  }
  const std::size_t idx = background_.size();
  background_.push_back(spec);
  background_rng_.emplace_back(derive_seed(sim_seed_, "bg:" + std::to_string(idx)));
  if (spec.rate_pps > 0) schedule_background(idx);
}

void MeshNet::schedule_background(std::size_t idx) {
  const double lambda_per_ms = background_[idx].rate_pps / 1e3;
  const double dt = std::exponential_distribution<double>(lambda_per_ms)(background_rng_[idx]);
  q_.post(q_.now() + dt, [this, idx] {
    if (stopped_) return;
    const auto& spec = background_[idx];
    auto pkt = std::make_shared<Packet>();
    pkt->id = next_packet_id_++;
    pkt->flow = FlowKey{spec.src, spec.dst};
    pkt->payload_bytes = spec.packet_bytes;
    pkt->kind = PacketKind::Background;
    pkt->ttl = ttl_;
    pkt->injected_ms = q_.now();
    inject(pkt, topo_.router_of(spec.src));
    schedule_background(idx);
  });
}

void MeshNet::inject(const std::shared_ptr<Packet>& pkt, const std::string& router) {
  ++counters_.injected;
  arrive(pkt, router, std::nullopt);
}

void MeshNet::arrive(const std::shared_ptr<Packet>& pkt, const std::string& router,
                     std::optional<std::string> from) {
  const double now = q_.now();
  if (from) {
    const double enqueue_ms = pkt->telemetry ? pkt->telemetry->send_ms : 0;
    const double measured = pop_telemetry(*pkt, now);
    pkt->reward_sum += -measured;
    auto& link = links_.at({*from, router});
    ++link.delivered;
    --link.in_flight;
    if (params_.record_trace) {
      const double computed = pending_hop_computed_.at(pkt->id);
      pending_hop_computed_.erase(pkt->id);
      hop_log_.push_back({pkt->id, *from, router, enqueue_ms, now, computed, measured});
    }
    auto it = forwarders_.find(pkt->kind);
    if (it != forwarders_.end() && it->second)
      it->second->on_hop_measured(router, *pkt, *from, measured, now);
  }
  pkt->hop_trace.push_back({router, now});
  if (router == egress_router(*pkt)) {
    deliver(pkt, router);
    return;
  }
  forward(pkt, router);
}

void MeshNet::forward(const std::shared_ptr<Packet>& pkt, const std::string& router) {
  const double now = q_.now();
  if (pkt->ttl <= 0) {
    ++counters_.dropped_ttl;
    return;
  }
  --pkt->ttl;
  auto it = forwarders_.find(pkt->kind);
  if (it == forwarders_.end() || !it->second)
    throw SimError("no forwarder registered for packet kind");
  const auto nh = it->second->next_hop(router, *pkt, now);
  if (!nh) {
    ++counters_.dropped_fault;
    if (strict_faults_)
      throw SimError("unroutable packet at " + router + " for flow " + pkt->flow.src + "->" +
                     pkt->flow.dst);
    return;
  }
  if (!topo_.has_link(router, *nh))
    throw SimError("forwarder chose non-adjacent hop " + router + "->" + *nh);
  auto& link = links_.at({router, *nh});
  const auto res = transmit(link, pkt->payload_bytes, now);
  if (!res.accepted) {
    ++counters_.dropped_queue;
    return;
  }
  stamp_telemetry(*pkt, router, now);
  if (params_.record_trace) pending_hop_computed_[pkt->id] = res.delay_ms;
  q_.post(res.deliver_at_ms,
          [this, pkt, nh = *nh, router] { arrive(pkt, nh, router); });
}

void MeshNet::deliver(const std::shared_ptr<Packet>& pkt, const std::string& router) {
  (void)router;
  const double now = q_.now();
  ++counters_.delivered;
  if (pkt->kind != PacketKind::Report)
    flow_delays_[pkt->flow].push_back(now - pkt->injected_ms);
  if (params_.record_deliveries) {
    std::vector<std::string> route;
    route.reserve(pkt->hop_trace.size());
    for (const auto& h : pkt->hop_trace) route.push_back(h.router);
    deliveries_.push_back(
        {pkt->id, pkt->flow, pkt->kind, pkt->injected_ms, now, pkt->reward_sum, std::move(route)});
  }
  if (pkt->message_id != 0) {
    auto it = pending_.find(pkt->message_id);
    if (it == pending_.end()) throw SimError("fragment for unknown message");
    if (--it->second.remaining == 0) {
      PendingMessage msg = std::move(it->second);
      pending_.erase(it);
      if (msg.cb)
        msg.cb(MessageDelivery{pkt->message_id, msg.flow, msg.sent_ms, now, msg.bytes});
    }
  }
}

}  // namespace fedmesh
