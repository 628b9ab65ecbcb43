#include "redsim/des.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "redsim/errors.hpp"

namespace redsim::des {

std::vector<std::string> DesConfig::violations() const {
  std::vector<std::string> out = red.violations();
  if (n_flows < 1) out.emplace_back("des.n_flows must be >= 1");
  if (!(link_capacity > 0.0) || !std::isfinite(link_capacity)) {
    out.emplace_back("des.link_capacity must be > 0");
  }
  if (!(prop_delay > 0.0) || !std::isfinite(prop_delay)) out.emplace_back("des.prop_delay must be > 0");
  if (buffer_capacity < 1) out.emplace_back("des.buffer_capacity must be >= 1");
  if (!(sim_duration > 0.0) || !std::isfinite(sim_duration)) {
    out.emplace_back("des.sim_duration must be > 0");
  }
  if (!(sample_interval > 0.0) || !std::isfinite(sample_interval)) {
    out.emplace_back("des.sample_interval must be > 0");
  }
  if (!(initial_ssthresh >= 2.0)) out.emplace_back("des.initial_ssthresh must be >= 2");
  if (!(initial_rto > 0.0)) out.emplace_back("des.initial_rto must be > 0");
  if (!(rto.multiplier > 0.0) || !(rto.min_rto > 0.0)) out.emplace_back("des.rto policy must be positive");
  return out;
}

std::vector<std::string> DesConfig::warnings() const {
  std::vector<std::string> out;
  if (static_cast<double>(buffer_capacity) < red.q_max) {
    std::ostringstream os;
    os << "buffer_capacity (" << buffer_capacity << ") is below red.q_max (" << red.q_max
       << "); tail drops will dominate";
    out.push_back(os.str());
  }
  return out;
}

void DesConfig::validate() const {
  auto v = violations();
  if (!v.empty()) throw ConfigError(std::move(v));
}

bool event_before(const SimEvent& a, const SimEvent& b) noexcept {
  if (a.time != b.time) return a.time < b.time;
  if (a.kind != b.kind) return a.kind < b.kind;
  if (a.flow_id != b.flow_id) return a.flow_id < b.flow_id;
  if (a.seq != b.seq) return a.seq < b.seq;
  return a.order < b.order;
}

EnqueueOutcome enqueue_arrival(RedQueue& queue, const Packet& packet, const RedParams& red,
                               RandomStream& rng) {
  queue.q_hat = ewma_update(queue.q_hat, static_cast<double>(queue.length()), red.w_q);
  const double p = drop_probability(queue.q_hat, red);
  if (drop_decision(p, rng)) return EnqueueOutcome::DroppedRed;
  if (queue.length() >= queue.capacity) return EnqueueOutcome::DroppedTail;
  queue.packets.push_back(packet);
  return EnqueueOutcome::Accepted;
}

Departure service_complete(RedQueue& queue, double link_capacity, double prop_delay, double now) {
  if (queue.packets.empty()) throw std::logic_error("service_complete on an empty queue");
  Departure d;
  d.packet = queue.packets.front();
  queue.packets.pop_front();
  d.sink_arrival = now + prop_delay;
  d.ack_arrival = d.sink_arrival + prop_delay;
  if (!queue.packets.empty()) d.next_service = now + 1.0 / link_capacity;
  return d;
}

namespace {

struct EventLater {
  bool operator()(const SimEvent& a, const SimEvent& b) const noexcept { return event_before(b, a); }
};

struct Receiver {
  std::uint64_t next_expected = 0;
  std::set<std::uint64_t> out_of_order;

  // Returns the cumulative ACK after accepting `seq`.
  std::uint64_t receive(std::uint64_t seq) {
    if (seq == next_expected) {
      ++next_expected;
      while (!out_of_order.empty() && *out_of_order.begin() == next_expected) {
        out_of_order.erase(out_of_order.begin());
        ++next_expected;
      }
    } else if (seq > next_expected) {
      out_of_order.insert(seq);
    }
    return next_expected;
  }
};

struct Sender {
  TcpFlowState tcp;
  double srtt = 0.0;
  bool has_rtt = false;
  std::uint64_t timer_token = 0;
  bool timer_armed = false;
};

class Engine {
 public:
  explicit Engine(const DesConfig& cfg)
      : cfg_(cfg),
        queue_rng_(RandomStream::substream(cfg.seed, 0)),
        senders_(static_cast<std::size_t>(cfg.n_flows)),
        receivers_(static_cast<std::size_t>(cfg.n_flows)) {
    queue_.capacity = cfg.buffer_capacity;
    std::vector<std::string> names{"q", "q_hat", "p"};
    for (int i = 0; i < cfg.n_flows; ++i) names.push_back("cwnd_" + std::to_string(i));
    names.emplace_back("drops_red_cum");
    names.emplace_back("drops_tail_cum");
    result_.series = TimeSeries(std::move(names));
    result_.warnings = cfg.warnings();
    for (auto& s : senders_) {
      s.tcp.ssthresh = cfg.initial_ssthresh;
      s.tcp.rto = cfg.initial_rto;
    }
  }

  SimResult run() {
    for (std::uint32_t f = 0; f < senders_.size(); ++f) {
      auto rng = RandomStream::substream(cfg_.seed, std::uint64_t{f} + 1);
      const double start = rng.uniform(0.0, 2.0 * cfg_.prop_delay);
      push({start, EventKind::FlowStart, f, 0});
    }
    push({0.0, EventKind::Sample, 0, 0});

    double last_time = 0.0;
    while (!events_.empty()) {
      SimEvent ev = events_.top();
      if (ev.time > cfg_.sim_duration) break;
      events_.pop();
      if (ev.time < last_time) throw std::logic_error("event time went backwards");
      last_time = ev.time;
      ++result_.events_processed;
      dispatch(ev);
    }
    log({cfg_.sim_duration, LogKind::End, 0, 0, queue_.length(), queue_.q_hat, 0.0});

    result_.summary = summary_;
    result_.summary.resident = queue_.length() + on_wire_;
    result_.resident_from_state = queue_.length() + on_wire_;
    finish_summary();
    for (const auto& s : senders_) result_.flows.push_back(s.tcp);
    return std::move(result_);
  }

 private:
  void push(SimEvent ev) {
    ev.order = next_order_++;
    events_.push(ev);
  }

  void log(const LogRecord& rec) {
    if (cfg_.record_event_log) result_.log.push_back(rec);
  }

  void dispatch(const SimEvent& ev) {
    switch (ev.kind) {
      case EventKind::FlowStart: try_send(ev.flow_id, ev.time); break;
      case EventKind::PacketArrivalAtQueue: on_queue_arrival(ev); break;
      case EventKind::ServiceComplete: on_service(ev.time); break;
      case EventKind::SinkArrival: on_sink(ev); break;
      case EventKind::AckArrivalAtSource: on_ack_arrival(ev); break;
      case EventKind::RtoExpiry: on_rto(ev); break;
      case EventKind::Sample: on_sample(ev.time); break;
    }
  }

  void transmit(std::uint32_t flow, std::uint64_t seq, double now) {
    ++summary_.sent;
    log({now, LogKind::Send, flow, seq, queue_.length(), queue_.q_hat, 0.0});
    push({now, EventKind::PacketArrivalAtQueue, flow, seq, now});
    auto& s = senders_[flow];
    if (!s.timer_armed) arm_timer(flow, now);
  }

  void try_send(std::uint32_t flow, double now) {
    auto& s = senders_[flow];
    if (s.tcp.retransmit_pending) {
      s.tcp.retransmit_pending = false;
      if (s.tcp.next_seq > s.tcp.highest_acked) {
        transmit(flow, s.tcp.highest_acked, now);
      }
    }
    for (auto n = can_send(s.tcp); n > 0; --n) {
      const std::uint64_t seq = on_send(s.tcp);
      transmit(flow, seq, now);
    }
  }

  void arm_timer(std::uint32_t flow, double now) {
    auto& s = senders_[flow];
    s.timer_token += 1;
    s.timer_armed = true;
    SimEvent ev{now + s.tcp.rto, EventKind::RtoExpiry, flow, 0};
    ev.token = s.timer_token;
    push(ev);
  }

  void disarm_timer(std::uint32_t flow) {
    auto& s = senders_[flow];
    s.timer_token += 1;
    s.timer_armed = false;
  }

  void on_queue_arrival(const SimEvent& ev) {
    const Packet pkt{ev.flow_id, ev.seq, ev.stamp};
    const bool was_empty = queue_.packets.empty();
    switch (enqueue_arrival(queue_, pkt, cfg_.red, queue_rng_)) {
      case EnqueueOutcome::Accepted:
        log({ev.time, LogKind::Accept, ev.flow_id, ev.seq, queue_.length(), queue_.q_hat, 0.0});
        result_.max_queue = std::max(result_.max_queue, queue_.length());
        if (was_empty) push({ev.time + 1.0 / cfg_.link_capacity, EventKind::ServiceComplete, ev.flow_id, ev.seq});
        break;
      case EnqueueOutcome::DroppedRed:
        ++summary_.dropped_red;
        log({ev.time, LogKind::DropRed, ev.flow_id, ev.seq, queue_.length(), queue_.q_hat, 0.0});
        break;
      case EnqueueOutcome::DroppedTail:
        ++summary_.dropped_tail;
        log({ev.time, LogKind::DropTail, ev.flow_id, ev.seq, queue_.length(), queue_.q_hat, 0.0});
        break;
    }
  }

  void on_service(double now) {
    Departure d = service_complete(queue_, cfg_.link_capacity, cfg_.prop_delay, now);
    log({now, LogKind::Depart, d.packet.flow_id, d.packet.seq, queue_.length(), queue_.q_hat, 0.0});
    ++on_wire_;
    push({d.sink_arrival, EventKind::SinkArrival, d.packet.flow_id, d.packet.seq, d.packet.sent_at});
    if (d.next_service) {
      const Packet& head = queue_.packets.front();
      push({*d.next_service, EventKind::ServiceComplete, head.flow_id, head.seq});
    }
  }

  void on_sink(const SimEvent& ev) {
    --on_wire_;
    ++summary_.delivered;
    log({ev.time, LogKind::Deliver, ev.flow_id, ev.seq, queue_.length(), queue_.q_hat, 0.0});
    const std::uint64_t ack = receivers_[ev.flow_id].receive(ev.seq);
    push({ev.time + cfg_.prop_delay, EventKind::AckArrivalAtSource, ev.flow_id, ack, ev.stamp});
  }

  void on_ack_arrival(const SimEvent& ev) {
    auto& s = senders_[ev.flow_id];
    const double sample = ev.time - ev.stamp;
    if (!s.has_rtt) {
      s.srtt = sample;
      s.has_rtt = true;
    } else {
      s.srtt = 0.875 * s.srtt + 0.125 * sample;
    }
    s.tcp.rto = rto_duration(s.srtt, cfg_.rto);
    rtt_sum_ += sample;
    ++rtt_count_;
    log({ev.time, LogKind::Ack, ev.flow_id, ev.seq, queue_.length(), queue_.q_hat, sample});

    if (ev.seq > s.tcp.highest_acked) {
      s.tcp = on_ack(s.tcp, ev.seq).state;
      if (s.tcp.in_flight > 0) {
        arm_timer(ev.flow_id, ev.time);
      } else {
        disarm_timer(ev.flow_id);
      }
    } else if (ev.seq == s.tcp.highest_acked && s.tcp.in_flight > 0) {
      s.tcp = on_dupack(s.tcp);
    }
    try_send(ev.flow_id, ev.time);
  }

  void on_rto(const SimEvent& ev) {
    auto& s = senders_[ev.flow_id];
    if (!s.timer_armed || ev.token != s.timer_token) return;
    s.timer_armed = false;
    if (s.tcp.next_seq == s.tcp.highest_acked) return;
    log({ev.time, LogKind::Timeout, ev.flow_id, s.tcp.highest_acked, queue_.length(), queue_.q_hat, 0.0});
    s.tcp = on_timeout(s.tcp);
    try_send(ev.flow_id, ev.time);
    if (!s.timer_armed && s.tcp.in_flight > 0) arm_timer(ev.flow_id, ev.time);
  }

  void on_sample(double now) {
    std::vector<double> row;
    row.reserve(result_.series.channel_count());
    row.push_back(static_cast<double>(queue_.length()));
    row.push_back(queue_.q_hat);
    row.push_back(drop_probability(queue_.q_hat, cfg_.red));
    for (const auto& s : senders_) row.push_back(s.tcp.cwnd);
    row.push_back(static_cast<double>(summary_.dropped_red));
    row.push_back(static_cast<double>(summary_.dropped_tail));
    result_.series.append(now, row);
    ++sample_index_;
    const double next = static_cast<double>(sample_index_) * cfg_.sample_interval;
    if (next <= cfg_.sim_duration) push({next, EventKind::Sample, 0, sample_index_});
  }

  void finish_summary() {
    auto& sum = result_.summary;
    if (cfg_.record_event_log) {
      const SimSummary from_log = collect_metrics(result_.log);
      sum.mean_q = from_log.mean_q;
      sum.mean_q_hat = from_log.mean_q_hat;
    } else {
      sum.mean_q = time_average(result_.series, "q", 0.0);
      sum.mean_q_hat = time_average(result_.series, "q_hat", 0.0);
    }
    const auto drops = sum.dropped_red + sum.dropped_tail;
    sum.drop_fraction = sum.sent > 0 ? static_cast<double>(drops) / static_cast<double>(sum.sent) : 0.0;
    sum.throughput = static_cast<double>(sum.delivered) / cfg_.sim_duration;
    sum.mean_rtt = rtt_count_ > 0 ? rtt_sum_ / static_cast<double>(rtt_count_) : 0.0;
  }

  const DesConfig& cfg_;
  RandomStream queue_rng_;
  RedQueue queue_;
  std::vector<Sender> senders_;
  std::vector<Receiver> receivers_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, EventLater> events_;
  std::uint64_t next_order_ = 0;
  std::uint64_t on_wire_ = 0;
  std::uint64_t sample_index_ = 0;
  double rtt_sum_ = 0.0;
  std::uint64_t rtt_count_ = 0;
  SimSummary summary_;
  SimResult result_;
};

}  // namespace

SimResult simulate_dumbbell(const DesConfig& config) {
  config.validate();
  Engine engine(config);
  return engine.run();
}

SimSummary collect_metrics(const std::vector<LogRecord>& log) {
  SimSummary s;
  if (log.empty()) return s;
  if (log.back().kind != LogKind::End) throw DataError("collect_metrics: log is truncated (no End record)");

  const double t_end = log.back().t;
  double q = 0.0;
  double q_hat = 0.0;
  double last_t = 0.0;
  double q_area = 0.0;
  double q_hat_area = 0.0;
  double rtt_sum = 0.0;
  std::uint64_t rtt_count = 0;
  std::uint64_t accepted = 0;

  for (const auto& rec : log) {
    if (rec.t < last_t) throw DataError("collect_metrics: records out of time order");
    q_area += q * (rec.t - last_t);
    q_hat_area += q_hat * (rec.t - last_t);
    last_t = rec.t;
    switch (rec.kind) {
      case LogKind::Send: ++s.sent; break;
      case LogKind::Accept:
        ++accepted;
        q = static_cast<double>(rec.q);
        q_hat = rec.q_hat;
        break;
      case LogKind::DropRed:
        ++s.dropped_red;
        q_hat = rec.q_hat;
        break;
      case LogKind::DropTail:
        ++s.dropped_tail;
        q_hat = rec.q_hat;
        break;
      case LogKind::Depart: q = static_cast<double>(rec.q); break;
      case LogKind::Deliver: ++s.delivered; break;
      case LogKind::Ack:
        rtt_sum += rec.value;
        ++rtt_count;
        break;
      case LogKind::Timeout:
      case LogKind::End: break;
    }
  }

  // Packets that were sent at the very end of the run may not have reached
  // the queue yet; they count as resident alongside queued and propagating ones.
  const std::uint64_t arrived = accepted + s.dropped_red + s.dropped_tail;
  s.resident = (s.sent - arrived) + (accepted - s.delivered);
  if (t_end > 0.0) {
    s.mean_q = q_area / t_end;
    s.mean_q_hat = q_hat_area / t_end;
    s.throughput = static_cast<double>(s.delivered) / t_end;
  }
  const auto drops = s.dropped_red + s.dropped_tail;
  s.drop_fraction = s.sent > 0 ? static_cast<double>(drops) / static_cast<double>(s.sent) : 0.0;
  s.mean_rtt = rtt_count > 0 ? rtt_sum / static_cast<double>(rtt_count) : 0.0;
  return s;
}

void write_summary_json(std::ostream& os, const SimSummary& s) {
  nlohmann::ordered_json j;
  j["sent"] = s.sent;
  j["delivered"] = s.delivered;
  j["dropped_red"] = s.dropped_red;
  j["dropped_tail"] = s.dropped_tail;
  j["resident"] = s.resident;
  j["mean_q"] = s.mean_q;
  j["mean_q_hat"] = s.mean_q_hat;
  j["drop_fraction"] = s.drop_fraction;
  j["throughput"] = s.throughput;
  j["mean_rtt"] = s.mean_rtt;
  os << j.dump(2) << '\n';
}

}  // namespace redsim::des
