#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "redsim/red.hpp"
#include "redsim/rng.hpp"
#include "redsim/tcp_reno.hpp"
#include "redsim/time_series.hpp"

namespace redsim::des {

// Dumbbell scenario: N Reno sources feed one RED queue served at
// `link_capacity` packets/s; the sink sits `prop_delay` seconds behind the
// queue and ACKs return over a loss-free path with the same delay.
struct DesConfig {
  int n_flows = 4;
  double link_capacity = 100.0;
  double prop_delay = 0.05;
  std::uint64_t buffer_capacity = 50;
  RedParams red{};
  double sim_duration = 60.0;
  std::uint64_t seed = 1;
  double sample_interval = 0.1;

  double initial_ssthresh = 64.0;
  double initial_rto = 1.0;
  RtoPolicy rto{};
  bool record_event_log = true;

  std::vector<std::string> violations() const;
  std::vector<std::string> warnings() const;
  void validate() const;
};

// Ordered by value: simultaneous events are processed in (kind, flow, seq)
// order, which makes every run replayable bit for bit.
enum class EventKind : std::uint8_t {
  FlowStart,
  PacketArrivalAtQueue,
  ServiceComplete,
  SinkArrival,
  AckArrivalAtSource,
  RtoExpiry,
  Sample,
};

struct SimEvent {
  double time = 0.0;
  EventKind kind = EventKind::Sample;
  std::uint32_t flow_id = 0;
  std::uint64_t seq = 0;
  double stamp = 0.0;        // send time carried by packets and echoed by ACKs
  std::uint64_t token = 0;   // RTO generation; stale timers are skipped
  std::uint64_t order = 0;   // insertion counter, last-resort tie-break
};

bool event_before(const SimEvent& a, const SimEvent& b) noexcept;

struct Packet {
  std::uint32_t flow_id = 0;
  std::uint64_t seq = 0;
  double sent_at = 0.0;
};

// FIFO with RED admission. The packet in service stays at the head and is
// counted in the instantaneous length.
struct RedQueue {
  std::deque<Packet> packets;
  double q_hat = 0.0;
  std::uint64_t capacity = 0;

  std::uint64_t length() const noexcept { return packets.size(); }
};

enum class EnqueueOutcome { Accepted, DroppedRed, DroppedTail };

// RED admission for one arriving packet: refresh q_hat from the pre-enqueue
// length, draw the drop decision, then apply the hard buffer limit.
EnqueueOutcome enqueue_arrival(RedQueue& queue, const Packet& packet, const RedParams& red,
                               RandomStream& rng);

struct Departure {
  Packet packet;
  double sink_arrival = 0.0;
  double ack_arrival = 0.0;
  std::optional<double> next_service;  // empty when the queue drained
};

// Head-of-line packet finishes transmission at `now`.
Departure service_complete(RedQueue& queue, double link_capacity, double prop_delay, double now);

enum class LogKind : std::uint8_t {
  Send,
  Accept,
  DropRed,
  DropTail,
  Depart,
  Deliver,
  Ack,
  Timeout,
  End,
};

// One packet-level record. `q` is the instantaneous queue length after the
// event and `q_hat` the EWMA after it; `value` carries the RTT sample on Ack
// records.
struct LogRecord {
  double t = 0.0;
  LogKind kind = LogKind::End;
  std::uint32_t flow_id = 0;
  std::uint64_t seq = 0;
  std::uint64_t q = 0;
  double q_hat = 0.0;
  double value = 0.0;

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

struct SimSummary {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_red = 0;
  std::uint64_t dropped_tail = 0;
  std::uint64_t resident = 0;
  double mean_q = 0.0;
  double mean_q_hat = 0.0;
  double drop_fraction = 0.0;
  double throughput = 0.0;
  double mean_rtt = 0.0;

  bool conserves() const noexcept {
    return sent == delivered + dropped_red + dropped_tail + resident;
  }
  friend bool operator==(const SimSummary&, const SimSummary&) = default;
};

struct SimResult {
  TimeSeries series;
  SimSummary summary;
  std::vector<LogRecord> log;
  std::vector<TcpFlowState> flows;
  std::vector<std::string> warnings;
  std::uint64_t events_processed = 0;
  std::uint64_t max_queue = 0;
  // Queue + departed packets still propagating to the sink, taken from the
  // engine state rather than from the log.
  std::uint64_t resident_from_state = 0;
};

SimResult simulate_dumbbell(const DesConfig& config);

// Summary from a complete log (last record must be End). Time averages are
// taken over [0, t_end] with piecewise-constant q and q_hat.
SimSummary collect_metrics(const std::vector<LogRecord>& log);

void write_summary_json(std::ostream& os, const SimSummary& summary);

}  // namespace redsim::des
