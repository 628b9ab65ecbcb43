#pragma once

#include <cstdint>
#include <string_view>

namespace redsim {

enum class TcpPhase { SlowStart, CongestionAvoidance, FastRecovery };

std::string_view to_string(TcpPhase phase) noexcept;

// Sender-side TCP Reno congestion state for one flow. Sequence numbers count
// whole packets. `highest_acked` is the cumulative ACK point: every segment
// with seq < highest_acked has been acknowledged.
struct TcpFlowState {
  double cwnd = 1.0;
  double ssthresh = 64.0;
  TcpPhase phase = TcpPhase::SlowStart;
  std::uint64_t next_seq = 0;
  std::uint64_t highest_acked = 0;
  int dupack_count = 0;
  std::uint64_t in_flight = 0;
  double rto = 1.0;
  double initial_window = 1.0;
  // Set by loss reactions; the driver resends `highest_acked` and clears it.
  bool retransmit_pending = false;

  friend bool operator==(const TcpFlowState&, const TcpFlowState&) = default;
};

struct AckResult {
  TcpFlowState state;
  // True when the ACK did not advance the cumulative ACK point; `state` is
  // then returned unchanged.
  bool stale = false;
};

struct RtoPolicy {
  double multiplier = 4.0;
  double min_rto = 0.2;
};

// New cumulative ACK. Slow start adds one packet per ACK and switches to
// congestion avoidance once cwnd >= ssthresh; congestion avoidance adds
// 1/cwnd; any new ACK during fast recovery deflates cwnd to ssthresh.
AckResult on_ack(const TcpFlowState& state, std::uint64_t acked_seq);

// Duplicate ACK. The third one triggers fast retransmit and halves the window.
// Ignored while already in fast recovery.
TcpFlowState on_dupack(const TcpFlowState& state);

// Retransmission timeout: collapse to the initial window and restart slow
// start from the oldest unacknowledged segment (go-back-N). Applies in every
// phase.
TcpFlowState on_timeout(const TcpFlowState& state);

// Records that one new segment was sent; returns its sequence number.
std::uint64_t on_send(TcpFlowState& state);

// Number of new segments the window currently allows.
std::uint64_t can_send(const TcpFlowState& state) noexcept;

double rto_duration(double srtt, const RtoPolicy& policy = {});

}  // namespace redsim
