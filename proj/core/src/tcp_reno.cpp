#include "redsim/tcp_reno.hpp"

#include <algorithm>
#include <cmath>

#include "redsim/errors.hpp"

namespace redsim {

namespace {
constexpr double kMinCwnd = 1.0;
constexpr double kMinSsthresh = 2.0;
}  // namespace

std::string_view to_string(TcpPhase phase) noexcept {
  switch (phase) {
    case TcpPhase::SlowStart: return "slow_start";
    case TcpPhase::CongestionAvoidance: return "congestion_avoidance";
    case TcpPhase::FastRecovery: return "fast_recovery";
  }
  return "unknown";
}

AckResult on_ack(const TcpFlowState& state, std::uint64_t acked_seq) {
  if (acked_seq <= state.highest_acked) return {state, true};

  TcpFlowState next = state;
  switch (state.phase) {
    case TcpPhase::SlowStart:
      next.cwnd += 1.0;
      if (next.cwnd >= next.ssthresh) next.phase = TcpPhase::CongestionAvoidance;
      break;
    case TcpPhase::CongestionAvoidance:
      next.cwnd += 1.0 / next.cwnd;
      break;
    case TcpPhase::FastRecovery:
      next.cwnd = std::max(kMinCwnd, next.ssthresh);
      next.phase = TcpPhase::CongestionAvoidance;
      break;
  }
  next.highest_acked = acked_seq;
  // An ACK beyond next_seq can arrive after a go-back-N timeout reset.
  next.next_seq = std::max(next.next_seq, acked_seq);
  next.in_flight = next.next_seq - next.highest_acked;
  next.dupack_count = 0;
  next.retransmit_pending = false;
  return {next, false};
}

TcpFlowState on_dupack(const TcpFlowState& state) {
  if (state.phase == TcpPhase::FastRecovery) return state;
  TcpFlowState next = state;
  next.dupack_count += 1;
  if (next.dupack_count >= 3) {
    next.ssthresh = std::max(kMinSsthresh, state.cwnd / 2.0);
    next.cwnd = std::max(kMinCwnd, state.cwnd / 2.0);
    next.phase = TcpPhase::FastRecovery;
    next.retransmit_pending = true;
    next.dupack_count = 3;
  }
  return next;
}

TcpFlowState on_timeout(const TcpFlowState& state) {
  TcpFlowState next = state;
  next.ssthresh = std::max(kMinSsthresh, state.cwnd / 2.0);
  next.cwnd = std::max(kMinCwnd, state.initial_window);
  next.phase = TcpPhase::SlowStart;
  next.dupack_count = 0;
  next.next_seq = state.highest_acked;
  next.in_flight = 0;
  next.retransmit_pending = true;
  return next;
}

std::uint64_t on_send(TcpFlowState& state) {
  const std::uint64_t seq = state.next_seq;
  state.next_seq += 1;
  state.in_flight = state.next_seq - state.highest_acked;
  return seq;
}

std::uint64_t can_send(const TcpFlowState& state) noexcept {
  const auto window = static_cast<std::uint64_t>(std::floor(state.cwnd));
  return window > state.in_flight ? window - state.in_flight : 0;
}

double rto_duration(double srtt, const RtoPolicy& policy) {
  if (!(srtt > 0.0) || !std::isfinite(srtt)) throw DomainError("rto_duration: srtt must be > 0");
  return std::max(policy.min_rto, policy.multiplier * srtt);
}

}  // namespace redsim
