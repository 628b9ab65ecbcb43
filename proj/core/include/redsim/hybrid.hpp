#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "redsim/fluid.hpp"
#include "redsim/tcp_reno.hpp"
#include "redsim/time_series.hpp"

namespace redsim::hybrid {

// Discrete RED mode, one per branch of the drop function.
enum class RedRegion { NoDrop, Linear, ForcedDrop };

enum class HybridEvent { TD, TO, SsThreshCross, RecoveryDone };

std::string_view to_string(RedRegion region) noexcept;
std::string_view to_string(HybridEvent event) noexcept;

class TransitionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct HybridParams {
  fluid::FluidParams fluid{};
  // Losses below this window cannot produce three duplicate ACKs and are
  // treated as timeouts.
  double w_to = 4.0;

  std::vector<std::string> violations() const;
  void validate() const;
};

struct HybridState {
  double t = 0.0;
  TcpPhase phase = TcpPhase::SlowStart;
  double W = 1.0;
  double Q = 0.0;
  double Q_hat = 0.0;
  double ssthresh = 64.0;
  std::optional<HybridEvent> pending_event;
  // End of the current fast-recovery hold (meaningful in FastRecovery only).
  double recovery_until = 0.0;

  friend bool operator==(const HybridState&, const HybridState&) = default;
};

RedRegion red_region(double q_hat, const RedParams& red) noexcept;

// Continuous window law of each phase: W/T in slow start, 1/T in congestion
// avoidance, 0 while holding in fast recovery.
double phase_dynamics(TcpPhase phase, const HybridState& state, const fluid::FluidParams& params);

// Re-initialization map of a discrete event. Q and Q_hat are never touched.
HybridState transition(const HybridState& state, HybridEvent event,
                       const fluid::FluidParams& params);

struct TransitionRecord {
  double t = 0.0;
  HybridEvent event = HybridEvent::TD;
  TcpPhase from = TcpPhase::SlowStart;
  TcpPhase to = TcpPhase::SlowStart;
  double W_before = 0.0;
  double W_after = 0.0;
  double Q_before = 0.0;
  double Q_after = 0.0;
  double Q_hat_before = 0.0;
  double Q_hat_after = 0.0;
  double ssthresh_after = 0.0;
};

struct HybridResult {
  // Channels: W, Q, Q_hat, phase, region, event. Every transition adds a
  // pre-event row (event 0) and a post-event row carrying the event code
  // (1 TD, 2 TO, 3 ssthresh crossing, 4 recovery done).
  TimeSeries series;
  std::vector<TransitionRecord> transitions;
  std::uint64_t loss_events = 0;
  std::uint64_t absorbed_losses = 0;  // losses during an ongoing fast recovery
};

double event_code(HybridEvent event) noexcept;

// Fixed-step RK4 for the continuous part; losses arrive as a Poisson process
// with intensity p(Q_hat) W / T on the linear RED branch, plus one forced loss
// on entering the forced-drop region and one per RTT while inside it.
HybridResult simulate_hybrid(const HybridParams& params, const HybridState& init, double t_end,
                             double dt, std::uint64_t seed, double sample_interval = 0.0);

}  // namespace redsim::hybrid
