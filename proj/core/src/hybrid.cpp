#include "redsim/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "redsim/errors.hpp"
#include "redsim/rng.hpp"

namespace redsim::hybrid {

std::string_view to_string(RedRegion region) noexcept {
  switch (region) {
    case RedRegion::NoDrop: return "no_drop";
    case RedRegion::Linear: return "linear";
    case RedRegion::ForcedDrop: return "forced_drop";
  }
  return "unknown";
}

std::string_view to_string(HybridEvent event) noexcept {
  switch (event) {
    case HybridEvent::TD: return "TD";
    case HybridEvent::TO: return "TO";
    case HybridEvent::SsThreshCross: return "ssthresh_cross";
    case HybridEvent::RecoveryDone: return "recovery_done";
  }
  return "unknown";
}

double event_code(HybridEvent event) noexcept {
  switch (event) {
    case HybridEvent::TD: return 1.0;
    case HybridEvent::TO: return 2.0;
    case HybridEvent::SsThreshCross: return 3.0;
    case HybridEvent::RecoveryDone: return 4.0;
  }
  return 0.0;
}

std::vector<std::string> HybridParams::violations() const {
  auto out = fluid.violations();
  if (!(w_to >= 2.0) || !std::isfinite(w_to)) out.emplace_back("hybrid.w_to must be >= 2");
  return out;
}

void HybridParams::validate() const {
  auto v = violations();
  if (!v.empty()) throw ConfigError(std::move(v));
}

RedRegion red_region(double q_hat, const RedParams& red) noexcept {
  if (q_hat <= red.q_min) return RedRegion::NoDrop;
  if (q_hat <= red.q_max) return RedRegion::Linear;
  return RedRegion::ForcedDrop;
}

double phase_dynamics(TcpPhase phase, const HybridState& state, const fluid::FluidParams& params) {
  const double T = fluid::rtt(state.Q, params);
  switch (phase) {
    case TcpPhase::SlowStart: return state.W / T;
    case TcpPhase::CongestionAvoidance: return 1.0 / T;
    case TcpPhase::FastRecovery: return 0.0;
  }
  return 0.0;
}

HybridState transition(const HybridState& state, HybridEvent event,
                       const fluid::FluidParams& params) {
  HybridState next = state;
  next.pending_event.reset();
  switch (event) {
    case HybridEvent::TD:
      if (state.phase == TcpPhase::FastRecovery) {
        throw TransitionError("TD is not applicable during fast recovery");
      }
      if (state.W < 2.0) throw TransitionError("TD would push the window below one packet");
      next.ssthresh = std::max(2.0, state.W / 2.0);
      next.W = state.W / 2.0;
      next.phase = TcpPhase::FastRecovery;
      next.recovery_until = state.t + fluid::rtt(state.Q, params);
      break;
    case HybridEvent::TO:
      next.ssthresh = std::max(2.0, state.W / 2.0);
      next.W = 1.0;
      next.phase = TcpPhase::SlowStart;
      break;
    case HybridEvent::SsThreshCross:
      if (state.phase != TcpPhase::SlowStart) {
        throw TransitionError("ssthresh crossing is only defined in slow start");
      }
      next.phase = TcpPhase::CongestionAvoidance;
      break;
    case HybridEvent::RecoveryDone:
      if (state.phase != TcpPhase::FastRecovery) {
        throw TransitionError("recovery completion is only defined in fast recovery");
      }
      next.phase = TcpPhase::CongestionAvoidance;
      break;
  }
  return next;
}

namespace {

struct Deriv {
  double W, Q, Q_hat;
};

Deriv derivative(const HybridState& s, const fluid::FluidParams& p) {
  const double T = fluid::rtt(s.Q, p);
  return {phase_dynamics(s.phase, s, p), p.n_flows * s.W / T - p.C, p.w_q * p.C * (s.Q - s.Q_hat)};
}

HybridState rk4(const HybridState& s, double h, const fluid::FluidParams& p) {
  auto shifted = [&](const Deriv& k, double a) {
    HybridState r = s;
    r.W += a * k.W;
    r.Q += a * k.Q;
    r.Q_hat += a * k.Q_hat;
    return r;
  };
  const Deriv k1 = derivative(s, p);
  const Deriv k2 = derivative(shifted(k1, h / 2), p);
  const Deriv k3 = derivative(shifted(k2, h / 2), p);
  const Deriv k4 = derivative(shifted(k3, h), p);
  HybridState n = s;
  n.t = s.t + h;
  n.W += h / 6.0 * (k1.W + 2 * k2.W + 2 * k3.W + k4.W);
  n.Q += h / 6.0 * (k1.Q + 2 * k2.Q + 2 * k3.Q + k4.Q);
  n.Q_hat += h / 6.0 * (k1.Q_hat + 2 * k2.Q_hat + 2 * k3.Q_hat + k4.Q_hat);
  if (!std::isfinite(n.W) || !std::isfinite(n.Q) || !std::isfinite(n.Q_hat)) {
    std::ostringstream os;
    os << "hybrid: non-finite state after t=" << s.t << " (W=" << s.W << ", Q=" << s.Q
       << ", Q_hat=" << s.Q_hat << ", phase=" << to_string(s.phase) << ")";
    throw IntegrationError(os.str());
  }
  n.W = std::max(n.W, 1.0);
  n.Q = std::clamp(n.Q, p.q_lower, p.q_upper);
  n.Q_hat = std::max(n.Q_hat, 0.0);
  return n;
}

// Linear interpolation between two states at fraction theta of the step.
HybridState lerp(const HybridState& a, const HybridState& b, double theta) {
  HybridState r = a;
  r.t = a.t + theta * (b.t - a.t);
  r.W = a.W + theta * (b.W - a.W);
  r.Q = a.Q + theta * (b.Q - a.Q);
  r.Q_hat = a.Q_hat + theta * (b.Q_hat - a.Q_hat);
  return r;
}

double phase_code(TcpPhase phase) {
  switch (phase) {
    case TcpPhase::SlowStart: return 0.0;
    case TcpPhase::CongestionAvoidance: return 1.0;
    case TcpPhase::FastRecovery: return 2.0;
  }
  return -1.0;
}

class Runner {
 public:
  Runner(const HybridParams& params, std::uint64_t seed)
      : p_(params), rng_(RandomStream::substream(seed, 0)) {
    result_.series = TimeSeries({"W", "Q", "Q_hat", "phase", "region", "event"});
    hazard_target_ = rng_.exponential();
  }

  HybridResult run(const HybridState& init, double t_end, double dt, double sample_interval) {
    s_ = init;
    check(s_);
    const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
    const std::size_t stride =
        sample_interval > 0.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(sample_interval / dt))) : 1;
    record(0.0);
    if (red_region(s_.Q_hat, p_.fluid.red) == RedRegion::ForcedDrop) enter_forced();

    for (std::size_t k = 1; k <= steps; ++k) {
      const double t_target = init.t + static_cast<double>(k) * dt;
      advance_to(t_target);
      s_.t = t_target;
      if (k % stride == 0) record(0.0);
    }
    return std::move(result_);
  }

 private:
  void check(const HybridState& s) const {
    std::ostringstream os;
    if (!(s.W >= 1.0)) os << "W < 1; ";
    if (s.phase == TcpPhase::SlowStart && s.W > s.ssthresh * (1.0 + 1e-12)) os << "slow start with W > ssthresh; ";
    if (!(s.Q >= p_.fluid.q_lower && s.Q <= p_.fluid.q_upper)) os << "Q outside bounds; ";
    if (!(s.Q_hat >= 0.0)) os << "Q_hat < 0; ";
    const std::string msg = os.str();
    if (!msg.empty()) {
      std::ostringstream dump;
      dump << "hybrid invariant violated (" << msg << ") at t=" << s.t << ": W=" << s.W << " Q=" << s.Q
           << " Q_hat=" << s.Q_hat << " ssthresh=" << s.ssthresh << " phase=" << to_string(s.phase);
      throw IntegrationError(dump.str());
    }
  }

  void record(double event) {
    result_.series.append(s_.t, {s_.W, s_.Q, s_.Q_hat, phase_code(s_.phase),
                                 static_cast<double>(static_cast<int>(red_region(s_.Q_hat, p_.fluid.red))),
                                 event});
  }

  void apply(HybridEvent event) {
    HybridState before = s_;
    before.pending_event = event;
    record(0.0);
    s_ = transition(before, event, p_.fluid);
    check(s_);
    result_.transitions.push_back({s_.t, event, before.phase, s_.phase, before.W, s_.W, before.Q, s_.Q,
                                   before.Q_hat, s_.Q_hat, s_.ssthresh});
    record(event_code(event));
  }

  void on_loss() {
    ++result_.loss_events;
    if (s_.phase == TcpPhase::FastRecovery) {
      ++result_.absorbed_losses;
      return;
    }
    apply(s_.W < p_.w_to ? HybridEvent::TO : HybridEvent::TD);
  }

  void enter_forced() {
    forced_active_ = true;
    on_loss();
    next_forced_ = s_.t + fluid::rtt(s_.Q, p_.fluid);
  }

  double poisson_rate(const HybridState& s) const {
    if (red_region(s.Q_hat, p_.fluid.red) != RedRegion::Linear) return 0.0;
    return drop_probability(s.Q_hat, p_.fluid.red) * s.W / fluid::rtt(s.Q, p_.fluid);
  }

  // Moves the state forward by h without any discrete boundary inside.
  void accept(const HybridState& next) {
    hazard_ += 0.5 * (poisson_rate(s_) + poisson_rate(next)) * (next.t - s_.t);
    s_ = next;
    check(s_);
    if (forced_active_ && red_region(s_.Q_hat, p_.fluid.red) != RedRegion::ForcedDrop) {
      forced_active_ = false;
      next_forced_ = std::numeric_limits<double>::infinity();
    }
    if (hazard_ >= hazard_target_) {
      hazard_ = 0.0;
      hazard_target_ = rng_.exponential();
      on_loss();
    }
  }

  void advance_to(double t_target) {
    const double eps = 1e-12 * std::max(1.0, std::abs(t_target));
    int guard = 0;
    while (s_.t < t_target - eps) {
      if (++guard > 10000) throw IntegrationError("hybrid: too many events inside one step");
      double h = t_target - s_.t;

      if (s_.phase == TcpPhase::FastRecovery && s_.recovery_until <= s_.t + h) {
        const double hr = s_.recovery_until - s_.t;
        if (hr > eps) accept(rk4(s_, hr, p_.fluid));
        if (s_.phase == TcpPhase::FastRecovery) apply(HybridEvent::RecoveryDone);
        continue;
      }
      if (forced_active_ && next_forced_ <= s_.t + h) {
        const double hf = next_forced_ - s_.t;
        if (hf > eps) accept(rk4(s_, hf, p_.fluid));
        if (forced_active_) {
          on_loss();
          next_forced_ = s_.t + fluid::rtt(s_.Q, p_.fluid);
        }
        continue;
      }

      const HybridState trial = rk4(s_, h, p_.fluid);

      if (s_.phase == TcpPhase::SlowStart && trial.W >= s_.ssthresh) {
        const double theta = (s_.ssthresh - s_.W) / (trial.W - s_.W);
        HybridState cross = lerp(s_, trial, std::clamp(theta, 0.0, 1.0));
        cross.W = s_.ssthresh;
        accept(cross);
        if (s_.phase == TcpPhase::SlowStart && s_.W >= s_.ssthresh) apply(HybridEvent::SsThreshCross);
        continue;
      }

      const double q_max = p_.fluid.red.q_max;
      if (!forced_active_ && s_.Q_hat <= q_max && trial.Q_hat > q_max) {
        const double theta = (q_max - s_.Q_hat) / (trial.Q_hat - s_.Q_hat);
        // Land just past the boundary so the region reads ForcedDrop.
        HybridState cross = lerp(s_, trial, std::clamp(theta, 0.0, 1.0));
        cross.Q_hat = std::nextafter(q_max, std::numeric_limits<double>::infinity());
        accept(cross);
        if (!forced_active_ && red_region(s_.Q_hat, p_.fluid.red) == RedRegion::ForcedDrop) enter_forced();
        continue;
      }

      accept(trial);
    }
  }

  const HybridParams& p_;
  RandomStream rng_;
  HybridState s_;
  HybridResult result_;
  double hazard_ = 0.0;
  double hazard_target_ = 0.0;
  bool forced_active_ = false;
  double next_forced_ = std::numeric_limits<double>::infinity();
};

}  // namespace

HybridResult simulate_hybrid(const HybridParams& params, const HybridState& init, double t_end,
                             double dt, std::uint64_t seed, double sample_interval) {
  params.validate();
  if (!(dt > 0.0) || !(t_end > 0.0)) throw ConfigError("hybrid: dt and t_end must be > 0");
  Runner runner(params, seed);
  return runner.run(init, t_end, dt, sample_interval);
}

}  // namespace redsim::hybrid
