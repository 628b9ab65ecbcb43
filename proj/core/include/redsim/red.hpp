#pragma once

#include <string>
#include <vector>

#include "redsim/rng.hpp"

namespace redsim {

// Classic RED configuration. Queue lengths are in packets and real-valued so
// that fluid models can share the same drop function as the packet simulator.
struct RedParams {
  double q_min = 5.0;
  double q_max = 15.0;
  double p_max = 0.1;
  double w_q = 0.002;

  // Human-readable invariant violations; empty when the parameters are valid.
  std::vector<std::string> violations() const;
  // Throws ConfigError listing every violation.
  void validate() const;

  friend bool operator==(const RedParams&, const RedParams&) = default;
};

struct QueueObservation {
  double q = 0.0;
  double q_hat = 0.0;
};

// EWMA weight for a link serving `capacity` packets per second:
// w_q = 1 - exp(-1/C).
double ewma_weight(double capacity);

// One step of the EWMA recurrence q_hat' = (1 - w_q) q_hat + w_q q.
double ewma_update(double q_hat, double q, double w_q);

// Drop function: 0 up to q_min, linear ramp to p_max at q_max, then 1.
// Both thresholds are inclusive on the lower branch.
double drop_probability(double q_hat, const RedParams& params) noexcept;

// Bernoulli realization of a drop probability. Consumes exactly one uniform
// draw from `rng`, including for p = 0 and p = 1, so stream positions do not
// depend on the queue state.
bool drop_decision(double p, RandomStream& rng);

}  // namespace redsim
