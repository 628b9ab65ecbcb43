#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "redsim/des.hpp"
#include "redsim/fluid.hpp"
#include "redsim/hybrid.hpp"
#include "redsim/red.hpp"

namespace redsim {

// Physical parameters shared by every model of the dumbbell.
struct Scenario {
  RedParams red{};
  // When set, red.w_q is derived from the link capacity (1 - exp(-1/C)).
  bool w_q_auto = true;
  double capacity = 100.0;    // C, packets/s
  double prop_delay = 0.05;   // one-way, s; round-trip propagation T_p = 2 * prop_delay
  int n_flows = 4;
  std::uint64_t buffer = 50;  // packets

  double rtt_prop() const noexcept { return 2.0 * prop_delay; }
  RedParams effective_red() const;
  std::vector<std::string> violations() const;

  fluid::FluidParams fluid_params() const;
  hybrid::HybridParams hybrid_params() const;
  des::DesConfig des_config(double duration, std::uint64_t seed, double sample_interval) const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// N=4 Reno flows, C=100 pkt/s, 0.1 s round-trip propagation, RED(5, 15, 0.1),
// 50-packet buffer.
Scenario reference_scenario();

}  // namespace redsim
