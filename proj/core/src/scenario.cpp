#include "redsim/scenario.hpp"

#include <cmath>

namespace redsim {

RedParams Scenario::effective_red() const {
  RedParams r = red;
  if (w_q_auto && capacity > 0.0 && std::isfinite(capacity)) r.w_q = ewma_weight(capacity);
  return r;
}

std::vector<std::string> Scenario::violations() const {
  std::vector<std::string> out;
  if (!(capacity > 0.0) || !std::isfinite(capacity)) out.emplace_back("network.capacity must be > 0");
  if (!(prop_delay > 0.0) || !std::isfinite(prop_delay)) out.emplace_back("network.prop_delay must be > 0");
  if (n_flows < 1) out.emplace_back("network.n_flows must be >= 1");
  if (buffer < 1) out.emplace_back("network.buffer must be >= 1");
  for (auto& v : effective_red().violations()) out.push_back(std::move(v));
  return out;
}

fluid::FluidParams Scenario::fluid_params() const {
  fluid::FluidParams p;
  p.red = effective_red();
  p.w_q = p.red.w_q;
  p.C = capacity;
  p.T_p = rtt_prop();
  p.q_lower = 0.0;
  p.q_upper = static_cast<double>(buffer);
  p.n_flows = n_flows;
  return p;
}

hybrid::HybridParams Scenario::hybrid_params() const {
  hybrid::HybridParams h;
  h.fluid = fluid_params();
  return h;
}

des::DesConfig Scenario::des_config(double duration, std::uint64_t seed, double sample_interval) const {
  des::DesConfig c;
  c.n_flows = n_flows;
  c.link_capacity = capacity;
  c.prop_delay = prop_delay;
  c.buffer_capacity = buffer;
  c.red = effective_red();
  c.sim_duration = duration;
  c.seed = seed;
  c.sample_interval = sample_interval;
  return c;
}

Scenario reference_scenario() { return Scenario{}; }

}  // namespace redsim
