#pragma once

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

#include "redsim/fluid.hpp"
#include "redsim/time_series.hpp"

namespace redsim::moments {

using fluid::FluidParams;

// Means of (W, Q, Q_hat) under the first-moment closure E[f(X)] ~ f(E[X]).
struct MomentState {
  double t = 0.0;
  double W = 1.0;
  double Q = 0.0;
  double Q_hat = 0.0;
};

enum class RedBranch { NoDrop, Linear, ForcedDrop };
std::string_view to_string(RedBranch branch) noexcept;

struct Equilibrium {
  double W = 0.0;
  double Q = 0.0;
  double Q_hat = 0.0;
  double residual = 0.0;  // max-norm of rhs at the point
  RedBranch branch = RedBranch::Linear;
  int iterations = 0;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, Equilibrium last)
      : std::runtime_error(what), last_(last) {}
  const Equilibrium& last_iterate() const noexcept { return last_; }

 private:
  Equilibrium last_;
};

// (dW/dt, dQ/dt, dQ_hat/dt) = (1/T - (W/2) lambda, N W/T - C, w_q C (Q - Q_hat))
// with lambda = p(Q_hat) W / T and T = T_p + Q/C.
std::array<double, 3> rhs(const MomentState& state, const FluidParams& params);

// Classic fixed-step RK4 with the fluid clamps applied after every step.
// Channels: W, Q, Q_hat.
TimeSeries integrate(const FluidParams& params, const MomentState& init, double t_end, double dt,
                     double sample_interval = 0.0);

struct SolverOptions {
  double tolerance = 1e-10;
  int max_iterations = 100;
};

// Damped Newton on rhs = 0 with a central-difference Jacobian. The search
// runs on the linear RED branch; a root outside (q_min, q_max] is re-solved
// with that branch's drop probability, and branches without an equilibrium
// raise SolverError naming the branch.
Equilibrium fixed_point(const FluidParams& params, const MomentState& initial_guess,
                        const SolverOptions& options = {});
Equilibrium fixed_point(const FluidParams& params);

// Scalar reduction of the equilibrium conditions on the linear branch:
// g(Q) = (C T(Q) / N)^2 p(Q) - 2.
double equilibrium_gap(double Q, const FluidParams& params);

void write_equilibrium_json(std::ostream& os, const Equilibrium& eq);

}  // namespace redsim::moments
