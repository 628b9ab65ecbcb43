#include "redsim/moments.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>
#include <json.hpp>

#include "redsim/errors.hpp"

namespace redsim::moments {

std::string_view to_string(RedBranch branch) noexcept {
  switch (branch) {
    case RedBranch::NoDrop: return "no_drop";
    case RedBranch::Linear: return "linear";
    case RedBranch::ForcedDrop: return "forced_drop";
  }
  return "unknown";
}

namespace {

// Drop probability used inside the solver: one branch's formula extended
// over the whole axis so the Newton iteration sees a smooth function.
double branch_probability(double q_hat, const RedParams& red, RedBranch branch) {
  switch (branch) {
    case RedBranch::NoDrop: return 0.0;
    case RedBranch::Linear: return (q_hat - red.q_min) / (red.q_max - red.q_min) * red.p_max;
    case RedBranch::ForcedDrop: return 1.0;
  }
  return 0.0;
}

std::array<double, 3> rhs_with_p(double W, double Q, double Q_hat, double p,
                                 const FluidParams& params) {
  const double T = fluid::rtt(Q, params);
  const double lambda = params.constant_lambda ? *params.constant_lambda : p * W / T;
  return {1.0 / T - 0.5 * W * lambda, params.n_flows * W / T - params.C,
          params.w_q * params.C * (Q - Q_hat)};
}

double max_norm(const std::array<double, 3>& v) {
  return std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])});
}

MomentState clamp_state(MomentState s, const FluidParams& params) {
  s.W = std::max(s.W, params.w_floor);
  s.Q = std::clamp(s.Q, params.q_lower, params.q_upper);
  s.Q_hat = std::max(s.Q_hat, 0.0);
  return s;
}

Equilibrium newton(const FluidParams& params, const MomentState& guess, RedBranch branch,
                   const SolverOptions& opt) {
  std::array<double, 3> x{guess.W, guess.Q, guess.Q_hat};
  auto F = [&](const std::array<double, 3>& v) {
    return rhs_with_p(v[0], v[1], v[2], branch_probability(v[2], params.red, branch), params);
  };
  Equilibrium eq;
  eq.branch = branch;
  std::array<double, 3> f = F(x);
  double norm = max_norm(f);
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (norm <= opt.tolerance) {
      eq = {x[0], x[1], x[2], norm, branch, it};
      return eq;
    }
    Eigen::Matrix3d J;
    for (int j = 0; j < 3; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
      auto xp = x;
      auto xm = x;
      xp[j] += h;
      xm[j] -= h;
      const auto fp = F(xp);
      const auto fm = F(xm);
      for (int i = 0; i < 3; ++i) J(i, j) = (fp[i] - fm[i]) / (2.0 * h);
    }
    const Eigen::Vector3d rhs_vec(-f[0], -f[1], -f[2]);
    const Eigen::Vector3d step = J.fullPivLu().solve(rhs_vec);
    if (!step.allFinite()) break;

    // Backtracking: halve the step until the residual decreases and the
    // iterate stays physical (W > 0, T > 0).
    double alpha = 1.0;
    bool accepted = false;
    for (int k = 0; k < 40; ++k) {
      std::array<double, 3> trial{x[0] + alpha * step[0], x[1] + alpha * step[1], x[2] + alpha * step[2]};
      if (trial[0] > 0.0 && fluid::rtt(trial[1], params) > 0.0) {
        const auto ft = F(trial);
        const double nt = max_norm(ft);
        if (std::isfinite(nt) && nt < norm) {
          x = trial;
          f = ft;
          norm = nt;
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    eq = {x[0], x[1], x[2], norm, branch, it + 1};
    if (!accepted) break;
  }
  if (norm <= opt.tolerance) {
    eq = {x[0], x[1], x[2], norm, branch, eq.iterations};
    return eq;
  }
  throw SolverError("fixed_point: no convergence on the " + std::string(to_string(branch)) +
                        " branch (residual " + std::to_string(norm) + ")",
                    {x[0], x[1], x[2], norm, branch, opt.max_iterations});
}

RedBranch branch_of(double q_hat, const RedParams& red) {
  if (q_hat <= red.q_min) return RedBranch::NoDrop;
  if (q_hat <= red.q_max) return RedBranch::Linear;
  return RedBranch::ForcedDrop;
}

}  // namespace

std::array<double, 3> rhs(const MomentState& s, const FluidParams& params) {
  return rhs_with_p(s.W, s.Q, s.Q_hat, drop_probability(s.Q_hat, params.red), params);
}

TimeSeries integrate(const FluidParams& params, const MomentState& init, double t_end, double dt,
                     double sample_interval) {
  params.validate();
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("moments.integrate: dt must be > 0");
  if (!(t_end > 0.0)) throw ConfigError("moments.integrate: t_end must be > 0");
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  const std::size_t stride =
      sample_interval > 0.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(sample_interval / dt))) : 1;

  TimeSeries ts({"W", "Q", "Q_hat"});
  ts.reserve(steps / stride + 1);
  MomentState s = init;
  ts.append(s.t, {s.W, s.Q, s.Q_hat});
  auto shifted = [](const MomentState& s0, const std::array<double, 3>& k, double h) {
    MomentState r = s0;
    r.W += h * k[0];
    r.Q += h * k[1];
    r.Q_hat += h * k[2];
    return r;
  };
  for (std::size_t n = 1; n <= steps; ++n) {
    const auto k1 = rhs(s, params);
    const auto k2 = rhs(shifted(s, k1, dt / 2), params);
    const auto k3 = rhs(shifted(s, k2, dt / 2), params);
    const auto k4 = rhs(shifted(s, k3, dt), params);
    MomentState next = s;
    next.W += dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
    next.Q += dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    next.Q_hat += dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
    next.t = init.t + static_cast<double>(n) * dt;
    if (!std::isfinite(next.W) || !std::isfinite(next.Q) || !std::isfinite(next.Q_hat)) {
      throw IntegrationError("moments.integrate: non-finite state at t=" + std::to_string(s.t));
    }
    s = clamp_state(next, params);
    if (n % stride == 0) ts.append(s.t, {s.W, s.Q, s.Q_hat});
  }
  return ts;
}

Equilibrium fixed_point(const FluidParams& params, const MomentState& guess,
                        const SolverOptions& options) {
  params.validate();
  Equilibrium eq = newton(params, guess, RedBranch::Linear, options);
  const RedBranch landed = branch_of(eq.Q_hat, params.red);
  if (landed == RedBranch::Linear) return eq;
  if (landed == RedBranch::NoDrop) {
    throw SolverError("fixed_point: linear-branch root Q*=" + std::to_string(eq.Q) +
                          " lies in the no_drop branch, where the window grows without bound",
                      eq);
  }
  MomentState forced_guess = guess;
  forced_guess.W = std::sqrt(2.0);
  forced_guess.Q = forced_guess.Q_hat = std::max(params.red.q_max + 1.0, eq.Q);
  Equilibrium forced = newton(params, forced_guess, RedBranch::ForcedDrop, options);
  if (branch_of(forced.Q_hat, params.red) != RedBranch::ForcedDrop) {
    throw SolverError("fixed_point: no equilibrium; the mean queue settles on the RED discontinuity at q_max",
                      forced);
  }
  return forced;
}

Equilibrium fixed_point(const FluidParams& params) {
  MomentState guess;
  guess.Q = guess.Q_hat = 0.5 * (params.red.q_min + params.red.q_max);
  guess.W = params.C * fluid::rtt(guess.Q, params) / params.n_flows;
  return fixed_point(params, guess);
}

double equilibrium_gap(double Q, const FluidParams& params) {
  const double W = params.C * fluid::rtt(Q, params) / params.n_flows;
  return W * W * branch_probability(Q, params.red, RedBranch::Linear) - 2.0;
}

void write_equilibrium_json(std::ostream& os, const Equilibrium& eq) {
  nlohmann::ordered_json j;
  j["W"] = eq.W;
  j["Q"] = eq.Q;
  j["Q_hat"] = eq.Q_hat;
  j["residual"] = eq.residual;
  j["branch"] = std::string(to_string(eq.branch));
  j["iterations"] = eq.iterations;
  os << j.dump(2) << '\n';
}

}  // namespace redsim::moments
