#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "redsim/moments.hpp"

using namespace redsim;
using namespace redsim::moments;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

FluidParams single() {
  FluidParams p;
  p.C = 100.0;
  p.T_p = 0.1;
  p.red = RedParams{5, 15, 0.1, ewma_weight(100.0)};
  p.w_q = p.red.w_q;
  p.q_upper = 50.0;
  p.n_flows = 1;
  return p;
}

// Independent root of (10 + Q)^2 (Q - 5) = 200 by bisection.
double bisection_oracle() {
  double lo = 5.0;
  double hi = 15.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double g = (10.0 + mid) * (10.0 + mid) * (mid - 5.0) - 200.0;
    (g > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("rhs examples", "[moments]") {
  const auto p = single();
  const auto free = rhs({0, 3, 2, 1}, p);
  CHECK_THAT(free[0], WithinAbs(1.0 / 0.12, 1e-12));

  const auto r = rhs({0, 15, 10, 10}, p);
  CHECK_THAT(r[0], WithinAbs(-23.125, 1e-12));
  CHECK_THAT(r[1], WithinAbs(-25.0, 1e-12));
  CHECK(r[2] == 0.0);
}

TEST_CASE("rhs vanishes on the algebraic fixed-point conditions", "[moments]") {
  const auto p = single();
  const double q = bisection_oracle();
  const double w = 100.0 * (0.1 + q / 100.0);
  CHECK_THAT(w * w * drop_probability(q, p.red), WithinAbs(2.0, 1e-9));
  const auto r = rhs({0, w, q, q}, p);
  for (double v : r) CHECK_THAT(v, WithinAbs(0.0, 1e-9));
}

TEST_CASE("reference fixed point matches the bisection oracle", "[moments]") {
  const auto p = single();
  const auto eq = fixed_point(p);
  const double q = bisection_oracle();
  CHECK_THAT(eq.Q, WithinAbs(q, 1e-8));
  CHECK_THAT(eq.Q, WithinAbs(5.80, 0.005));
  CHECK_THAT(eq.W, WithinAbs(15.80, 0.005));
  CHECK(eq.Q_hat == eq.Q);
  CHECK(eq.residual <= 1e-10);
  CHECK(eq.branch == RedBranch::Linear);
  CHECK_THAT((10.0 + eq.Q) * (10.0 + eq.Q) * (eq.Q - 5.0), WithinAbs(200.0, 1e-8));
  CHECK_THAT(equilibrium_gap(eq.Q, p), WithinAbs(0.0, 1e-8));
  const auto r = rhs({0, eq.W, eq.Q, eq.Q_hat}, p);
  for (double v : r) CHECK(std::abs(v) <= 1e-10);
}

TEST_CASE("aggregate of several flows", "[moments]") {
  auto p = single();
  p.n_flows = 4;
  const auto eq = fixed_point(p);
  CHECK(eq.residual <= 1e-10);
  // N W = C T and W^2 p = 2
  CHECK_THAT(4.0 * eq.W, WithinRel(100.0 * (0.1 + eq.Q / 100.0), 1e-10));
  CHECK_THAT(eq.W * eq.W * drop_probability(eq.Q, p.red), WithinAbs(2.0, 1e-9));
}

TEST_CASE("high-drop regime keeps W* above sqrt 2", "[moments]") {
  auto p = single();
  p.red = RedParams{0.0, 15.0, 1.0, p.w_q};
  const auto eq = fixed_point(p);
  CHECK(eq.W >= std::sqrt(2.0));
  CHECK_THAT(eq.W * eq.W * drop_probability(eq.Q, p.red), WithinAbs(2.0, 1e-9));
  CHECK(eq.residual <= 1e-10);
}

TEST_CASE("no equilibrium raises a solver error", "[moments]") {
  auto p = single();
  p.red = RedParams{0.5, 1.0, 0.001, p.w_q};
  CHECK_THROWS_AS(fixed_point(p), SolverError);
}

TEST_CASE("integration from equilibrium stays put", "[moments]") {
  const auto p = single();
  const auto eq = fixed_point(p);
  const auto s = integrate(p, {0, eq.W, eq.Q, eq.Q_hat}, 10.0, 1e-3, 0.5);
  for (double w : s.channel("W")) CHECK_THAT(w, WithinAbs(eq.W, 1e-9));
  for (double q : s.channel("Q")) CHECK_THAT(q, WithinAbs(eq.Q, 1e-9));
}

TEST_CASE("integration converges to the fixed point", "[moments]") {
  const auto p = single();
  const auto eq = fixed_point(p);
  const auto s = integrate(p, {0, 1, 0, 0}, 60.0, 1e-3, 0.1);
  CHECK_THAT(s.channel("W").back(), WithinRel(eq.W, 1e-4));
  CHECK_THAT(s.channel("Q").back(), WithinRel(eq.Q, 1e-4));
  CHECK_THAT(s.channel("Q_hat").back(), WithinRel(eq.Q_hat, 1e-4));
  CHECK_THAT(s.end_time(), WithinAbs(60.0, 1e-9));
}

TEST_CASE("RK4 is fourth order on a smooth stretch", "[moments]") {
  const auto p = single();
  auto end = [&](double dt) {
    const auto s = integrate(p, {0, 14, 7, 6.5}, 2.0, dt);
    return std::array<double, 3>{s.channel("W").back(), s.channel("Q").back(), s.channel("Q_hat").back()};
  };
  const auto a = end(0.02);
  const auto b = end(0.01);
  const auto c = end(0.005);
  double e1 = 0;
  double e2 = 0;
  for (int i = 0; i < 3; ++i) {
    e1 = std::max(e1, std::abs(a[i] - b[i]));
    e2 = std::max(e2, std::abs(b[i] - c[i]));
  }
  const double ratio = e1 / e2;
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("EWMA mean lags the queue at rate w_q C", "[moments]") {
  // W stays below C*T_p for the first half second, so Q is pinned at 0 and
  // Q_hat decays as 5 exp(-w_q C t).
  const auto p = single();
  const auto s = integrate(p, {0, 1, 0, 5}, 0.5, 1e-4, 0.1);
  const auto t = s.time();
  const auto qh = s.channel("Q_hat");
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s.channel("Q")[i] == 0.0);
    CHECK_THAT(qh[i], WithinRel(5.0 * std::exp(-p.w_q * p.C * t[i]), 1e-3));
  }
}

TEST_CASE("equilibrium json", "[moments]") {
  std::ostringstream os;
  write_equilibrium_json(os, fixed_point(single()));
  CHECK(os.str().find("\"branch\": \"linear\"") != std::string::npos);
}
