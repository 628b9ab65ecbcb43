#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <numbers>

#include "redsim/errors.hpp"
#include "redsim/oscillation.hpp"
#include "redsim/rng.hpp"

using namespace redsim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

TimeSeries sampled(double duration, double dt, const std::function<double(double)>& f) {
  TimeSeries s({"v"});
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) * dt;
    s.append(t, {f(t)});
  }
  return s;
}

}  // namespace

TEST_CASE("pure sine", "[oscillation]") {
  const auto s = sampled(60, 0.01, [](double t) { return 3.0 + std::sin(2.0 * std::numbers::pi * t / 2.0); });
  const auto r = detect_oscillation(s, "v");
  CHECK(r.detected);
  CHECK_THAT(r.dominant_period, WithinRel(2.0, 0.02));
  CHECK_THAT(r.amplitude, WithinRel(1.0, 0.05));
  CHECK(r.spectral_peak_ratio > 100.0);
}

TEST_CASE("sine with noise", "[oscillation]") {
  RandomStream rng(5);
  const auto s = sampled(60, 0.01, [&](double t) { return 2.0 * std::sin(2.0 * std::numbers::pi * t / 3.0) + 0.5 * rng.normal(); });
  const auto r = detect_oscillation(s, "v");
  CHECK(r.detected);
  CHECK_THAT(r.dominant_period, WithinRel(3.0, 0.03));
  CHECK_THAT(r.amplitude, WithinRel(2.0, 0.1));
}

TEST_CASE("no oscillation in flat or white signals", "[oscillation]") {
  CHECK_FALSE(detect_oscillation(sampled(60, 0.01, [](double) { return 4.0; }), "v").detected);
  RandomStream rng(11);
  CHECK_FALSE(detect_oscillation(sampled(60, 0.01, [&](double) { return rng.normal(); }), "v").detected);
}

TEST_CASE("cutoff and irregular sampling", "[oscillation]") {
  TimeSeries s({"v"});
  RandomStream rng(2);
  double t = 0;
  while (t < 80) {
    s.append(t, {t < 20 ? 50.0 : std::sin(2.0 * std::numbers::pi * t / 4.0)});
    t += rng.uniform(0.01, 0.03);
  }
  OscillationOptions opt;
  opt.cutoff = 20;
  const auto r = detect_oscillation(s, "v", opt);
  CHECK(r.detected);
  CHECK_THAT(r.dominant_period, WithinRel(4.0, 0.03));
}

TEST_CASE("too few samples", "[oscillation]") {
  CHECK_THROWS_AS(detect_oscillation(sampled(0.62, 0.01, [](double t) { return t; }), "v"), DataError);
  CHECK_THROWS_AS(detect_oscillation(sampled(60, 0.01, [](double t) { return t; }), "w"), DataError);
}
