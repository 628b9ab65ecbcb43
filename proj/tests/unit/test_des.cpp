#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "redsim/des.hpp"
#include "redsim/errors.hpp"
#include "redsim/scenario.hpp"

using namespace redsim;
using namespace redsim::des;
using Catch::Matchers::WithinAbs;

namespace {

DesConfig reference(double duration = 60.0, std::uint64_t seed = 1) {
  auto c = reference_scenario().des_config(duration, seed, 0.1);
  c.record_event_log = true;
  return c;
}

}  // namespace

TEST_CASE("admission below q_min always accepts", "[des]") {
  RedQueue q;
  q.capacity = 50;
  RandomStream rng(1);
  const RedParams red{5, 15, 0.1, 0.002};
  for (std::uint64_t i = 0; i < 5; ++i) {
    CHECK(enqueue_arrival(q, {0, i, 0.0}, red, rng) == EnqueueOutcome::Accepted);
  }
  CHECK(q.length() == 5);
  CHECK(q.q_hat <= 5.0);
}

TEST_CASE("admission above q_max always drops", "[des]") {
  RedQueue q;
  q.capacity = 50;
  q.q_hat = 100.0;
  RandomStream rng(2);
  const RedParams red{5, 15, 0.1, 0.002};
  for (std::uint64_t i = 0; i < 20; ++i) {
    CHECK(enqueue_arrival(q, {0, i, 0.0}, red, rng) == EnqueueOutcome::DroppedRed);
  }
  CHECK(q.length() == 0);
}

TEST_CASE("full buffer tail-drops when RED would accept", "[des]") {
  RedQueue q;
  q.capacity = 3;
  RandomStream rng(3);
  const RedParams red{100, 200, 0.1, 0.002};
  for (std::uint64_t i = 0; i < 3; ++i) REQUIRE(enqueue_arrival(q, {0, i, 0.0}, red, rng) == EnqueueOutcome::Accepted);
  CHECK(enqueue_arrival(q, {0, 3, 0.0}, red, rng) == EnqueueOutcome::DroppedTail);
  CHECK(q.length() == 3);
}

TEST_CASE("ewma uses the pre-enqueue length", "[des]") {
  RedQueue q;
  q.capacity = 10;
  RandomStream rng(4);
  const RedParams red{5, 15, 0.1, 0.5};
  enqueue_arrival(q, {0, 0, 0.0}, red, rng);
  CHECK(q.q_hat == 0.0);
  enqueue_arrival(q, {0, 1, 0.0}, red, rng);
  CHECK(q.q_hat == 0.5);
}

TEST_CASE("service timing", "[des]") {
  RedQueue q;
  q.capacity = 10;
  q.packets = {{0, 0, 0.0}, {1, 0, 0.0}};
  auto d = service_complete(q, 100.0, 0.05, 1.0);
  CHECK(d.packet.flow_id == 0);
  CHECK_THAT(*d.next_service - 1.0, WithinAbs(0.01, 1e-15));
  CHECK_THAT(d.sink_arrival, WithinAbs(1.05, 1e-15));
  CHECK_THAT(d.ack_arrival, WithinAbs(1.10, 1e-15));
  d = service_complete(q, 100.0, 0.05, 1.01);
  CHECK_FALSE(d.next_service.has_value());
  CHECK(q.length() == 0);
}

TEST_CASE("single packet delay composition", "[des]") {
  // A lone packet arriving at t finishes service at t + 1/C and reaches the
  // sink prop_delay later.
  RedQueue q;
  q.capacity = 10;
  q.packets = {{0, 0, 2.0}};
  const double t = 2.0;
  const auto d = service_complete(q, 100.0, 0.05, t + 1.0 / 100.0);
  CHECK_THAT(d.sink_arrival, WithinAbs(t + 0.01 + 0.05, 1e-15));
}

TEST_CASE("event order is (time, kind, flow, seq)", "[des]") {
  SimEvent a{1.0, EventKind::ServiceComplete, 3, 9};
  SimEvent b{1.0, EventKind::AckArrivalAtSource, 0, 0};
  SimEvent c{0.5, EventKind::Sample, 9, 9};
  SimEvent d{1.0, EventKind::ServiceComplete, 3, 10};
  CHECK(event_before(c, a));
  CHECK(event_before(a, b));
  CHECK(event_before(a, d));
  CHECK_FALSE(event_before(b, a));
}

TEST_CASE("config validation", "[des]") {
  DesConfig c;
  CHECK(c.violations().empty());
  c.n_flows = 0;
  c.link_capacity = -1;
  c.red.q_max = 1;
  CHECK(c.violations().size() >= 3);
  CHECK_THROWS_AS(simulate_dumbbell(c), ConfigError);
  DesConfig small;
  small.buffer_capacity = 10;
  CHECK_FALSE(small.warnings().empty());
}

TEST_CASE("loss-free single flow conserves packets", "[des]") {
  DesConfig c;
  c.n_flows = 1;
  c.link_capacity = 1e5;
  c.buffer_capacity = 100000;
  c.red = RedParams{1e6, 2e6, 1e-9, 0.002};
  c.sim_duration = 5.0;
  c.initial_ssthresh = 16;
  const auto r = simulate_dumbbell(c);
  CHECK(r.summary.dropped_red == 0);
  CHECK(r.summary.dropped_tail == 0);
  CHECK(r.summary.delivered == r.summary.sent - r.summary.resident);
  CHECK(r.summary.sent > 0);
}

TEST_CASE("reference run invariants", "[des]") {
  const auto cfg = reference();
  const auto r = simulate_dumbbell(cfg);
  const auto& s = r.summary;
  CHECK(s.conserves());
  CHECK(s.sent == s.delivered + s.dropped_red + s.dropped_tail + s.resident);
  CHECK(s.resident == r.resident_from_state);
  CHECK(s.dropped_red > 0);
  CHECK(r.max_queue <= cfg.buffer_capacity);
  CHECK(collect_metrics(r.log).sent == s.sent);

  double last_t = 0.0;
  double q = 0.0;
  double q_hat = 0.0;
  std::size_t arrivals = 0;
  for (const auto& rec : r.log) {
    REQUIRE(rec.t >= last_t);
    REQUIRE(rec.q <= cfg.buffer_capacity);
    last_t = rec.t;
    const bool arrival =
        rec.kind == LogKind::Accept || rec.kind == LogKind::DropRed || rec.kind == LogKind::DropTail;
    if (arrival) {
      // replay the EWMA over the pre-arrival queue lengths
      const double q_pre = rec.kind == LogKind::Accept ? static_cast<double>(rec.q) - 1.0 : q;
      q_hat = (1.0 - cfg.red.w_q) * q_hat + cfg.red.w_q * q_pre;
      REQUIRE_THAT(rec.q_hat, WithinAbs(q_hat, 1e-9));
      ++arrivals;
    }
    if (rec.kind == LogKind::Accept || rec.kind == LogKind::Depart) q = static_cast<double>(rec.q);
  }
  CHECK(arrivals <= s.sent);
  CHECK(arrivals >= s.delivered + s.dropped_red + s.dropped_tail);
  CHECK(r.log.back().kind == LogKind::End);
}

TEST_CASE("series channels", "[des]") {
  const auto r = simulate_dumbbell(reference(5.0));
  const auto& names = r.series.channel_names();
  const std::vector<std::string> expected{"q", "q_hat", "p", "cwnd_0", "cwnd_1", "cwnd_2", "cwnd_3",
                                          "drops_red_cum", "drops_tail_cum"};
  CHECK(names == expected);
  CHECK(r.series.size() >= 50);
}

TEST_CASE("identical seeds replay identically", "[des][determinism]") {
  const auto a = simulate_dumbbell(reference(20.0, 9));
  const auto b = simulate_dumbbell(reference(20.0, 9));
  CHECK(a.log == b.log);
  CHECK(a.series == b.series);
  const auto c = simulate_dumbbell(reference(20.0, 10));
  CHECK_FALSE(a.log == c.log);
}

TEST_CASE("no RED drops when the ramp is unreachable", "[des]") {
  auto cfg = reference(20.0);
  cfg.red = RedParams{1e6, 2e6, 0.5, cfg.red.w_q};
  cfg.buffer_capacity = 1000000;
  const auto r = simulate_dumbbell(cfg);
  CHECK(r.summary.dropped_red == 0);
  CHECK(r.summary.dropped_tail == 0);
  CHECK(r.summary.conserves());
}

TEST_CASE("metrics from logs", "[des]") {
  CHECK(collect_metrics({}).sent == 0);
  CHECK(collect_metrics({}).mean_q == 0.0);

  std::vector<LogRecord> ten;
  for (std::uint64_t i = 0; i < 10; ++i) ten.push_back({0.1 * i, LogKind::Send, 0, i, 0, 0, 0});
  for (std::uint64_t i = 0; i < 10; ++i) ten.push_back({1.0 + 0.1 * i, LogKind::Accept, 0, i, 1, 0, 0});
  for (std::uint64_t i = 0; i < 10; ++i) ten.push_back({1.0 + 0.1 * i + 0.01, LogKind::Depart, 0, i, 0, 0, 0});
  for (std::uint64_t i = 0; i < 10; ++i) ten.push_back({3.0 + 0.1 * i, LogKind::Deliver, 0, i, 0, 0, 0});
  std::stable_sort(ten.begin(), ten.end(), [](const LogRecord& a, const LogRecord& b) { return a.t < b.t; });
  ten.push_back({5.0, LogKind::End, 0, 0, 0, 0, 0});
  const auto m = collect_metrics(ten);
  CHECK(m.drop_fraction == 0.0);
  CHECK(m.delivered == 10);
  CHECK(m.resident == 0);

  const std::vector<LogRecord> log{
      {0.0, LogKind::Send, 0, 0, 0, 0.0, 0},     {0.0, LogKind::Send, 0, 1, 0, 0.0, 0},
      {0.0, LogKind::Send, 0, 2, 0, 0.0, 0},     {0.0, LogKind::Accept, 0, 0, 1, 0.0, 0},
      {0.1, LogKind::DropRed, 0, 1, 1, 1.0, 0},  {0.2, LogKind::DropTail, 0, 2, 1, 1.0, 0},
      {0.5, LogKind::Depart, 0, 0, 0, 1.0, 0},   {0.55, LogKind::Deliver, 0, 0, 0, 1.0, 0},
      {0.6, LogKind::Ack, 0, 1, 0, 1.0, 0.6},    {1.0, LogKind::End, 0, 0, 0, 1.0, 0},
  };
  const auto s = collect_metrics(log);
  CHECK(s.sent == 3);
  CHECK(s.dropped_red == 1);
  CHECK(s.dropped_tail == 1);
  CHECK(s.delivered == 1);
  CHECK(s.resident == 0);
  CHECK(s.conserves());
  CHECK_THAT(s.mean_q, WithinAbs(0.5, 1e-15));
  CHECK_THAT(s.drop_fraction, WithinAbs(2.0 / 3.0, 1e-15));
  CHECK_THAT(s.throughput, WithinAbs(1.0, 1e-15));
  CHECK_THAT(s.mean_rtt, WithinAbs(0.6, 1e-15));

  auto truncated = log;
  truncated.pop_back();
  CHECK_THROWS_AS(collect_metrics(truncated), DataError);
}

TEST_CASE("summary json", "[des]") {
  std::ostringstream os;
  write_summary_json(os, simulate_dumbbell(reference(5.0)).summary);
  CHECK(os.str().find("\"dropped_red\"") != std::string::npos);
}
