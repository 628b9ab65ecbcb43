#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

#include "redsim/errors.hpp"
#include "redsim/rng.hpp"
#include "redsim/surrogate.hpp"

using namespace redsim;
using namespace redsim::surrogate;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Scenario single_flow() {
  auto s = reference_scenario();
  s.n_flows = 1;
  return s;
}

ParameterBox red_box() { return ParameterBox({{"p_max", 0.05, 0.2}, {"q_min", 3.0, 7.0}}, single_flow()); }

double quadratic(const Point& x) {
  return 1.5 - 2.0 * x[0] + 0.3 * x[1] + 4.0 * x[0] * x[0] - 0.7 * x[0] * x[1] + 0.05 * x[1] * x[1];
}

Dataset synthetic(const ParameterBox& box, const std::vector<Point>& pts,
                  const std::function<double(const Point&)>& f) {
  Dataset d;
  d.dim_names = box.names();
  d.response_names = {"y"};
  for (const auto& x : pts) {
    d.points.push_back(x);
    d.responses.push_back({f(x)});
    d.response_sd.push_back({0.0});
    d.provenance.emplace_back("synthetic");
  }
  return d;
}

}  // namespace

TEST_CASE("box validation", "[surrogate]") {
  CHECK_NOTHROW(red_box());
  CHECK_THROWS_AS(ParameterBox({{"bogus", 0, 1}}, single_flow()), ConfigError);
  CHECK_THROWS_AS(ParameterBox({{"p_max", 0.2, 0.1}}, single_flow()), ConfigError);
  CHECK_THROWS_AS(ParameterBox({}, single_flow()), ConfigError);
  CHECK_THROWS_AS(ParameterBox({{"p_max", 0.1, 0.2}, {"p_max", 0.1, 0.2}}, single_flow()), ConfigError);
  // q_min reaching q_max at a corner
  CHECK_THROWS_AS(ParameterBox({{"q_min", 3.0, 20.0}}, single_flow()), ConfigError);
  CHECK_THROWS_AS(ParameterBox({{"p_max", 0.5, 1.5}}, single_flow()), ConfigError);
}

TEST_CASE("applying a point", "[surrogate]") {
  const ParameterBox box({{"T_p", 0.05, 0.2}, {"n_flows", 1, 8}, {"w_q", 0.001, 0.01}, {"C", 50, 200}},
                         single_flow());
  const auto s = box.apply({0.1, 3.6, 0.002, 120});
  CHECK(s.prop_delay == 0.05);
  CHECK(s.n_flows == 4);
  CHECK_FALSE(s.w_q_auto);
  CHECK(s.red.w_q == 0.002);
  CHECK(s.capacity == 120);
}

TEST_CASE("normalization round trip", "[surrogate][property]") {
  const auto box = red_box();
  RandomStream rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Point x{rng.uniform(0.05, 0.2), rng.uniform(3.0, 7.0)};
    const auto back = box.denormalize(box.normalize(x));
    CHECK_THAT(back[0], WithinAbs(x[0], 1e-12));
    CHECK_THAT(back[1], WithinAbs(x[1], 1e-12));
  }
  CHECK_THROWS_AS(box.normalize({0.1}), DomainError);
}

TEST_CASE("latin hypercube projection", "[surrogate]") {
  const auto box = red_box();
  for (std::size_t n : {2u, 4u, 7u, 40u}) {
    const auto pts = sample_plan(box, n, 11);
    REQUIRE(pts.size() == n);
    for (std::size_t d = 0; d < 2; ++d) {
      std::set<std::size_t> bins;
      for (const auto& p : pts) {
        const double u = box.normalize(p)[d];
        bins.insert(std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n))));
      }
      CHECK(bins.size() == n);
    }
    for (const auto& p : pts) CHECK(box.contains(p));
  }
  CHECK(sample_plan(box, 10, 5) == sample_plan(box, 10, 5));
  CHECK_FALSE(sample_plan(box, 10, 5) == sample_plan(box, 10, 6));
  CHECK_THROWS_AS(sample_plan(box, 1, 5), DomainError);
}

TEST_CASE("latin hypercube marginals are uniform", "[surrogate][statistical]") {
  const ParameterBox box({{"p_max", 0.05, 0.2}, {"q_min", 3.0, 7.0}, {"C", 50.0, 200.0}}, single_flow());
  const auto pts = sample_plan(box, 1000, 99);
  for (std::size_t d = 0; d < 3; ++d) {
    std::vector<double> u;
    for (const auto& p : pts) u.push_back(box.normalize(p)[d]);
    std::sort(u.begin(), u.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double n = static_cast<double>(u.size());
      ks = std::max({ks, std::abs(u[i] - static_cast<double>(i) / n), std::abs(u[i] - static_cast<double>(i + 1) / n)});
    }
    CHECK(ks <= 0.05);
  }
}

TEST_CASE("moment evaluator dataset", "[surrogate]") {
  const auto box = red_box();
  const auto pts = sample_plan(box, 12, 1);
  const auto ev = moment_equilibrium_evaluator();
  const auto d = evaluate_design(box, pts, ev, 3, 1);
  CHECK(d.rows() == 12);
  CHECK(d.failures.empty());
  CHECK(d.response_names == std::vector<std::string>{"Q_star", "W_star"});
  for (std::size_t i = 0; i < d.rows(); ++i) {
    CHECK_THAT(d.responses[i][1] - d.responses[i][0], WithinAbs(10.0, 1e-9));  // W* = C T(Q*) with N = 1
    CHECK(d.response_sd[i] == std::vector<double>{0.0, 0.0});
  }
  CHECK(d.provenance[0].find("moments") == 0);
  CHECK_THROWS_AS(evaluate_design(box, {{0.5, 5.0}}, ev, 1, 1), DomainError);
}

TEST_CASE("replications average split seeds", "[surrogate]") {
  const auto box = red_box();
  Evaluator ev{"noise", {"u"}, true, [](const Scenario&, std::uint64_t seed) {
                 RandomStream r(seed);
                 return std::vector<double>{r.uniform()};
               }};
  const std::vector<Point> pts{{0.1, 4.0}, {0.15, 6.0}};
  const auto d = evaluate_design(box, pts, ev, 10, 42);
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<double> v;
    for (std::uint64_t r = 0; r < 10; ++r) v.push_back(RandomStream(substream_seed(substream_seed(42, i), r)).uniform());
    double mean = 0;
    for (double x : v) mean += x;
    mean /= 10;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    CHECK_THAT(d.responses[i][0], WithinAbs(mean, 1e-15));
    CHECK_THAT(d.response_sd[i][0], WithinAbs(std::sqrt(ss / 9), 1e-15));
  }
}

TEST_CASE("failed points become failure records", "[surrogate]") {
  const auto box = red_box();
  Evaluator ev{"flaky", {"y"}, false, [](const Scenario& s, std::uint64_t) {
                 if (s.red.p_max > 0.15) throw std::runtime_error("no convergence");
                 return std::vector<double>{s.red.p_max};
               }};
  const std::vector<Point> pts{{0.06, 4.0}, {0.18, 4.0}, {0.1, 5.0}};
  const auto d = evaluate_design(box, pts, ev, 1, 0);
  CHECK(d.rows() == 2);
  REQUIRE(d.failures.size() == 1);
  CHECK(d.failures[0].point == pts[1]);
  CHECK_THAT(d.failures[0].reason, ContainsSubstring("no convergence"));
}

TEST_CASE("packet simulator evaluator", "[surrogate]") {
  const auto box = ParameterBox({{"p_max", 0.05, 0.2}}, reference_scenario());
  const auto d = evaluate_design(box, {{0.1}}, des_evaluator(5.0), 2, 3);
  REQUIRE(d.rows() == 1);
  CHECK(d.responses[0].size() == 3);
  CHECK(d.response_sd[0][2] >= 0.0);
}

TEST_CASE("quadratic data is recovered", "[surrogate]") {
  const auto box = red_box();
  const auto data = synthetic(box, sample_plan(box, 20, 4), quadratic);
  const auto m = fit(box, data, Kind::Polynomial2);
  CHECK(m.responses[0].training_residual <= 1e-8);
  for (const auto& x : sample_plan(box, 15, 8)) CHECK_THAT(predict(m, x).values[0], WithinRel(quadratic(x), 1e-8));
  const auto rep = assess(box, data, Kind::Polynomial2, 5, 1);
  CHECK(rep.responses[0].relative_rmse <= 1e-6);
  CHECK(rep.k == 5);
  CHECK(rep.holdout_size == 4);
}

TEST_CASE("polynomial needs enough independent rows", "[surrogate]") {
  const auto box = red_box();
  CHECK_THROWS_AS(fit(box, synthetic(box, sample_plan(box, 5, 4), quadratic), Kind::Polynomial2), DomainError);
  std::vector<Point> flat;
  for (int i = 0; i < 10; ++i) flat.push_back({0.05 + 0.01 * i, 5.0});
  try {
    (void)fit(box, synthetic(box, flat, quadratic), Kind::Polynomial2);
    FAIL("expected rank deficiency");
  } catch (const DomainError& e) {
    CHECK_THAT(e.what(), ContainsSubstring("q_min"));
  }
}

TEST_CASE("constant responses", "[surrogate]") {
  const auto box = red_box();
  const auto data = synthetic(box, sample_plan(box, 12, 2), [](const Point&) { return 3.25; });
  for (auto kind : {Kind::Polynomial2, Kind::RbfGaussian}) {
    const auto m = fit(box, data, kind);
    CHECK_FALSE(m.responses[0].r2_defined);
    for (const auto& x : sample_plan(box, 10, 9)) CHECK_THAT(predict(m, x).values[0], WithinAbs(3.25, 1e-9));
    const auto rep = assess(box, data, kind, 4, 0);
    CHECK_FALSE(rep.responses[0].r2_defined);
  }
}

TEST_CASE("rbf interpolates its training points", "[surrogate]") {
  const auto box = red_box();
  const auto data = synthetic(box, sample_plan(box, 25, 6),
                              [](const Point& x) { return std::sin(30.0 * x[0]) + std::cos(x[1]); });
  const auto m = fit(box, data, Kind::RbfGaussian);
  CHECK(m.responses[0].shape > 0.0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    CHECK_THAT(predict(m, data.points[i]).values[0], WithinAbs(data.responses[i][0], 1e-6));
  }
}

TEST_CASE("prediction contract", "[surrogate]") {
  const auto box = red_box();
  const auto m = fit(box, synthetic(box, sample_plan(box, 20, 4), quadratic), Kind::Polynomial2);
  CHECK_FALSE(predict(m, {0.2, 7.0}).extrapolated);
  const auto out = predict(m, {0.2 + 1e-9, 7.0});
  CHECK(out.extrapolated);
  CHECK(std::isfinite(out.values[0]));
  CHECK(predict(m, {0.1, 5}).values == predict(m, {0.1, 5}).values);
  CHECK_THROWS_AS(predict(m, {0.1}), DomainError);
}

TEST_CASE("cross-validation of noise has no skill", "[surrogate][statistical]") {
  const auto box = red_box();
  RandomStream rng(77);
  const auto pts = sample_plan(box, 60, 5);
  const auto data = synthetic(box, pts, [&](const Point&) { return rng.normal(); });
  const auto rep = assess(box, data, Kind::Polynomial2, 5, 3);
  CHECK(rep.responses[0].r2 <= 0.1);
}

TEST_CASE("assessment is deterministic and order invariant", "[surrogate]") {
  const auto box = red_box();
  const auto data = synthetic(box, sample_plan(box, 30, 4),
                              [](const Point& x) { return std::exp(5.0 * x[0]) + x[1]; });
  const auto a = assess(box, data, Kind::RbfGaussian, 5, 9);
  const auto b = assess(box, data, Kind::RbfGaussian, 5, 9);
  CHECK(a.responses[0].rmse == b.responses[0].rmse);

  Dataset reversed = data;
  std::reverse(reversed.points.begin(), reversed.points.end());
  std::reverse(reversed.responses.begin(), reversed.responses.end());
  const auto c = assess(box, reversed, Kind::RbfGaussian, 5, 9);
  CHECK(c.responses[0].rmse == a.responses[0].rmse);

  CHECK_THROWS_AS(assess(box, data, Kind::Polynomial2, 1, 0), DomainError);
  CHECK_THROWS_AS(assess(box, data, Kind::Polynomial2, 31, 0), DomainError);
}

TEST_CASE("refinement proposes midpoints inside the box", "[surrogate]") {
  const auto box = red_box();
  const auto data = synthetic(box, sample_plan(box, 20, 4),
                              [](const Point& x) { return std::sin(40.0 * x[0]) * x[1]; });
  const auto extra = refinement_points(box, data, Kind::Polynomial2, 5, 3, 0);
  CHECK(extra.size() == 3);
  for (const auto& x : extra) CHECK(box.contains(x));
}

TEST_CASE("persistence round trips", "[surrogate]") {
  const auto box = red_box();
  const auto pts = sample_plan(box, 15, 4);

  std::stringstream plan;
  write_plan_csv(plan, box, pts);
  CHECK(read_plan_csv(plan, box) == pts);

  CHECK(box_from_json(box_to_json(box)) == box);

  const auto data = evaluate_design(box, pts, moment_equilibrium_evaluator(), 1, 4);
  const auto dir = std::filesystem::temp_directory_path() / "redsim_surrogate_test";
  std::filesystem::create_directories(dir);
  write_dataset((dir / "d.csv").string(), (dir / "d.json").string(), box, data, "moments", 4, 1);
  const auto loaded = read_dataset((dir / "d.csv").string(), (dir / "d.json").string());
  CHECK(loaded.box == box);
  CHECK(loaded.data.points == data.points);
  CHECK(loaded.data.responses == data.responses);
  CHECK(loaded.data.provenance == data.provenance);

  for (auto kind : {Kind::Polynomial2, Kind::RbfGaussian}) {
    auto m = fit(box, data, kind);
    m.accuracy = assess(box, data, kind, 5, 0);
    const auto back = model_from_json(model_to_json(m));
    CHECK(back.kind == kind);
    CHECK(back.accuracy.has_value());
    for (const auto& x : sample_plan(box, 5, 1)) CHECK(predict(back, x).values == predict(m, x).values);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("kind names", "[surrogate]") {
  CHECK(kind_from_string("polynomial2") == Kind::Polynomial2);
  CHECK(kind_from_string("rbf_gaussian") == Kind::RbfGaussian);
  CHECK(to_string(Kind::RbfGaussian) == "rbf_gaussian");
  CHECK_THROWS_AS(kind_from_string("spline"), DomainError);
  CHECK(polynomial_terms({"a", "b"}) == std::vector<std::string>{"1", "a", "b", "a*a", "a*b", "b*b"});
}
