#include <catch_amalgamated.hpp>

#include <cmath>

#include "redsim/errors.hpp"
#include "redsim/red.hpp"
#include "redsim/rng.hpp"

using namespace redsim;
using Catch::Matchers::WithinAbs;

TEST_CASE("ewma weight values", "[red]") {
  CHECK_THAT(ewma_weight(1.0), WithinAbs(0.632120558829, 1e-9));
  CHECK_THAT(ewma_weight(1.0 / std::log(2.0)), WithinAbs(0.5, 1e-9));
  const double big = ewma_weight(1e6);
  CHECK(big > 0.0);
  CHECK(big < 1.1e-6);
}

TEST_CASE("ewma weight rejects bad capacity", "[red]") {
  CHECK_THROWS_AS(ewma_weight(0.0), DomainError);
  CHECK_THROWS_AS(ewma_weight(-3.0), DomainError);
  CHECK_THROWS_AS(ewma_weight(INFINITY), DomainError);
  CHECK_THROWS_AS(ewma_weight(NAN), DomainError);
}

TEST_CASE("ewma weight is in (0,1) and strictly decreasing", "[red][property]") {
  double prev = 1.0;
  for (int i = -10; i <= 60; ++i) {  // below C ~ 0.03 the weight rounds to 1
    const double c = std::pow(10.0, i / 10.0);
    const double w = ewma_weight(c);
    CHECK(w > 0.0);
    CHECK(w < 1.0);
    CHECK(w < prev);
    prev = w;
  }
}

TEST_CASE("ewma update examples", "[red]") {
  CHECK(ewma_update(0.0, 10.0, 0.5) == 5.0);
  CHECK(ewma_update(7.0, 7.0, 0.123) == 7.0);
  CHECK(ewma_update(4.0, 8.0, 0.25) == 5.0);
  CHECK_THROWS_AS(ewma_update(1.0, 2.0, 0.0), DomainError);
  CHECK_THROWS_AS(ewma_update(1.0, 2.0, 1.0), DomainError);
  CHECK_THROWS_AS(ewma_update(1.0, 2.0, -0.5), DomainError);
}

TEST_CASE("ewma update stays between its inputs", "[red][property]") {
  RandomStream rng(42);
  for (int i = 0; i < 10000; ++i) {
    const double a = rng.uniform(0.0, 100.0);
    const double b = rng.uniform(0.0, 100.0);
    const double w = rng.uniform(1e-6, 1.0 - 1e-6);
    const double r = ewma_update(a, b, w);
    REQUIRE(r >= std::min(a, b));
    REQUIRE(r <= std::max(a, b));
  }
}

TEST_CASE("ewma with constant input converges geometrically", "[red][property]") {
  const double w = 0.125;  // powers of 7/8 are exact for a while
  const double q = 8.0;
  double q_hat = 0.0;
  for (int k = 1; k <= 12; ++k) {
    q_hat = ewma_update(q_hat, q, w);
    CHECK_THAT(std::abs(q_hat - q), WithinAbs(std::pow(1.0 - w, k) * 8.0, 1e-12));
  }
}

TEST_CASE("drop probability examples", "[red]") {
  const RedParams red{5.0, 15.0, 0.1, 0.002};
  CHECK(drop_probability(0.0, red) == 0.0);
  CHECK(drop_probability(5.0, red) == 0.0);
  CHECK_THAT(drop_probability(10.0, red), WithinAbs(0.05, 1e-15));
  CHECK_THAT(drop_probability(15.0, red), WithinAbs(0.1, 1e-15));
  CHECK(drop_probability(15.000001, red) == 1.0);
}

TEST_CASE("drop probability is monotone with one jump at q_max", "[red][property]") {
  RandomStream rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    RedParams red;
    red.q_min = rng.uniform(0.0, 20.0);
    red.q_max = red.q_min + rng.uniform(0.1, 30.0);
    red.p_max = rng.uniform(0.01, 0.99);
    double a = rng.uniform(0.0, 2.0 * red.q_max);
    double b = rng.uniform(0.0, 2.0 * red.q_max);
    if (a > b) std::swap(a, b);
    REQUIRE(drop_probability(a, red) <= drop_probability(b, red));
    // continuity just below q_max, jump just above
    const double eps = 1e-9 * red.q_max;
    CHECK_THAT(drop_probability(red.q_max - eps, red), WithinAbs(red.p_max, 1e-6));
    CHECK(drop_probability(std::nextafter(red.q_max, INFINITY), red) == 1.0);
  }
}

TEST_CASE("red params invariants", "[red]") {
  CHECK(RedParams{}.violations().empty());
  CHECK_FALSE(RedParams{15.0, 5.0, 0.1, 0.002}.violations().empty());
  CHECK_FALSE(RedParams{5.0, 5.0, 0.1, 0.002}.violations().empty());
  CHECK_FALSE(RedParams{-1.0, 5.0, 0.1, 0.002}.violations().empty());
  CHECK_FALSE(RedParams{5.0, 15.0, 0.0, 0.002}.violations().empty());
  CHECK_FALSE(RedParams{5.0, 15.0, 1.5, 0.002}.violations().empty());
  CHECK_FALSE(RedParams{5.0, 15.0, 0.1, 1.0}.violations().empty());
  CHECK(RedParams{5.0, 15.0, 1.0, 0.5}.violations().empty());
  const RedParams bad{20.0, 10.0, 2.0, 0.0};
  CHECK(bad.violations().size() == 3);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("drop decision edge probabilities", "[red]") {
  RandomStream rng(1);
  for (int i = 0; i < 1000; ++i) {
    CHECK_FALSE(drop_decision(0.0, rng));
    CHECK(drop_decision(1.0, rng));
  }
  CHECK_THROWS_AS(drop_decision(-0.1, rng), DomainError);
  CHECK_THROWS_AS(drop_decision(1.1, rng), DomainError);
  CHECK_THROWS_AS(drop_decision(NAN, rng), DomainError);
}

TEST_CASE("drop decision consumes one uniform per call", "[red]") {
  RandomStream a(99);
  RandomStream b(99);
  (void)drop_decision(0.0, a);
  (void)drop_decision(1.0, a);
  (void)drop_decision(0.5, a);
  b.uniform();
  b.uniform();
  b.uniform();
  CHECK(a.uniform() == b.uniform());
}

TEST_CASE("drop decision empirical rate", "[red][statistical]") {
  RandomStream rng(2024);
  const int n = 1000000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += drop_decision(0.3, rng);
  // 4 sigma of a binomial(1e6, 0.3) proportion is about 0.0018
  CHECK_THAT(static_cast<double>(hits) / n, WithinAbs(0.3, 0.002));
}

TEST_CASE("substream seeds are distinct and stable", "[rng]") {
  CHECK(substream_seed(1, 0) != substream_seed(1, 1));
  CHECK(substream_seed(1, 0) != substream_seed(2, 0));
  CHECK(substream_seed(5, 9) == substream_seed(5, 9));
  RandomStream r = RandomStream::substream(3, 4);
  const double u = r.uniform();
  CHECK(u >= 0.0);
  CHECK(u < 1.0);
}
