#include <doctest.h>

#include <cmath>

#include "ctxshape/error.hpp"
#include "ctxshape/token_distribution.hpp"

using namespace ctxshape;

TEST_SUITE("token_distribution") {
  TEST_CASE("entries sort by logprob then id and truncate to k") {
    TokenDistribution d({{5, -2.0}, {3, -0.5}, {9, -2.0}, {1, -3.0}}, 3, 4);
    REQUIRE(d.size() == 3);
    CHECK(d.entries()[0].token == 3);
    CHECK(d.entries()[1].token == 5);
    CHECK(d.entries()[2].token == 9);
    CHECK(d.step_index() == 4);
    CHECK(d.argmax() == 3);
    CHECK_FALSE(d.logprob(1).has_value());
    CHECK(*d.logprob(9) == -2.0);
  }

  TEST_CASE("invalid entries are rejected") {
    CHECK_THROWS_AS(TokenDistribution({{1, 0.5}}), InvalidArgument);
    CHECK_THROWS_AS(TokenDistribution({{1, std::nan("")}}), InvalidArgument);
    CHECK_THROWS_AS(TokenDistribution({{1, -1.0}, {1, -2.0}}), InvalidArgument);
  }

  TEST_CASE("tiny positive rounding is clamped to zero") {
    TokenDistribution d({{1, 1e-12}});
    CHECK(*d.logprob(1) == 0.0);
  }

  TEST_CASE("retained mass and top") {
    TokenDistribution d({{1, std::log(0.5)}, {2, std::log(0.3)}, {3, std::log(0.1)}});
    CHECK(d.retained_mass() == doctest::Approx(0.9).epsilon(1e-12));
    TokenDistribution t = d.top(2);
    CHECK(t.size() == 2);
    CHECK(t.retained_mass() == doctest::Approx(0.8).epsilon(1e-12));
    CHECK_THROWS_AS(d.top(0), InvalidArgument);
  }

  TEST_CASE("distribution_from_probs drops zeros") {
    std::vector<std::pair<TokenId, double>> p{{1, 0.25}, {2, 0.0}, {3, 0.75}};
    TokenDistribution d = distribution_from_probs(p);
    CHECK(d.size() == 2);
    CHECK(d.argmax() == 3);
    CHECK(*d.logprob(1) == doctest::Approx(std::log(0.25)));
  }
}
