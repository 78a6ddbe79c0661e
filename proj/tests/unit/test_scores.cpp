#include <doctest.h>

#include "vitaudit/scores.hpp"

using namespace vitaudit;

// boost::rational == int recurses under C++20 rewritten comparisons; always
// compare against a Rational.
#define R(...) Rational(__VA_ARGS__)

TEST_CASE("aggregate examples") {
  CHECK(aggregate(5, 5, 5, WeightScheme{}) == R(5));
  CHECK(aggregate(4, 2, 3, WeightScheme{}) == R(3));
  CHECK(aggregate(5, 2, 3, WeightScheme::reason_centric()) == R(4));
  CHECK(aggregate(1, 1, 2, WeightScheme{}) == R(4, 3));
}

TEST_CASE("aggregate equals the exact mean on every integer triple") {
  for (int l = 1; l <= 5; ++l)
    for (int k = 1; k <= 5; ++k)
      for (int v = 1; v <= 5; ++v) {
        const auto got = aggregate(l, k, v, WeightScheme{});
        REQUIRE(got == R(l + k + v, 3));
        REQUIRE(got >= R(1));
        REQUIRE(got <= R(5));
      }
}

TEST_CASE("aggregate renormalizes over judged axes") {
  ScoreVector v;
  v.s_l = 4;
  v.s_v = 2;
  CHECK(aggregate(v, WeightScheme{}) == R(3));
  CHECK(aggregate(v, WeightScheme::reason_centric()) == R(7, 2));
}

TEST_CASE("aggregate rejects bad input") {
  CHECK_THROWS_AS(aggregate(0, 3, 3, WeightScheme{}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate(3, 6, 3, WeightScheme{}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate(ScoreVector{}, WeightScheme{}), std::invalid_argument);
  ScoreVector only_k;
  only_k.s_k = 3;
  CHECK_THROWS_AS(aggregate(only_k, WeightScheme(R(1), R(0), R(0))), std::invalid_argument);
}

TEST_CASE("weight schemes") {
  CHECK(WeightScheme{}.name() == "equal");
  CHECK(WeightScheme::parse("0.6,0.2,0.2") == WeightScheme::reason_centric());
  CHECK(WeightScheme::parse("reason-centric").name() == "reason-centric");
  CHECK(WeightScheme::parse("0.2,0.2,0.6").name() == "vision-centric");
  CHECK(WeightScheme::parse("knowledge-centric").knowledge() == R(3, 5));
  CHECK(WeightScheme::parse("1/3,1/3,1/3") == WeightScheme{});
  CHECK(WeightScheme::parse("0.5,0.25,0.25").name() == "custom");
  CHECK(WeightScheme::parse("0.5, 0.25, 0.25").to_string() == "1/2,1/4,1/4");
  CHECK_THROWS_AS(WeightScheme::parse("0.5,0.5,0.5"), InvalidWeightsError);
  CHECK_THROWS_AS(WeightScheme::parse("-0.2,0.6,0.6"), InvalidWeightsError);
  CHECK_THROWS_AS(WeightScheme::parse("0.5,0.5"), std::invalid_argument);
  CHECK_THROWS_AS(WeightScheme::parse("heavy"), std::invalid_argument);
}

TEST_CASE("parse_rational") {
  CHECK(parse_rational("0.25") == R(1, 4));
  CHECK(parse_rational("3") == R(3));
  CHECK(parse_rational("2/6") == R(1, 3));
  CHECK(parse_rational("-1.5") == R(-3, 2));
  CHECK_THROWS_AS(parse_rational("1/0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational("abc"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational(""), std::invalid_argument);
}

TEST_CASE("axis sets") {
  CHECK(AxisSet::parse("logic,vision").to_string() == "logic,vision");
  CHECK_FALSE(AxisSet::parse("vision").contains(Axis::Logic));
  CHECK(AxisSet{}.to_string() == "logic,knowledge,vision");
  CHECK_THROWS_AS(AxisSet::parse("taste"), std::invalid_argument);
  CHECK_THROWS_AS(AxisSet::parse(""), std::invalid_argument);
  CHECK(parse_axis("knowledge") == Axis::Knowledge);
  CHECK_FALSE(parse_axis("Knowledge ").has_value());
}
