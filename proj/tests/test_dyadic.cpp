#include "asts/dyadic.hpp"

#include <doctest.h>

#include <random>
#include <stdexcept>

using asts::Dyadic;

TEST_CASE("canonical form and parsing") {
    CHECK(Dyadic::from_parts(6, 2) == Dyadic::from_parts(3, 1));
    CHECK(Dyadic::from_parts(8, 3) == Dyadic(1));
    CHECK(Dyadic::from_parts(0, 7) == Dyadic(0));
    CHECK(Dyadic::parse("5/4").numerator() == 5);
    CHECK(Dyadic::parse("5/4").exponent() == 2);
    CHECK(Dyadic::parse("-3/8").str() == "-3/8");
    CHECK(Dyadic::parse("12").str() == "12");
    CHECK(Dyadic::parse("6/4") == Dyadic::parse("3/2"));
    CHECK_THROWS_AS(Dyadic::parse("1/3"), std::invalid_argument);
    CHECK_THROWS_AS(Dyadic::parse("1/0"), std::invalid_argument);
    CHECK_THROWS_AS(Dyadic::from_parts(1, -1), std::invalid_argument);
}

TEST_CASE("floor, ceil and ordering") {
    CHECK(Dyadic::parse("7/2").floor() == 3);
    CHECK(Dyadic::parse("7/2").ceil() == 4);
    CHECK(Dyadic::parse("-7/2").floor() == -4);
    CHECK(Dyadic::parse("-7/2").ceil() == -3);
    CHECK(Dyadic(3).floor() == 3);
    CHECK(Dyadic(3).ceil() == 3);
    CHECK(Dyadic::parse("1/2") < Dyadic::parse("3/4"));
    CHECK(Dyadic::parse("-1/2") < Dyadic(0));
    CHECK(asts::midpoint(Dyadic(1), Dyadic(2)) == Dyadic::parse("3/2"));
    CHECK(Dyadic(3).times_pow2(-3) == Dyadic::parse("3/8"));
    CHECK(Dyadic::parse("3/8").times_pow2(3) == Dyadic(3));
}

TEST_CASE("arithmetic agrees with exact binary floating point on small operands") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::int64_t> num(-4096, 4096);
    std::uniform_int_distribution<int> ex(0, 20);
    for (int i = 0; i < 2000; ++i) {
        Dyadic a = Dyadic::from_parts(num(rng), ex(rng));
        Dyadic b = Dyadic::from_parts(num(rng), ex(rng));
        CHECK((a + b).to_double() == a.to_double() + b.to_double());
        CHECK((a - b).to_double() == a.to_double() - b.to_double());
        CHECK(a.times_int(5).to_double() == 5 * a.to_double());
        CHECK((a < b) == (a.to_double() < b.to_double()));
        CHECK(a.floor() == static_cast<std::int64_t>(std::floor(a.to_double())));
        CHECK(a.ceil() == static_cast<std::int64_t>(std::ceil(a.to_double())));
    }
}

TEST_CASE("overflow is reported") {
    CHECK_THROWS_AS(Dyadic(1).times_pow2(-63), std::overflow_error);
    CHECK_THROWS_AS(Dyadic(INT64_MAX) + Dyadic(1), std::overflow_error);
}

TEST_CASE("translate_point clamps into the active region") {
    auto t = asts::translate_point({Dyadic(0), Dyadic::parse("9/2")}, {2, 2}, {9, 9});
    CHECK(t.x == Dyadic(2));
    CHECK(t.y == Dyadic::parse("9/2"));
    t = asts::translate_point({Dyadic(11), Dyadic(1)}, {2, 3}, {9, 10});
    CHECK(t.x == Dyadic(9));
    CHECK(t.y == Dyadic(3));
}
