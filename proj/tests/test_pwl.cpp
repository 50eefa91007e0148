#include "doctest.h"

#include "pipegrid/errors.hpp"
#include "pipegrid/pwl.hpp"

using pipegrid::PwlProfile;

TEST_CASE("constant profile") {
    auto p = PwlProfile::constant(3.5);
    CHECK(p.value(-10.0) == 3.5);
    CHECK(p.value(0.0) == 3.5);
    CHECK(p.value(42.0) == 3.5);
    CHECK(p.slope(5.0) == 0.0);
    CHECK(p.integral(1.0, 3.0) == doctest::Approx(7.0));
}

TEST_CASE("hourly staircase with ramps") {
    auto p = PwlProfile::from_hourly({1.0, 3.0}, 0.2);
    CHECK(p.value(0.5) == 1.0);
    CHECK(p.value(0.9) == 1.0);
    CHECK(p.value(1.0) == doctest::Approx(2.0)); // ramp midpoint
    CHECK(p.value(1.1) == 3.0);
    CHECK(p.value(5.0) == 3.0); // held past the end
    CHECK(p.slope(0.95) == doctest::Approx(10.0));
    CHECK(p.slope(0.5) == 0.0);
}

TEST_CASE("zero ramp width gives right-continuous jumps") {
    auto p = PwlProfile::from_hourly({1.0, 3.0}, 0.0);
    CHECK(p.value(1.0) == 3.0);
    CHECK(p.value_left(1.0) == 1.0);
    CHECK(p.value(0.999999) == 1.0);
}

TEST_CASE("integral is exact on ramps and jumps") {
    auto stair = PwlProfile::from_hourly({2.0, 4.0}, 0.0);
    CHECK(stair.integral(0.0, 2.0) == doctest::Approx(6.0));
    auto ramp = PwlProfile::from_hourly({2.0, 4.0}, 0.2);
    CHECK(ramp.integral(0.0, 2.0) == doctest::Approx(6.0)); // ramp is centered
    CHECK(ramp.integral(0.5, 1.5) == doctest::Approx(3.0));
    CHECK(ramp.integral(1.5, 0.5) == doctest::Approx(-3.0));
}

TEST_CASE("with_interval replaces a window") {
    auto p = PwlProfile::constant(2.0).with_interval(1.0, 3.0, 5.0);
    CHECK(p.value(0.5) == 2.0);
    CHECK(p.value(1.0) == 5.0);
    CHECK(p.value_left(1.0) == 2.0);
    CHECK(p.value(2.9) == 5.0);
    CHECK(p.value(3.0) == 2.0);
    CHECK(p.value_left(3.0) == 5.0);
    CHECK(p.integral(0.0, 4.0) == doctest::Approx(14.0));
    auto bp = p.breakpoints(0.0, 4.0);
    REQUIRE(bp.size() == 2);
    CHECK(bp[0] == 1.0);
    CHECK(bp[1] == 3.0);
}

TEST_CASE("slopes at and around a jump") {
    auto p = PwlProfile::constant(2.0).with_interval(1.0, 3.0, 5.0);
    CHECK(p.slope(1.0) == 0.0);
    CHECK(p.slope_left(1.0) == 0.0);
    auto r = PwlProfile::from_hourly({0.0, 1.0}, 0.5);
    CHECK(r.slope_left(1.25) == doctest::Approx(2.0));
    CHECK(r.slope(1.25) == 0.0); // exactly at the ramp end, right side is flat
}

TEST_CASE("unsorted knots are rejected") {
    CHECK_THROWS_AS(PwlProfile({{1.0, 0.0}, {0.5, 1.0}}), pipegrid::InputError);
}
