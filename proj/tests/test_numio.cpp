#include <doctest.h>

#include <cmath>
#include <limits>

#include "limbguard/numio.hpp"
#include "limbguard/rng.hpp"

using namespace limbguard;

TEST_SUITE("numio") {

TEST_CASE("format round-trips random doubles exactly") {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    double v = rng.uniform(-1e6, 1e6);
    if (i % 3 == 0) v = rng.normal(0.0, 1e-4);   // small magnitudes
    if (i % 7 == 0) v = rng.uniform(0.0, 1.0) * 1e300;  // huge magnitudes
    const auto back = numio::parse_double(numio::format(v));
    REQUIRE(back.has_value());
    CHECK(*back == v);
  }
}

TEST_CASE("format of exact values is the short form") {
  CHECK(numio::format(0.0) == "0");
  CHECK(numio::format(1.0) == "1");
  CHECK(numio::format(0.5) == "0.5");
  CHECK(numio::format(-2.25) == "-2.25");
}

TEST_CASE("parse_double accepts plain decimal forms") {
  CHECK(*numio::parse_double("0.25") == 0.25);
  CHECK(*numio::parse_double("-3") == -3.0);
  CHECK(*numio::parse_double("+1.5") == 1.5);
  CHECK(*numio::parse_double("1e-3") == 1e-3);
}

TEST_CASE("parse_double rejects junk, partial tokens and non-finite values") {
  CHECK_FALSE(numio::parse_double(""));
  CHECK_FALSE(numio::parse_double(" 1"));
  CHECK_FALSE(numio::parse_double("1 "));
  CHECK_FALSE(numio::parse_double("1.5x"));
  CHECK_FALSE(numio::parse_double("one"));
  CHECK_FALSE(numio::parse_double("nan"));
  CHECK_FALSE(numio::parse_double("inf"));
  CHECK_FALSE(numio::parse_double("1e999"));
  CHECK_FALSE(numio::parse_double("++1"));
}

TEST_CASE("parse_int is strict") {
  CHECK(*numio::parse_int("42") == 42);
  CHECK(*numio::parse_int("-7") == -7);
  CHECK(*numio::parse_int("+3") == 3);
  CHECK_FALSE(numio::parse_int(""));
  CHECK_FALSE(numio::parse_int("4.2"));
  CHECK_FALSE(numio::parse_int("12a"));
  CHECK_FALSE(numio::parse_int(" 12"));
}

TEST_CASE("append writes the same bytes as format") {
  std::string out = "x=";
  numio::append(out, 0.1);
  CHECK(out == "x=" + numio::format(0.1));
}

}  // TEST_SUITE
