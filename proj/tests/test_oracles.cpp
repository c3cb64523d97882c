#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"

TEST_CASE("rk4 reproduces exponential decay") {
  const double y = oracle::rk4_scalar([](double, double y) { return -y; }, 1.0, 0.0, 1.0, 1000);
  CHECK(std::abs(y - std::exp(-1.0)) < 1e-13);
}

TEST_CASE("rk4 integrates a rotation for a full turn") {
  const auto y = oracle::rk4([](double, const oracle::State& y) { return oracle::State{-y[1], y[0]}; },
                             {1.0, 0.0}, 0.0, 2 * std::numbers::pi, 4000);
  CHECK(std::abs(y[0] - 1.0) < 1e-12);
  CHECK(std::abs(y[1]) < 1e-12);
}

TEST_CASE("adaptive simpson on smooth and endpoint-steep integrands") {
  CHECK(std::abs(oracle::quad([](double x) { return std::sin(x); }, 0.0, std::numbers::pi) - 2.0) < 1e-12);
  // integral of 1/(1-x) on [0, 0.999] = ln 1000
  CHECK(std::abs(oracle::quad([](double x) { return 1.0 / (1.0 - x); }, 0.0, 0.999) - std::log(1000.0)) <
        1e-10);
}

TEST_CASE("bisection finds pi/2") {
  CHECK(std::abs(oracle::bisect([](double x) { return std::cos(x); }, 0.0, 2.0) - std::numbers::pi / 2) < 1e-13);
  CHECK_THROWS(oracle::bisect([](double x) { return x * x + 1; }, -1.0, 1.0));
}
