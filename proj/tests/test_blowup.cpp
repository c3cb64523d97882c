#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pthybrid/blowup.hpp"

using namespace pth;

namespace {
const double kOrders[] = {1.0, 1.5, 2.0, 3.0, 4.0};

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }
}  // namespace

TEST_CASE("terminal time and initial gain") {
  CHECK(terminal_time({10, 1, 1}) == doctest::Approx(10.0));
  CHECK(terminal_time({10, 2, 4}) == doctest::Approx(5.0));
  CHECK(terminal_time({10, 3, 8}) == doctest::Approx(5.0));
  for (double k : kOrders) CHECK(gain({10, k, 2}, 0.0) == doctest::Approx(2.0));
}

TEST_CASE("dilation at t = 5 for the unit-order gain is T ln 2") {
  CHECK(dilate({10, 1, 1}, 5.0) == doctest::Approx(10 * std::log(2.0)).epsilon(1e-14));
  CHECK(contract({10, 1, 1}, 10 * std::log(2.0)) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("round trip and derivative identity on random times") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double mu0 : {1.0, 3.0}) {
    for (double k : kOrders) {
      const BlowUpParams p{10.0, k, mu0};
      const double ups = terminal_time(p);
      double worst_rt = 0.0, worst_der = 0.0;
      for (int i = 0; i < 1000; ++i) {
        const double t = 0.999 * ups * u(rng);
        worst_rt = std::max(worst_rt, std::abs(contract(p, dilate(p, t)) - t));
        const double h = 1e-5 * (ups - t);
        const double fd = (dilate(p, t + h) - dilate(p, t - std::min(h, t))) / (h + std::min(h, t));
        worst_der = std::max(worst_der, rel(fd, gain(p, t)));
      }
      CAPTURE(k);
      CHECK(worst_rt <= 1e-9 * ups);
      CHECK(worst_der <= 1e-5);
    }
  }
}

TEST_CASE("gain matches an RK4 integration of its defining ODE") {
  for (double k : kOrders) {
    const BlowUpParams p{10.0, k, 1.5};
    const double ups = terminal_time(p);
    double y = p.mu0, t = 0.0;
    for (int i = 1; i <= 9; ++i) {
      const double t_next = 0.1 * i * ups;
      y = oracle::rk4_scalar([&](double, double m) { return k / p.T * std::pow(m, 1 + 1 / k); }, y, t, t_next,
                             20000);
      t = t_next;
      CAPTURE(k);
      CAPTURE(t);
      CHECK(rel(gain(p, t), y) <= 1e-8);
    }
  }
}

TEST_CASE("normalized gain matches an RK4 integration in dilated time") {
  for (double k : kOrders) {
    const BlowUpParams p{10.0, k, 2.0};
    double y = p.mu0, s = 0.0;
    for (int i = 1; i <= 10; ++i) {
      const double s_next = 5.0 * i;
      y = oracle::rk4_scalar([&](double, double m) { return k / p.T * std::pow(m, 1 / k); }, y, s, s_next, 5000);
      s = s_next;
      CAPTURE(k);
      CHECK(rel(normalized_gain(p, s), y) <= 1e-8);
    }
  }
}

TEST_CASE("omega of gains equals the dilation increment") {
  for (double k : kOrders) {
    const BlowUpParams p{7.0, k, 1.2};
    const double ups = terminal_time(p);
    const double t1 = 0.2 * ups, t2 = 0.93 * ups;
    CAPTURE(k);
    CHECK(rel(omega(p, gain(p, t2), gain(p, t1)), dilate(p, t2) - dilate(p, t1)) <= 1e-12);
    CHECK(omega(p, 3.0, 3.0) == 0.0);
  }
}

TEST_CASE("dilation tends to mu0 t for a large time constant") {
  for (double k : kOrders) {
    const BlowUpParams p{1e7, k, 2.0};
    CHECK(rel(dilate(p, 5.0), 2.0 * 5.0) <= 1e-5);
  }
}

TEST_CASE("dilated time is unbounded and the terminal cap is enforced") {
  const BlowUpParams p{10, 2, 1};
  CHECK(contract(p, 1e12) < terminal_time(p));
  CHECK_THROWS_AS(gain(p, 10.0), DomainError);
  CHECK_THROWS_AS(dilate(p, 10.0 * (1 - 1e-7)), DomainError);
  CHECK_NOTHROW(dilate(p, 10.0 * (1 - 1e-7), 1e-8));
  CHECK_THROWS_AS(dilate(p, -1.0), DomainError);
  CHECK_THROWS_AS(contract(p, -1.0), DomainError);
  CHECK_THROWS_AS((BlowUpParams{10, 0.5, 1}.validate()), DomainError);
  CHECK_THROWS_AS((BlowUpParams{10, 1, 0.5}.validate()), DomainError);
  CHECK_THROWS_AS((BlowUpParams{0, 1, 1}.validate()), DomainError);
}

TEST_CASE("orders just above one stay continuous with the unit-order branch") {
  const double t = 3.0;
  const double a = dilate({10, 1.0, 2.0}, t), b = dilate({10, 1.0 + 1e-8, 2.0}, t);
  CHECK(rel(a, b) < 1e-6);
}
