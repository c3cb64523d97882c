#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pthybrid/switching.hpp"

using namespace pth;

namespace {

SwitchingSignal make_signal(std::vector<double> switches, double end, std::vector<int> modes = {1, 2},
                            std::vector<int> unstable = {}) {
  SwitchingSignal s;
  s.start_times = {0.0};
  s.start_times.insert(s.start_times.end(), switches.begin(), switches.end());
  for (std::size_t i = 0; i < s.start_times.size(); ++i) s.modes.push_back(modes[i % modes.size()]);
  s.end_time = end;
  s.unstable_modes = unstable;
  for (int q : modes)
    if (std::find(unstable.begin(), unstable.end(), q) == unstable.end()) s.stable_modes.push_back(q);
  return s;
}

const BlowUpParams kP{10, 1, 1};
const AdtParams kAdt{1, 3};

}  // namespace

TEST_CASE("switch counts are taken over half-open windows") {
  const SwitchingSignal s = make_signal({1, 2, 3}, 4);
  CHECK(count_switches(s, 0.5, 2.5) == 2);
  CHECK(count_switches(s, 2.0, 3.0) == 1);
  CHECK(count_switches(s, 2.0, 2.0) == 0);
  CHECK_THROWS(count_switches(s, 2.0, 5.0));
}

TEST_CASE("blow-up dwell bound values") {
  CHECK(bu_adt_bound(kP, kAdt, 3.0, 3.0) == doctest::Approx(3.0));
  CHECK(bu_adt_bound(kP, kAdt, 0.0, 5.0) == doctest::Approx(10 * std::log(2.0) + 3).epsilon(1e-12));
  CHECK(bu_adt_bound(kP, kAdt, 0.0, 5.0) == doctest::Approx(9.931).epsilon(1e-4));
  CHECK(std::abs(bu_adt_bound({1e6, 1, 1}, {1, 1}, 0.0, 5.0) - 6.0) < 1e-3);
  CHECK_THROWS_AS(bu_adt_bound(kP, kAdt, 0.0, 10.0), DomainError);
}

TEST_CASE("the bound grows without limit toward the terminal time") {
  for (double k : {1.0, 2.0, 3.0, 4.0}) {
    const BlowUpParams p{10, k, 1};
    double prev = -1.0;
    for (int i = 0; i <= 60; ++i) {
      const double t2 = (1 - std::pow(10.0, -i / 10.0)) * terminal_time(p);
      const double b = bu_adt_bound(p, kAdt, 0.0, t2);
      if (i > 0) CHECK(b > prev);
      prev = b;
    }
    // Logarithmic growth for k = 1, polynomial in the gain otherwise.
    CHECK(prev > (k == 1.0 ? 140.0 : 1e5));
  }
}

TEST_CASE("closed forms agree with the omega form") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double k : {1.0, 2.0, 3.0, 4.0}) {
    const BlowUpParams p{10, k, 1.7};
    const double ups = terminal_time(p);
    for (int i = 0; i < 200; ++i) {
      double t1 = 0.9 * ups * u(rng), t2 = 0.9 * ups * u(rng);
      if (t1 > t2) std::swap(t1, t2);
      const AdtClosedForms f = bu_adt_closed_forms(p, kAdt, t1, t2);
      const double other = k == 1.0 ? f.log_form.value() : f.binomial_form.value();
      CAPTURE(k);
      CHECK(std::abs(other - f.omega_form) <= 1e-8 * std::abs(f.omega_form));
    }
  }
  const AdtClosedForms eq = bu_adt_closed_forms({10, 3, 1}, kAdt, 2.0, 2.0);
  CHECK(eq.omega_form == doctest::Approx(3.0));
  CHECK(eq.binomial_form.value() == doctest::Approx(3.0));
  CHECK_FALSE(bu_adt_closed_forms({10, 2.5, 1}, kAdt, 0.0, 1.0).binomial_form.has_value());
}

TEST_CASE("dwell validation: empty, spread and clustered signals") {
  const ValidationReport empty = validate_bu_adt(make_signal({}, 5), kP, kAdt);
  CHECK(empty.pass);
  CHECK(empty.min_slack == doctest::Approx(3.0));

  std::vector<double> spread;
  for (int i = 1; i <= 9; ++i) spread.push_back(5.0 * i / 9.0);
  const SwitchingSignal sp = make_signal(spread, 5.5);
  CHECK(count_switches(sp, 0.0, 5.0) == 9);
  CHECK(validate_bu_adt(sp, kP, kAdt).pass);

  std::vector<double> cluster;
  for (int i = 1; i <= 10; ++i) cluster.push_back(4.9 + 0.01 * i);
  const SwitchingSignal cl = make_signal(cluster, 5.5);
  const ValidationReport r = validate_bu_adt(cl, kP, kAdt);
  CHECK_FALSE(r.pass);
  CHECK(r.min_slack < 0.0);
  // The witness pair is a genuine violation that spans the whole cluster.
  CHECK(r.witness_t1 < 4.91);
  CHECK(r.witness_t2 == doctest::Approx(5.0));
  CHECK(static_cast<double>(count_switches(cl, r.witness_t1, r.witness_t2)) >
        bu_adt_bound(kP, kAdt, r.witness_t1, r.witness_t2));
}

TEST_CASE("unstable activation is exact against quadrature") {
  CHECK(unstable_activation(make_signal({1, 2}, 3), kP, 0.0, 3.0) == 0.0);
  const SwitchingSignal one = make_signal({}, 5, {3}, {3});
  CHECK(unstable_activation(one, kP, 0.0, 5.0) == doctest::Approx(10 * std::log(2.0)).epsilon(1e-12));
  const SwitchingSignal two = make_signal({1, 2, 3}, 4, {3, 1}, {3});
  CHECK(unstable_activation(two, kP, 0.0, 4.0) ==
        doctest::Approx(dilate(kP, 1) + dilate(kP, 3) - dilate(kP, 2)).epsilon(1e-12));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const BlowUpParams p{10, trial % 2 ? 2.0 : 1.0, 1.0 + u(rng)};
    const double ups = terminal_time(p);
    std::vector<double> sw;
    double t = 0.0;
    while (true) {
      t += 0.1 * ups * u(rng) + 1e-3;
      if (t >= 0.95 * ups) break;
      sw.push_back(t);
    }
    const SwitchingSignal s = make_signal(sw, 0.95 * ups, {1, 2, 3}, {2});
    const double a = 0.3 * ups * u(rng), b = a + (0.95 * ups - a) * u(rng);
    double ref = 0.0;
    std::vector<double> cuts{a};
    for (double x : sw)
      if (x > a && x < b) cuts.push_back(x);
    cuts.push_back(b);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
      if (s.mode_at(mid) == 2)
        ref += oracle::quad([&](double x) { return gain(p, x, 0.0); }, cuts[i], cuts[i + 1], 1e-13);
    }
    const double got = unstable_activation(s, p, a, b);
    CHECK(std::abs(got - ref) <= 1e-8 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("activation validation matches the analytic crossing") {
  const AatParams aat{2, 2};
  // (1 - 1/tau_a) omega = T0 gives omega = 4, so the window may last until 10(1 - e^-0.4).
  const double crossing = oracle::bisect(
      [&](double t) { return (1 - 1 / aat.tau_a) * dilate(kP, t, 0.0) - aat.T0; }, 0.1, 9.0);
  CHECK(crossing == doctest::Approx(10 * (1 - std::exp(-0.4))).epsilon(1e-10));
  CHECK(crossing == doctest::Approx(3.297).epsilon(1e-3));
  CHECK(validate_bu_aat(make_signal({}, crossing - 1e-6, {3}, {3}), kP, aat).pass);
  CHECK_FALSE(validate_bu_aat(make_signal({}, crossing + 1e-3, {3}, {3}), kP, aat).pass);
  const ValidationReport bad = validate_bu_aat(make_signal({}, 5.0, {3}, {3}), kP, aat);
  CHECK_FALSE(bad.pass);
  CHECK(bad.witness_t1 == 0.0);
  CHECK(bad.witness_t2 == 5.0);
  const ValidationReport stable = validate_bu_aat(make_signal({1, 2}, 3), kP, aat);
  CHECK(stable.pass);
  CHECK(stable.min_slack >= 2.0);
}

TEST_CASE("threshold-triggered generation switches every tau_d dilated units") {
  const AdtParams adt{0.7, 1};
  GeneratorPolicy pol;
  const GeneratedSignal g = generate_signal(kP, adt, std::nullopt, pol, 9.9);
  REQUIRE(g.signal.switch_count() > 5);
  for (std::size_t i = 0; i < g.signal.switch_count(); ++i)
    CHECK(g.signal.start_times[i + 1] == doctest::Approx(contract(kP, 0.7 * static_cast<double>(i + 1))).epsilon(1e-12));
}

TEST_CASE("generation is deterministic and sound") {
  const AdtParams adt{0.3129, 3};
  for (auto sel : {ModeSelection::cyclic, ModeSelection::uniform}) {
    GeneratorPolicy pol;
    pol.modes = {1, 2, 3};
    pol.selection = sel;
    pol.trigger = SwitchTrigger::randomized;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      pol.seed = seed;
      const GeneratedSignal a = generate_signal(kP, adt, std::nullopt, pol, 9.99);
      const GeneratedSignal b = generate_signal(kP, adt, std::nullopt, pol, 9.99);
      CHECK(a.signal.start_times == b.signal.start_times);
      CHECK(a.signal.modes == b.signal.modes);
      CHECK(validate_bu_adt(a.signal, kP, adt).pass);
      for (double tau : a.tau_before) {
        CHECK(tau >= 1.0 - 1e-12);
        CHECK(tau <= adt.N0 + 1e-12);
      }
    }
  }
}

TEST_CASE("generation with an activation budget respects both conditions") {
  const AdtParams adt{1, 1.5};
  const AatParams aat{2, 2};
  GeneratorPolicy pol;
  pol.modes = {1, 2, 3};
  pol.unstable_modes = {3};
  for (auto trig : {SwitchTrigger::at_dwell_threshold, SwitchTrigger::randomized}) {
    pol.trigger = trig;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      pol.seed = seed;
      const GeneratedSignal g = generate_signal(kP, adt, aat, pol, 9.99);
      CHECK(validate_bu_adt(g.signal, kP, adt).pass);
      CHECK(validate_bu_aat(g.signal, kP, aat).pass);
      for (double rho : g.rho_before) {
        CHECK(rho >= -1e-12);
        CHECK(rho <= aat.T0 + 1e-12);
      }
    }
  }
}

TEST_CASE("explicit plans that break the automata are refused") {
  const AdtParams adt{1, 1};
  CHECK_THROWS_AS(realize_plan(kP, adt, std::nullopt, {{1, 0.5}, {2, 1.0}}, {}), InfeasiblePolicy);
  CHECK_NOTHROW(realize_plan(kP, adt, std::nullopt, {{1, 1.0}, {2, 1.0}}, {}));
  CHECK_THROWS_AS(realize_plan(kP, adt, AatParams{2, 1}, {{3, 3.0}, {1, 1.0}}, {3}), InfeasiblePolicy);
  const GeneratedSignal ok = realize_plan(kP, adt, AatParams{2, 1}, {{3, 2.0}, {1, 1.0}}, {3});
  CHECK(ok.signal.switch_count() == 1);
  CHECK(validate_bu_aat(ok.signal, kP, AatParams{2, 1}).pass);
}

TEST_CASE("signal structure checks") {
  SwitchingSignal s = make_signal({1, 2}, 3);
  CHECK_NOTHROW(s.validate(10));
  CHECK_THROWS(s.validate(2.5));
  s.modes[1] = 1;
  CHECK_THROWS(s.validate(10));
  CHECK(make_signal({1, 2}, 3).mode_at(1.0) == 2);
  const JumpSchedule js = make_signal({1, 2}, 3).schedule();
  CHECK(js.times == std::vector<double>{1, 2});
  CHECK(js.modes == std::vector<int>{2, 1});
}
