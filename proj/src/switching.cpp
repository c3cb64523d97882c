#include "pthybrid/switching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace pth {

namespace {

bool contains(const std::vector<int>& v, int q) { return std::find(v.begin(), v.end(), q) != v.end(); }

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// min over i <= j of (g[j] - g[i]); ties keep the earliest j, then the latest i.
struct PairMin {
  double value = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
};

PairMin min_forward_difference(const std::vector<double>& g) {
  PairMin best;
  if (g.empty()) return best;
  best.value = std::numeric_limits<double>::infinity();
  std::size_t arg_max = 0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (g[j] >= g[arg_max]) arg_max = j;
    const double d = g[j] - g[arg_max];
    if (d < best.value) best = {d, arg_max, j};
  }
  return best;
}

}  // namespace

void SwitchingSignal::validate(double upsilon) const {
  if (start_times.empty()) throw std::invalid_argument("switching signal has no pieces");
  if (start_times.size() != modes.size()) throw std::invalid_argument("one mode per piece is required");
  if (start_times.front() != 0.0) throw std::invalid_argument("first piece must start at 0");
  for (std::size_t i = 1; i < start_times.size(); ++i) {
    if (!(start_times[i] > start_times[i - 1]))
      throw std::invalid_argument("piece start times must increase strictly");
    if (modes[i] == modes[i - 1]) throw std::invalid_argument("consecutive pieces share a mode");
  }
  if (!(end_time > start_times.back())) throw std::invalid_argument("end_time must follow the last start");
  if (end_time > upsilon) throw DomainError("signal extends past the terminal time");
  for (int q : stable_modes)
    if (contains(unstable_modes, q)) throw std::invalid_argument("mode listed as stable and unstable");
  if (!stable_modes.empty() || !unstable_modes.empty())
    for (int q : modes)
      if (!contains(stable_modes, q) && !contains(unstable_modes, q))
        throw std::invalid_argument("mode " + std::to_string(q) + " missing from the Q_s/Q_u partition");
}

bool SwitchingSignal::is_unstable(int q) const { return contains(unstable_modes, q); }

int SwitchingSignal::mode_at(double t) const {
  const auto it = std::upper_bound(start_times.begin(), start_times.end(), t);
  if (it == start_times.begin()) throw std::out_of_range("time before the signal starts");
  return modes[static_cast<std::size_t>(it - start_times.begin()) - 1];
}

JumpSchedule SwitchingSignal::schedule() const {
  JumpSchedule js;
  js.q0 = modes.front();
  js.times.assign(start_times.begin() + 1, start_times.end());
  js.modes.assign(modes.begin() + 1, modes.end());
  return js;
}

void AdtParams::validate() const {
  if (!(tau_d > 0.0)) throw std::invalid_argument("tau_d must be positive");
  if (!(N0 >= 1.0)) throw std::invalid_argument("N0 must be >= 1");
}

void AatParams::validate() const {
  if (!(tau_a > 1.0)) throw std::invalid_argument("tau_a must exceed 1");
  if (!(T0 >= 0.0)) throw std::invalid_argument("T0 must be nonnegative");
}

std::size_t count_switches(const SwitchingSignal& signal, double t1, double t2) {
  if (!(t1 >= 0.0 && t1 <= t2 && t2 <= signal.end_time))
    throw std::out_of_range("count_switches needs 0 <= t1 <= t2 <= end_time");
  std::size_t n = 0;
  for (std::size_t i = 1; i < signal.start_times.size(); ++i)
    if (signal.start_times[i] > t1 && signal.start_times[i] <= t2) ++n;
  return n;
}

double bu_adt_bound(const BlowUpParams& params, const AdtParams& adt, double t1, double t2) {
  params.validate();
  adt.validate();
  if (!(t1 >= 0.0 && t1 <= t2)) throw DomainError("bu_adt_bound needs 0 <= t1 <= t2");
  const double b = gain(params, t2, 0.0);
  const double a = gain(params, t1, 0.0);
  return omega(params, b, a) / adt.tau_d + adt.N0;
}

ValidationReport validate_bu_adt(const SwitchingSignal& signal, const BlowUpParams& params,
                                 const AdtParams& adt) {
  params.validate();
  adt.validate();
  const double ups = terminal_time(params);
  signal.validate(ups);
  ValidationReport rep;
  rep.min_slack = adt.N0;
  rep.witness_t1 = 0.0;
  rep.witness_t2 = signal.end_time;
  const std::size_t m = signal.switch_count();
  if (m == 0) return rep;

  // With t1 just below switch i and t2 at switch j, the count is j - i + 1 while
  // the bound tends to (s_j - s_i)/tau_d + N0; these pairs bound the slack.
  std::vector<double> s(m), g(m);
  for (std::size_t i = 0; i < m; ++i) {
    s[i] = dilate(params, signal.start_times[i + 1], 0.0);
    g[i] = s[i] / adt.tau_d - static_cast<double>(i);
  }
  const PairMin pm = min_forward_difference(g);
  const double pair_slack = adt.N0 - 1.0 + pm.value;
  if (pair_slack < rep.min_slack) {
    rep.min_slack = pair_slack;
    const double wi = signal.start_times[pm.i + 1];
    const double prev = signal.start_times[pm.i];
    const double count = static_cast<double>(pm.j - pm.i + 1);
    const double s_target = s[pm.j] - adt.tau_d * (count - adt.N0);
    const double lo = std::max(prev, s_target > 0.0 ? contract(params, s_target) : 0.0);
    rep.witness_t1 = lo < wi ? 0.5 * (lo + wi) : prev;
    rep.witness_t2 = signal.start_times[pm.j + 1];
  }
  rep.pass = rep.min_slack >= -kValidationTolerance;
  return rep;
}

double unstable_activation(const SwitchingSignal& signal, const BlowUpParams& params, double t1,
                           double t2) {
  params.validate();
  if (!(t1 >= 0.0 && t1 <= t2 && t2 <= signal.end_time))
    throw std::out_of_range("unstable_activation needs 0 <= t1 <= t2 <= end_time");
  double total = 0.0;
  for (std::size_t p = 0; p < signal.start_times.size(); ++p) {
    if (!signal.is_unstable(signal.modes[p])) continue;
    const double a = signal.start_times[p];
    const double b = p + 1 < signal.start_times.size() ? signal.start_times[p + 1] : signal.end_time;
    const double lo = std::max(a, t1), hi = std::min(b, t2);
    if (hi > lo) total += dilate(params, hi, 0.0) - dilate(params, lo, 0.0);
  }
  return total;
}

ValidationReport validate_bu_aat(const SwitchingSignal& signal, const BlowUpParams& params,
                                 const AatParams& aat) {
  params.validate();
  aat.validate();
  signal.validate(terminal_time(params));
  // h(s) = s/tau_a - A(s) is piecewise linear, so its extreme forward drops
  // occur between piece boundaries.
  std::vector<double> bt(signal.start_times);
  bt.push_back(signal.end_time);
  std::vector<double> h(bt.size());
  double activation = 0.0;
  double s_prev = 0.0;
  for (std::size_t i = 0; i < bt.size(); ++i) {
    const double s = dilate(params, bt[i], 0.0);
    if (i > 0 && signal.is_unstable(signal.modes[i - 1])) activation += s - s_prev;
    h[i] = s / aat.tau_a - activation;
    s_prev = s;
  }
  const PairMin pm = min_forward_difference(h);
  ValidationReport rep;
  rep.min_slack = aat.T0 + pm.value;
  rep.witness_t1 = bt[pm.i];
  rep.witness_t2 = bt[pm.j];
  rep.pass = rep.min_slack >= -kValidationTolerance;
  return rep;
}

AdtClosedForms bu_adt_closed_forms(const BlowUpParams& params, const AdtParams& adt, double t1,
                                   double t2) {
  AdtClosedForms out;
  out.omega_form = bu_adt_bound(params, adt, t1, t2);
  const double ups = terminal_time(params);
  if (unit_order(params)) {
    out.log_form = (params.T / adt.tau_d) * std::log((ups - t1) / (ups - t2)) + adt.N0;
    return out;
  }
  const double kr = std::round(params.k);
  if (std::abs(params.k - kr) > 1e-12 || kr < 2.0) return out;
  const int k = static_cast<int>(kr);
  const double gamma = std::pow(params.mu0, (2.0 - kr) / kr) / adt.tau_d *
                       std::pow(params.T * params.T / ((ups - t2) * (ups - t1)), kr - 1.0);
  double poly = t2 - t1;
  double binom = 1.0;  // C(k-1, l), built incrementally
  for (int l = 1; l <= k - 1; ++l) {
    binom = binom * static_cast<double>(k - l) / static_cast<double>(l);
    if (l < 2) continue;
    const double sign = (l % 2 == 1) ? 1.0 : -1.0;
    const double c = sign * binom / static_cast<double>(k - 1) * std::pow(ups, 1.0 - l);
    poly += c * (std::pow(t2, l) - std::pow(t1, l));
  }
  out.binomial_form = gamma * poly + adt.N0;
  return out;
}

TimerConfig timers_for(const AdtParams& adt, const std::optional<AatParams>& aat,
                       const std::vector<int>& unstable_modes, double initial_tau) {
  TimerConfig tc;
  tc.tau_d = adt.tau_d;
  tc.N0 = adt.N0;
  tc.tau0 = initial_tau;
  tc.unstable = unstable_modes;
  if (aat) {
    tc.has_rho = true;
    tc.tau_a = aat->tau_a;
    tc.T0 = aat->T0;
    tc.rho0 = aat->T0;
  }
  return tc;
}

namespace {

struct Timers {
  double tau;
  double rho;
};

Timers advance_timers(const AdtParams& adt, const std::optional<AatParams>& aat, Timers in,
                      bool unstable, double dwell) {
  Timers out;
  out.tau = std::min(adt.N0, in.tau + dwell / adt.tau_d);
  out.rho = in.rho;
  if (aat) {
    if (unstable)
      out.rho = in.rho - dwell * (1.0 - 1.0 / aat->tau_a);
    else
      out.rho = std::min(aat->T0, in.rho + dwell / aat->tau_a);
  }
  return out;
}

std::vector<int> stable_complement(const std::vector<int>& modes, const std::vector<int>& unstable) {
  std::vector<int> out;
  for (int q : modes)
    if (!contains(unstable, q) && !contains(out, q)) out.push_back(q);
  return out;
}

}  // namespace

GeneratedSignal generate_signal(const BlowUpParams& params, const AdtParams& adt,
                                const std::optional<AatParams>& aat, const GeneratorPolicy& policy,
                                double horizon) {
  params.validate();
  adt.validate();
  if (aat) aat->validate();
  if (policy.modes.size() < 2) throw std::invalid_argument("generator needs at least two modes");
  if (!contains(policy.modes, policy.initial_mode))
    throw std::invalid_argument("initial mode is not in the mode set");
  if (policy.initial_tau < 0.0 || policy.initial_tau > adt.N0)
    throw std::invalid_argument("initial tau must lie in [0, N0]");
  if (!(policy.min_gap > 0.0)) throw std::invalid_argument("min_gap must be positive");
  const double ups = terminal_time(params);
  if (!(horizon > 0.0 && horizon < ups)) throw DomainError("generator horizon must lie in (0, Upsilon)");

  const double s_h = dilate(params, horizon, 0.0);
  const double gap = policy.min_gap * adt.tau_d;
  const double drain = aat ? 1.0 - 1.0 / aat->tau_a : 1.0;
  const auto& Qu = policy.unstable_modes;
  std::mt19937_64 rng(policy.seed);

  GeneratedSignal out;
  out.signal.start_times = {0.0};
  out.signal.modes = {policy.initial_mode};
  out.signal.end_time = horizon;
  out.signal.unstable_modes = Qu;
  out.signal.stable_modes = stable_complement(policy.modes, Qu);

  auto base_dwell = [&](double tau) { return std::max((1.0 - tau) * adt.tau_d, gap); };
  // rho needed to sit in an unstable mode for the minimal dwell.
  auto entry_ok = [&](int q, const Timers& at_switch) {
    if (!aat || !contains(Qu, q)) return true;
    return base_dwell(at_switch.tau - 1.0) * drain <= at_switch.rho + 1e-12;
  };

  double s = 0.0;
  int q = policy.initial_mode;
  Timers tm{policy.initial_tau, aat ? aat->T0 : 0.0};
  if (!entry_ok(q, Timers{tm.tau + 1.0, tm.rho}))
    throw InfeasiblePolicy("initial unstable mode exceeds the activation budget");

  std::size_t cyc = static_cast<std::size_t>(
      std::find(policy.modes.begin(), policy.modes.end(), q) - policy.modes.begin());
  const double extend_step = 0.05 * adt.tau_d;

  while (true) {
    const bool unstable = contains(Qu, q);
    double dwell = base_dwell(tm.tau);
    if (policy.trigger == SwitchTrigger::randomized)
      dwell += uniform01(rng) * policy.max_extra_wait * adt.tau_d;
    if (unstable && aat) dwell = std::min(dwell, std::max(base_dwell(tm.tau), tm.rho / drain));

    // Pick a successor, lingering in a stable mode until one can be entered.
    int next = 0;
    Timers end{};
    for (int attempt = 0;; ++attempt) {
      end = advance_timers(adt, aat, tm, unstable, dwell);
      if (std::abs(end.tau - 1.0) < 1e-12) end.tau = std::max(end.tau, 1.0);
      std::vector<int> candidates;
      if (policy.selection == ModeSelection::cyclic) {
        candidates.push_back(policy.modes[(cyc + 1) % policy.modes.size()]);
      } else {
        for (int c : policy.modes)
          if (c != q && entry_ok(c, end)) candidates.push_back(c);
      }
      if (!candidates.empty() && entry_ok(candidates.front(), end)) {
        if (policy.selection == ModeSelection::cyclic)
          next = candidates.front();
        else
          next = candidates[std::min(candidates.size() - 1,
                                     static_cast<std::size_t>(uniform01(rng) *
                                                              static_cast<double>(candidates.size())))];
        break;
      }
      if (unstable || attempt > 100000)
        throw InfeasiblePolicy("no admissible successor for mode " + std::to_string(q) +
                               " within the activation budget");
      if (end.tau >= adt.N0 && (!aat || end.rho >= aat->T0))
        throw InfeasiblePolicy("activation budget too small to ever enter the next unstable mode");
      dwell += extend_step;
    }
    if (end.rho < 0.0) end.rho = 0.0;

    const double s_next = s + dwell;
    if (s_next >= s_h) break;
    const double t_next = contract(params, s_next);
    if (!(t_next > out.signal.start_times.back()) || !(t_next < horizon)) break;

    out.dilated_switch_times.push_back(s_next);
    out.tau_before.push_back(end.tau);
    out.rho_before.push_back(end.rho);
    out.signal.start_times.push_back(t_next);
    out.signal.modes.push_back(next);
    if (policy.selection == ModeSelection::cyclic) cyc = (cyc + 1) % policy.modes.size();
    tm = {end.tau - 1.0, end.rho};
    q = next;
    s = s_next;
  }
  return out;
}

GeneratedSignal realize_plan(const BlowUpParams& params, const AdtParams& adt,
                             const std::optional<AatParams>& aat, const std::vector<DwellRequest>& plan,
                             const std::vector<int>& unstable_modes, double initial_tau) {
  params.validate();
  adt.validate();
  if (aat) aat->validate();
  if (plan.empty()) throw std::invalid_argument("empty dwell plan");
  GeneratedSignal out;
  Timers tm{initial_tau, aat ? aat->T0 : 0.0};
  double s = 0.0;
  std::vector<int> modes;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& req = plan[i];
    if (!(req.dwell > 0.0)) throw std::invalid_argument("dwell must be positive");
    if (i > 0 && req.mode == plan[i - 1].mode) throw std::invalid_argument("consecutive dwells share a mode");
    if (!contains(modes, req.mode)) modes.push_back(req.mode);
    const bool unstable = contains(unstable_modes, req.mode);
    const Timers end = advance_timers(adt, aat, tm, unstable, req.dwell);
    if (aat && end.rho < -1e-12)
      throw InfeasiblePolicy("dwell " + std::to_string(i) + " in unstable mode " +
                             std::to_string(req.mode) + " drives rho below zero");
    s += req.dwell;
    if (i + 1 < plan.size()) {
      if (end.tau < 1.0 - 1e-12)
        throw InfeasiblePolicy("switch after dwell " + std::to_string(i) + " requested with tau = " +
                               std::to_string(end.tau) + " < 1");
      out.dilated_switch_times.push_back(s);
      out.tau_before.push_back(end.tau);
      out.rho_before.push_back(end.rho);
      tm = {end.tau - 1.0, std::max(0.0, end.rho)};
    }
  }
  out.signal.start_times = {0.0};
  out.signal.modes = {plan.front().mode};
  for (std::size_t i = 0; i < out.dilated_switch_times.size(); ++i) {
    out.signal.start_times.push_back(contract(params, out.dilated_switch_times[i]));
    out.signal.modes.push_back(plan[i + 1].mode);
  }
  out.signal.end_time = contract(params, s);
  out.signal.unstable_modes = unstable_modes;
  out.signal.stable_modes = stable_complement(modes, unstable_modes);
  out.signal.validate(terminal_time(params));
  return out;
}

}  // namespace pth
