#include "pthybrid/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pthybrid/kernels.hpp"

namespace pth {

const char* to_string(TimeScale s) { return s == TimeScale::original ? "original" : "dilated"; }

TimeScale time_scale_from_string(const std::string& s) {
  if (s == "original") return TimeScale::original;
  if (s == "dilated") return TimeScale::dilated;
  throw std::invalid_argument("unknown time scale '" + s + "' (expected original|dilated)");
}

const char* to_string(Method m) { return m == Method::rk4 ? "rk4" : "rk45"; }

Method method_from_string(const std::string& s) {
  if (s == "rk4") return Method::rk4;
  if (s == "rk45") return Method::rk45;
  throw std::invalid_argument("unknown solver '" + s + "' (expected rk4|rk45)");
}

void HybridTimeDomain::validate() const {
  if (intervals.empty()) throw std::invalid_argument("hybrid time domain is empty");
  if (intervals.front().t_start != 0.0 || intervals.front().j != 0)
    throw std::invalid_argument("hybrid time domain must start at (0, 0)");
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& iv = intervals[i];
    if (!(iv.t_end >= iv.t_start)) throw std::invalid_argument("interval with t_end < t_start");
    if (i > 0) {
      if (iv.j != intervals[i - 1].j + 1) throw std::invalid_argument("jump counter must step by 1");
      if (iv.t_start != intervals[i - 1].t_end)
        throw std::invalid_argument("consecutive intervals must share their boundary time");
    }
  }
}

HtdStats htd_stats(const HybridTimeDomain& domain) {
  domain.validate();
  HtdStats st;
  st.sup_t = domain.intervals.back().t_end;
  st.sup_j = domain.intervals.back().j;
  st.length = st.sup_t + static_cast<double>(st.sup_j);
  return st;
}

void SolverConfig::validate() const {
  if (method == Method::rk4 && !(step > 0.0)) throw std::invalid_argument("rk4 step must be positive");
  if (method == Method::rk45 && !(rtol > 0.0 && atol > 0.0))
    throw std::invalid_argument("rk45 tolerances must be positive");
  if (!(eps_term > 0.0 && eps_term < 1.0)) throw std::invalid_argument("eps_term must lie in (0, 1)");
  if (!(s_max > 0.0)) throw std::invalid_argument("s_max must be positive");
}

namespace {

void check_finite(const Vec& y, double time) {
  if (!y.allFinite())
    throw NonFiniteState("non-finite state at time " + std::to_string(time));
}

class Integrator {
 public:
  Integrator(const OdeRhs& rhs, const SolverConfig& cfg) : rhs_(rhs), cfg_(cfg) {}

  // Advances y from t to target, landing exactly on target.
  void advance(double& t, Vec& y, double target) {
    if (target <= t) return;
    if (cfg_.method == Method::rk4)
      advance_rk4(t, y, target);
    else
      advance_rk45(t, y, target);
  }

 private:
  void advance_rk4(double& t, Vec& y, double target) {
    const double span = target - t;
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(span / cfg_.step - 1e-9)));
    const double h = span / static_cast<double>(n);
    const double t0 = t;
    Vec k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size());
    for (std::size_t i = 0; i < n; ++i) {
      const double ti = t;
      rhs_(ti, y, k1);
      rhs_(ti + 0.5 * h, y + 0.5 * h * k1, k2);
      rhs_(ti + 0.5 * h, y + 0.5 * h * k2, k3);
      rhs_(ti + h, y + h * k3, k4);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t = (i + 1 == n) ? target : t0 + h * static_cast<double>(i + 1);
      check_finite(y, t);
      count_step();
    }
  }

  double error_norm(const Vec& y, const Vec& ynew, const Vec& err) const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = cfg_.atol + cfg_.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      const double e = err[i] / sc;
      acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(1, y.size())));
  }

  double initial_step(double t, const Vec& y, const Vec& f0, double span) const {
    double d0 = 0.0, d1 = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = cfg_.atol + cfg_.rtol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = std::sqrt(d0 / static_cast<double>(y.size()));
    d1 = std::sqrt(d1 / static_cast<double>(y.size()));
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    (void)t;
    return std::min(h, span);
  }

  void advance_rk45(double& t, Vec& y, double target) {
    // Dormand-Prince 5(4).
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                     b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    const auto n = y.size();
    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ynew(n), err(n);
    rhs_(t, y, k1);
    if (h_ <= 0.0) h_ = initial_step(t, y, k1, target - t);
    while (t < target) {
      bool last = false;
      double h = h_;
      if (t + h >= target || target - (t + h) < 1e-12 * std::max(1.0, std::abs(target))) {
        h = target - t;
        last = true;
      }
      if (h < 1e-14 * std::max(1.0, std::abs(t)))
        throw StepFailure("step size underflow at time " + std::to_string(t));
      rhs_(t + c2 * h, y + h * (a21 * k1), k2);
      rhs_(t + c3 * h, y + h * (a31 * k1 + a32 * k2), k3);
      rhs_(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3), k4);
      rhs_(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
      rhs_(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), k6);
      ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const double tnew = last ? target : t + h;
      rhs_(tnew, ynew, k7);
      err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double en = error_norm(y, ynew, err);
      if (!std::isfinite(en)) en = 1e10;
      count_step();
      if (en <= 1.0) {
        t = tnew;
        y = ynew;
        k1 = k7;
        check_finite(y, t);
        const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
        // A short landing step says nothing about the natural step size.
        if (!last || h >= h_) h_ = h * fac;
      } else {
        h_ = h * std::clamp(0.9 * std::pow(en, -0.2), 0.1, 0.9);
      }
    }
  }

  void count_step() {
    if (++steps_ > cfg_.max_steps) throw StepFailure("step budget exhausted");
  }

  const OdeRhs& rhs_;
  const SolverConfig& cfg_;
  double h_ = 0.0;
  std::size_t steps_ = 0;
};

}  // namespace

FlowSegment integrate_ode(const OdeRhs& rhs, const Vec& y0, double a, double b,
                          const SolverConfig& config, const std::vector<double>& sample_times) {
  config.validate();
  if (!(b > a)) throw std::invalid_argument("integration interval must satisfy b > a");
  check_finite(y0, a);
  FlowSegment seg;
  seg.time.push_back(a);
  seg.state.push_back(y0);
  Integrator integ(rhs, config);
  double t = a;
  Vec y = y0;
  double prev = a;
  for (double st : sample_times) {
    if (st < prev || st > b) throw std::invalid_argument("sample times must be sorted and inside [a, b]");
    prev = st;
    if (st <= a || st >= b) continue;
    integ.advance(t, y, st);
    seg.time.push_back(st);
    seg.state.push_back(y);
  }
  integ.advance(t, y, b);
  seg.time.push_back(b);
  seg.state.push_back(y);
  return seg;
}

FlowSegment integrate_flow(const HybridSystemDef& system, const Vec& x0, double a, double b,
                           const SolverConfig& config, std::size_t samples) {
  if (!system.flow_map) throw std::invalid_argument("system has no flow map");
  if (static_cast<std::size_t>(x0.size()) != system.n)
    throw std::invalid_argument("initial state has the wrong dimension");
  const Vec u0 = Vec::Zero(static_cast<Eigen::Index>(system.input_dim));
  OdeRhs rhs = [&](double time, const Vec& y, Vec& dy) {
    FlowContext ctx;
    ctx.t = ctx.s = time;
    const Vec u = system.input ? system.input(time) : u0;
    system.flow_map(y, u, ctx, dy);
  };
  std::vector<double> grid;
  for (std::size_t i = 1; i + 1 < samples; ++i)
    grid.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(samples - 1));
  return integrate_ode(rhs, x0, a, b, config, grid);
}

Vec apply_jump(const HybridSystemDef& system, const Vec& x, const JumpContext& ctx) {
  if (system.jump_guard && !system.jump_guard(x, ctx))
    throw GuardViolation("jump requested outside the jump set");
  return system.jump_map ? system.jump_map(x, ctx) : x;
}

bool TimerConfig::is_unstable(int q) const {
  return std::find(unstable.begin(), unstable.end(), q) != unstable.end();
}

std::size_t HybridArc::jump_count() const { return domain.intervals.empty() ? 0 : domain.intervals.back().j; }

double HybridArc::t_of(std::size_t i) const {
  const double v = samples.at(i).time;
  return scale == TimeScale::original ? v : contract(params, v);
}

double HybridArc::s_of(std::size_t i) const {
  const double v = samples.at(i).time;
  return scale == TimeScale::dilated ? v : dilate(params, v, 0.0);
}

namespace {

constexpr double kTimerSlack = 1e-9;

struct TimerState {
  double s_start = 0.0;
  double tau_start = 0.0;
  double rho_start = 0.0;
  bool unstable = false;
};

double tau_at(const TimerConfig& tc, const TimerState& st, double s) {
  return std::min(tc.N0, st.tau_start + (s - st.s_start) / tc.tau_d);
}

double rho_at(const TimerConfig& tc, const TimerState& st, double s) {
  if (!tc.has_rho) return 0.0;
  const double ds = s - st.s_start;
  if (st.unstable) return st.rho_start + ds * (1.0 / tc.tau_a - 1.0);
  return std::min(tc.T0, st.rho_start + ds / tc.tau_a);
}

}  // namespace

HybridArc simulate(const HybridSystemDef& system, const Vec& x0, const JumpSchedule& schedule,
                   double horizon, TimeScale scale, const BlowUpParams& params,
                   const TimerConfig& timers, const SolverConfig& config, const SampleSpec& samples) {
  params.validate();
  config.validate();
  if (!system.flow_map) throw std::invalid_argument("system has no flow map");
  if (static_cast<std::size_t>(x0.size()) != system.n)
    throw std::invalid_argument("initial state has the wrong dimension");
  if (!(timers.tau_d > 0.0) || !(timers.N0 >= 1.0) || timers.tau0 < 0.0 || timers.tau0 > timers.N0)
    throw std::invalid_argument("invalid dwell timer configuration");
  if (timers.has_rho && (!(timers.tau_a > 1.0) || timers.T0 < 0.0 || timers.rho0 < 0.0 ||
                         timers.rho0 > timers.T0))
    throw std::invalid_argument("invalid activation timer configuration");

  const double ups = terminal_time(params);
  if (!(horizon > 0.0)) throw ScheduleError("horizon must be positive");
  if (horizon > (1.0 - config.eps_term) * ups)
    throw DomainError("horizon " + std::to_string(horizon) + " exceeds (1 - eps_term) * Upsilon = " +
                      std::to_string((1.0 - config.eps_term) * ups));
  if (schedule.modes.size() != schedule.times.size())
    throw ScheduleError("schedule needs one mode per jump time");
  for (std::size_t i = 0; i < schedule.times.size(); ++i) {
    const double ti = schedule.times[i];
    if (!(ti > 0.0) || !(ti < horizon)) throw ScheduleError("jump time outside (0, horizon)");
    if (i > 0 && !(ti > schedule.times[i - 1])) throw ScheduleError("jump times must increase strictly");
  }
  const double s_horizon = dilate(params, horizon, config.eps_term);
  if (s_horizon > config.s_max) throw DomainError("dilated horizon exceeds s_max");

  const bool orig = scale == TimeScale::original;
  const std::size_t n = system.n;
  const Vec u_zero = Vec::Zero(static_cast<Eigen::Index>(system.input_dim));
  const double k = params.k, T = params.T;

  auto native_of_t = [&](double t) { return orig ? t : dilate(params, t, config.eps_term); };
  auto s_of_native = [&](double v) { return orig ? dilate(params, v, config.eps_term) : v; };
  auto t_of_native = [&](double v) { return orig ? v : contract(params, v); };

  std::vector<double> bounds{0.0};
  for (double ti : schedule.times) bounds.push_back(native_of_t(ti));
  bounds.push_back(orig ? horizon : s_horizon);

  HybridArc arc;
  arc.scale = scale;
  arc.params = params;
  arc.has_rho = timers.has_rho;

  TimerState ts;
  ts.tau_start = timers.tau0;
  ts.rho_start = timers.rho0;
  int q = schedule.q0;
  std::size_t j = 0;
  Vec y(static_cast<Eigen::Index>(n + 1));
  y.head(static_cast<Eigen::Index>(n)) = x0;
  y[static_cast<Eigen::Index>(n)] = params.mu0;

  auto push_sample = [&](double v, const Vec& yy) {
    ArcSample smp;
    smp.time = v;
    smp.j = j;
    smp.q = q;
    const double s = s_of_native(v);
    smp.tau = tau_at(timers, ts, s);
    smp.rho = rho_at(timers, ts, s);
    smp.mu = yy[static_cast<Eigen::Index>(n)];
    smp.x = yy.head(static_cast<Eigen::Index>(n));
    arc.samples.push_back(std::move(smp));
  };

  for (std::size_t seg = 0; seg + 1 < bounds.size(); ++seg) {
    const double a = bounds[seg], b = bounds[seg + 1];
    ts.unstable = timers.is_unstable(q);

    OdeRhs rhs = [&](double v, const Vec& yy, Vec& dy) {
      FlowContext ctx;
      ctx.t = t_of_native(v);
      ctx.s = s_of_native(v);
      ctx.mu = yy[static_cast<Eigen::Index>(n)];
      ctx.tau = tau_at(timers, ts, ctx.s);
      ctx.rho = rho_at(timers, ts, ctx.s);
      ctx.q = q;
      ctx.j = j;
      const Vec u = system.input ? system.input(ctx.t) : u_zero;
      Vec dx(static_cast<Eigen::Index>(n));
      system.flow_map(yy.head(static_cast<Eigen::Index>(n)), u, ctx, dx);
      dy.resize(yy.size());
      const double mu = ctx.mu;
      if (orig) {
        dy.head(static_cast<Eigen::Index>(n)) = mu * dx;
        dy[static_cast<Eigen::Index>(n)] = (k / T) * std::pow(mu, 1.0 + 1.0 / k);
      } else {
        dy.head(static_cast<Eigen::Index>(n)) = dx;
        dy[static_cast<Eigen::Index>(n)] = (k / T) * std::pow(mu, 1.0 / k);
      }
    };

    // Interior sample grid, uniform in the requested clock.
    std::vector<double> grid;
    const bool clock_dilated = samples.clock == SampleClock::dilated;
    const double ca = clock_dilated ? s_of_native(a) : t_of_native(a);
    const double cb = clock_dilated ? s_of_native(b) : t_of_native(b);
    std::size_t m = std::max<std::size_t>(1, samples.per_interval);
    if (samples.max_spacing > 0.0)
      m = std::max(m, static_cast<std::size_t>(std::ceil((cb - ca) / samples.max_spacing)));
    for (std::size_t i = 1; i < m; ++i) {
      const double c = ca + (cb - ca) * static_cast<double>(i) / static_cast<double>(m);
      double v;
      if (clock_dilated)
        v = orig ? contract(params, c) : c;
      else
        v = orig ? c : dilate(params, c, config.eps_term);
      v = std::clamp(v, a, b);
      if (!grid.empty() && v < grid.back()) v = grid.back();
      grid.push_back(v);
    }

    arc.domain.intervals.push_back({a, b, j});
    if (b > a) {
      const FlowSegment fs = integrate_ode(rhs, y, a, b, config, grid);
      // After a jump the segment's first point was recorded as the post-jump sample.
      if (seg == 0) push_sample(fs.time[0], fs.state[0]);
      for (std::size_t i = 1; i < fs.time.size(); ++i)
        push_sample(fs.time[i], fs.state[i]);
      y = fs.state.back();
    } else if (seg == 0) {
      push_sample(a, y);
    }
    if (system.flow_guard) {
      FlowContext ctx;
      ctx.q = q;
      ctx.j = j;
      if (!system.flow_guard(y.head(static_cast<Eigen::Index>(n)), ctx))
        throw GuardViolation("flow left the flow set");
    }

    if (seg + 2 < bounds.size()) {
      const double s_end = s_of_native(b);
      const double tau_end = tau_at(timers, ts, s_end);
      const double rho_end = rho_at(timers, ts, s_end);
      if (timers.enforce_guard && tau_end < 1.0 - kTimerSlack)
        throw GuardViolation("jump at time " + std::to_string(t_of_native(b)) +
                             " with dwell timer " + std::to_string(tau_end) + " < 1");
      if (timers.enforce_guard && timers.has_rho && rho_end < -kTimerSlack)
        throw GuardViolation("activation budget exhausted before time " +
                             std::to_string(t_of_native(b)));
      JumpContext jc;
      jc.q_from = q;
      jc.q_to = schedule.modes[seg];
      jc.tau = tau_end;
      jc.j = j;
      const Vec xp = apply_jump(system, y.head(static_cast<Eigen::Index>(n)), jc);
      if (static_cast<std::size_t>(xp.size()) != n) throw std::runtime_error("jump map changed dimension");
      y.head(static_cast<Eigen::Index>(n)) = xp;
      ts.s_start = s_end;
      ts.tau_start = std::max(0.0, tau_end - 1.0);
      ts.rho_start = std::max(0.0, rho_end);
      q = jc.q_to;
      ++j;
      push_sample(b, y);
    }
  }
  return arc;
}

HybridArc map_time_scale(const HybridArc& arc, const BlowUpParams& params, MapDirection direction) {
  const bool to_dilated = direction == MapDirection::dilate;
  if (to_dilated && arc.scale != TimeScale::original)
    throw std::invalid_argument("dilating an arc that is not in the original scale");
  if (!to_dilated && arc.scale != TimeScale::dilated)
    throw std::invalid_argument("contracting an arc that is not in the dilated scale");
  const double ups = terminal_time(params);
  auto map = [&](double v) {
    if (to_dilated) return dilate(params, v, 0.0);
    const double t = contract(params, v);
    if (!(t < ups)) throw DomainError("contracted time reaches the terminal time");
    return t;
  };
  HybridArc out = arc;
  out.scale = to_dilated ? TimeScale::dilated : TimeScale::original;
  out.params = params;
  for (auto& iv : out.domain.intervals) {
    iv.t_start = map(iv.t_start);
    iv.t_end = map(iv.t_end);
  }
  for (auto& smp : out.samples) smp.time = map(smp.time);
  return out;
}

std::vector<double> distances_to(const HybridArc& arc, const Vec& offset) {
  const auto dim = static_cast<std::size_t>(offset.size());
  const std::size_t count = arc.samples.size();
  std::vector<double> rows(count * dim);
  for (std::size_t i = 0; i < count; ++i) {
    const Vec& x = arc.samples[i].x;
    if (static_cast<std::size_t>(x.size()) < dim) throw std::invalid_argument("offset longer than state");
    for (std::size_t d = 0; d < dim; ++d) rows[i * dim + d] = x[static_cast<Eigen::Index>(d)];
  }
  std::vector<double> out(count);
  kernels::row_distances(rows.data(), count, dim, offset.data(), out.data());
  return out;
}

}  // namespace pth
