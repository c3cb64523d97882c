#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pthybrid/blowup.hpp"

namespace pth {

using Vec = Eigen::VectorXd;

enum class TimeScale { original, dilated };

const char* to_string(TimeScale s);
TimeScale time_scale_from_string(const std::string& s);

struct StepFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFiniteState : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GuardViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ScheduleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct HybridTime {
  double t = 0.0;
  std::size_t j = 0;
};

struct HybridInterval {
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t j = 0;
};

struct HybridTimeDomain {
  std::vector<HybridInterval> intervals;

  void validate() const;
};

struct HtdStats {
  double sup_t = 0.0;
  std::size_t sup_j = 0;
  double length = 0.0;
};

HtdStats htd_stats(const HybridTimeDomain& domain);

/// Everything a mode's vector field may read besides the state.
struct FlowContext {
  double t = 0.0;   // original time
  double s = 0.0;   // dilated time
  double mu = 1.0;  // gain state
  double tau = 0.0;
  double rho = 0.0;
  int q = 1;
  std::size_t j = 0;
};

struct JumpContext {
  int q_from = 1;
  int q_to = 1;
  double tau = 1.0;
  std::size_t j = 0;
};

/// Hybrid system data. `flow_map` is the dilated-time field f_q; the
/// original-time field is mu * f_q.
struct HybridSystemDef {
  std::size_t n = 0;
  std::size_t input_dim = 0;
  std::function<void(const Vec& x, const Vec& u, const FlowContext& ctx, Vec& dx)> flow_map;
  std::function<Vec(const Vec& x, const JumpContext& ctx)> jump_map;
  std::function<bool(const Vec& x, const FlowContext& ctx)> flow_guard;
  std::function<bool(const Vec& x, const JumpContext& ctx)> jump_guard;
  std::function<Vec(double t)> input;
};

enum class Method { rk4, rk45 };

const char* to_string(Method m);
Method method_from_string(const std::string& s);

struct SolverConfig {
  Method method = Method::rk45;
  double step = 1e-3;  // rk4 step, native time units
  double rtol = 1e-10;
  double atol = 1e-12;
  double eps_term = kDefaultEpsTerm;
  double s_max = 1e4;
  std::size_t max_steps = 50'000'000;

  void validate() const;
};

using OdeRhs = std::function<void(double time, const Vec& y, Vec& dy)>;

struct FlowSegment {
  std::vector<double> time;
  std::vector<Vec> state;
};

/// Integrates y' = rhs on [a, b], returning the state at every requested
/// sample time (which must lie in [a, b] and be nondecreasing). The endpoints
/// are always included.
FlowSegment integrate_ode(const OdeRhs& rhs, const Vec& y0, double a, double b,
                          const SolverConfig& config, const std::vector<double>& sample_times = {});

/// Flows the system's vector field literally (mu = 1, tau = rho = 0, mode 1).
FlowSegment integrate_flow(const HybridSystemDef& system, const Vec& x0, double a, double b,
                           const SolverConfig& config, std::size_t samples = 2);

Vec apply_jump(const HybridSystemDef& system, const Vec& x, const JumpContext& ctx = {});

/// Dwell-time (tau) and activation-time (rho) timers carried along the arc.
struct TimerConfig {
  double tau_d = 1.0;
  double N0 = 1.0;
  double tau0 = 0.0;
  bool has_rho = false;
  double tau_a = 2.0;
  double T0 = 0.0;
  double rho0 = 0.0;
  std::vector<int> unstable;
  bool enforce_guard = true;

  bool is_unstable(int q) const;
};

/// Jump instants in original time and the mode active after each one.
struct JumpSchedule {
  int q0 = 1;
  std::vector<double> times;
  std::vector<int> modes;
};

enum class SampleClock { original, dilated };

struct SampleSpec {
  SampleClock clock = SampleClock::dilated;
  std::size_t per_interval = 20;
  double max_spacing = 0.25;  // in clock units; 0 disables
};

struct ArcSample {
  double time = 0.0;  // in the arc's scale
  std::size_t j = 0;
  int q = 1;
  double tau = 0.0;
  double rho = 0.0;
  double mu = 1.0;
  Vec x;
};

struct HybridArc {
  TimeScale scale = TimeScale::original;
  BlowUpParams params;
  bool has_rho = false;
  HybridTimeDomain domain;
  std::vector<ArcSample> samples;

  std::size_t jump_count() const;
  /// Original and dilated time of sample i.
  double t_of(std::size_t i) const;
  double s_of(std::size_t i) const;
};

HybridArc simulate(const HybridSystemDef& system, const Vec& x0, const JumpSchedule& schedule,
                   double horizon, TimeScale scale, const BlowUpParams& params,
                   const TimerConfig& timers, const SolverConfig& config,
                   const SampleSpec& samples = {});

enum class MapDirection { dilate, contract };

HybridArc map_time_scale(const HybridArc& arc, const BlowUpParams& params, MapDirection direction);

/// |x - offset| at every sample (leading offset.size() entries of x).
std::vector<double> distances_to(const HybridArc& arc, const Vec& offset);

}  // namespace pth
