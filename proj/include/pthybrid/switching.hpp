#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pthybrid/blowup.hpp"
#include "pthybrid/hybrid.hpp"

namespace pth {

struct InfeasiblePolicy : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Right-continuous piecewise-constant mode trace on [0, end_time).
struct SwitchingSignal {
  std::vector<double> start_times;  // first is 0
  std::vector<int> modes;
  double end_time = 0.0;
  std::vector<int> stable_modes;
  std::vector<int> unstable_modes;

  void validate(double upsilon) const;
  std::size_t switch_count() const { return start_times.empty() ? 0 : start_times.size() - 1; }
  bool is_unstable(int q) const;
  int mode_at(double t) const;
  JumpSchedule schedule() const;
};

struct AdtParams {
  double tau_d = 1.0;
  double N0 = 1.0;

  void validate() const;
};

struct AatParams {
  double tau_a = 2.0;
  double T0 = 0.0;

  void validate() const;
};

struct ValidationReport {
  bool pass = true;
  double min_slack = 0.0;
  double witness_t1 = 0.0;
  double witness_t2 = 0.0;
};

/// Slack below this is treated as zero by both validators.
inline constexpr double kValidationTolerance = 1e-9;

/// Number of switches in (t1, t2].
std::size_t count_switches(const SwitchingSignal& signal, double t1, double t2);

/// (1/tau_d) omega_k(mu(t2), mu(t1)) + N0.
double bu_adt_bound(const BlowUpParams& params, const AdtParams& adt, double t1, double t2);

ValidationReport validate_bu_adt(const SwitchingSignal& signal, const BlowUpParams& params,
                                 const AdtParams& adt);

/// Integral of mu_k over the unstable pieces inside [t1, t2]; exact.
double unstable_activation(const SwitchingSignal& signal, const BlowUpParams& params, double t1,
                           double t2);

ValidationReport validate_bu_aat(const SwitchingSignal& signal, const BlowUpParams& params,
                                 const AatParams& aat);

struct AdtClosedForms {
  double omega_form = 0.0;
  std::optional<double> log_form;       // k = 1
  std::optional<double> binomial_form;  // integer k > 1
};

AdtClosedForms bu_adt_closed_forms(const BlowUpParams& params, const AdtParams& adt, double t1,
                                   double t2);

enum class ModeSelection { cyclic, uniform };
enum class SwitchTrigger { at_dwell_threshold, randomized };

struct GeneratorPolicy {
  std::uint64_t seed = 0;
  ModeSelection selection = ModeSelection::cyclic;
  SwitchTrigger trigger = SwitchTrigger::at_dwell_threshold;
  std::vector<int> modes{1, 2};
  std::vector<int> unstable_modes;
  int initial_mode = 1;
  double initial_tau = 0.0;
  // Smallest dwell, as a fraction of tau_d, so pieces never collapse.
  double min_gap = 1e-3;
  // Upper end of the extra random wait, as a multiple of tau_d.
  double max_extra_wait = 2.0;
};

struct GeneratedSignal {
  SwitchingSignal signal;
  std::vector<double> dilated_switch_times;
  std::vector<double> tau_before;  // dwell timer right before each switch
  std::vector<double> rho_before;  // activation timer right before each switch
};

GeneratedSignal generate_signal(const BlowUpParams& params, const AdtParams& adt,
                                const std::optional<AatParams>& aat, const GeneratorPolicy& policy,
                                double horizon);

/// One requested dwell in dilated time.
struct DwellRequest {
  int mode = 1;
  double dwell = 1.0;
};

/// Runs the timers over an explicit plan; throws InfeasiblePolicy when the
/// plan asks for a switch with tau < 1 or drives rho below zero.
GeneratedSignal realize_plan(const BlowUpParams& params, const AdtParams& adt,
                             const std::optional<AatParams>& aat, const std::vector<DwellRequest>& plan,
                             const std::vector<int>& unstable_modes, double initial_tau = 0.0);

TimerConfig timers_for(const AdtParams& adt, const std::optional<AatParams>& aat,
                       const std::vector<int>& unstable_modes, double initial_tau = 0.0);

}  // namespace pth
