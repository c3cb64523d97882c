#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "pthybrid/hybrid.hpp"
#include "pthybrid/stability.hpp"
#include "pthybrid/switching.hpp"

namespace pth {

using Mat = Eigen::MatrixXd;

struct BuildError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A system, its certificate and the switching parameters it is meant to run under.
struct BuiltScenario {
  std::string name;
  HybridSystemDef system;
  LyapunovCertificate certificate;
  Vec set_offset;
  BlowUpParams params;
  AdtParams adt;
  std::optional<AatParams> aat;
  GeneratorPolicy policy;
  Vec x0;
  BoundSpec bound;
  std::vector<std::string> warnings;
};

// Single scalar mode, x' = -x between halvings once per dilated time unit.
BuiltScenario build_scalar_halving();
JumpSchedule scalar_halving_schedule(const BlowUpParams& params, double horizon);

enum class ConsensusCertificate { common, per_mode };

struct ConsensusSpec {
  std::size_t agents = 4;
  std::size_t dim = 2;
  Vec target;                  // x*
  std::vector<Mat> B;          // one dim x dim block per agent
  std::vector<Mat> laplacians; // one agents x agents Laplacian per mode
  std::vector<int> modes{1, 2, 3};
  double k_r = 1.0;
  double k_c = 1.0;
  BlowUpParams params{10.0, 1.0, 1.0};
  AdtParams adt{0.3129, 3.0};
  ConsensusCertificate certificate = ConsensusCertificate::common;
  std::uint64_t seed = 1;
};

ConsensusSpec default_consensus_spec();

/// Uniform draw from [-half_width, half_width]^n; consensus initial conditions use seed + index.
Vec uniform_box(std::uint64_t seed, std::size_t n, double half_width);

/// Out-degree Laplacian of the directed cycle visiting `order`.
Mat cycle_laplacian(const std::vector<int>& order, std::size_t agents);

/// Closed-loop matrices A_q = -(k_r B + k_c L_q (x) I).
std::vector<Mat> consensus_matrices(const ConsensusSpec& spec);

BuiltScenario build_consensus(const ConsensusSpec& spec);

/// Diagnostics for the per-mode certificate V_q = e' P_q e with A_q' P_q + P_q A_q = -I.
struct ConsensusLyapunovReport {
  std::vector<double> c1, c2, c3;
  double r = 1.0;
  double min_c3 = 0.0;
  double dwell_threshold = 0.0;
  double chi = 1.0;  // max_{o != q} lambda_max(P_o^-1 P_q)
};

Mat solve_lyapunov(const Mat& A, const Mat& Q);
ConsensusLyapunovReport consensus_lyapunov_report(const ConsensusSpec& spec);

struct IntermittentSpec {
  std::vector<int> stable_modes{1, 2};
  std::vector<int> unstable_modes{3};
  std::vector<int> order{1, 2, 3};
  double eta = 1.0;  // feedback gain in every stable mode
  BlowUpParams params{10.0, 1.0, 1.0};
  AdtParams adt{1.0, 1.5};
  AatParams aat{2.0, 2.0};
  double x0 = 2.0;
};

BuiltScenario build_intermittent(const IntermittentSpec& spec);

struct GameSpec {
  std::vector<Mat> A;
  std::vector<int> modes{1, 2, 3};
  double theta = 0.05;
  Vec equilibrium;
  double eta_low = 0.8;
  double eta_high = 1.2;
  double delta_eta = 0.78;
  double delta_d = 0.17;
  BlowUpParams params{10.0, 1.0, 1.0};
  AdtParams adt{1.14, 1.75};
  // When false, violated hypotheses become warnings instead of build errors.
  bool enforce = true;
  Vec x0;
};

/// The reference game with the momentum band used for the comparison figure.
GameSpec reference_game_spec();
/// A game for which every hypothesis of the momentum-reset result holds.
GameSpec tuned_game_spec();

struct GameConstants {
  std::vector<double> kappa, ell, sigma, zeta;
  double kappa_min = 0.0, ell_max = 0.0, sigma_max = 0.0, zeta_min = 0.0;
  double gamma_bar = 0.0;
  double nu_M = 0.0;
  bool eta_tuning_ok = false;
  bool dwell_tuning_ok = false;
};

GameConstants game_constants(const GameSpec& spec);
double nu_M(const GameSpec& spec);
double eta_of(const GameSpec& spec, double tau);

struct EigenvalueFloorReport {
  bool pass = true;
  double min_eigenvalue = 0.0;
  double nu_M = 0.0;
  int witness_q = 0;
  double witness_tau = 0.0;
  double witness_rho = 0.0;
};

EigenvalueFloorReport eigenvalue_floor_check(const GameSpec& spec, std::size_t grid = 50);

double reset_dwell_threshold(const GameSpec& spec);
/// Bound constants from the supplemental proof (kappa1, kappa2 only).
TheoremConstants reset_game_constants(const GameSpec& spec);

BuiltScenario build_nesmr(const GameSpec& spec);
BuiltScenario build_ptpsg(const GameSpec& spec);

/// A switching signal drawn with the scenario's policy up to `horizon`.
GeneratedSignal scenario_signal(const BuiltScenario& sc, double horizon);
/// Jump instants for a run: the signal's switches, or the fixed resets of a single-mode scenario.
JumpSchedule scenario_schedule(const BuiltScenario& sc, const SwitchingSignal& signal, double horizon);

HybridArc run_scenario(const BuiltScenario& sc, const Vec& x0, const JumpSchedule& schedule,
                       double horizon, TimeScale scale, const SolverConfig& solver,
                       const SampleSpec& samples = {});

const std::vector<std::string>& scenario_names();

}  // namespace pth
