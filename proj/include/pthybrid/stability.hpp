#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pthybrid/blowup.hpp"
#include "pthybrid/hybrid.hpp"
#include "pthybrid/switching.hpp"

namespace pth {

struct InvalidDwell : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// How the input enters the dissipation inequality: 0, 1 or mu^(-ell).
enum class InputChannel { zero, one, mu_pow };

const char* to_string(InputChannel c);

struct ModeConstants {
  int q = 1;
  bool stable = true;
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 0.0;  // decay rate, stable modes
  double c4 = 0.0;  // input gain
  double c5 = 0.0;  // growth rate, unstable modes
};

struct LyapunovCertificate {
  std::vector<ModeConstants> modes;
  double p = 2.0;
  double chi = 1.0;
  InputChannel channel = InputChannel::zero;
  double ell = 0.0;
  // |x|_A is the distance from x to this point.
  Vec set_offset;

  std::function<double(const Vec& x, double tau, int q)> V;
  std::function<Vec(const Vec& x, double tau, int q)> grad_x;
  // Partial derivative in tau; left empty when V ignores tau.
  std::function<double(const Vec& x, double tau, int q)> dV_dtau;

  void validate() const;
  const ModeConstants& mode(int q) const;
  bool has_unstable() const;
  double delta(double mu) const;
};

struct TheoremConstants {
  double r = 1.0;
  double lambda = 0.0;
  double kappa1 = 1.0;
  double kappa2 = 0.0;
  double kappa3 = 0.0;
  double delta = 0.0;  // Theorem 2 rate penalty; 0 for Theorem 1
  bool theorem2 = false;
  std::string note;
};

double ratio_r(const LyapunovCertificate& cert);

/// ln(r) / min c3 over stable modes.
double min_dwell_time(const LyapunovCertificate& cert);

struct ConditionResult {
  bool holds = false;
  double margin = 0.0;
};

ConditionResult theorem2_condition(const LyapunovCertificate& cert, double tau_d, double tau_a);

TheoremConstants theorem1_constants(const LyapunovCertificate& cert, const AdtParams& adt);
TheoremConstants theorem2_constants(const LyapunovCertificate& cert, const AdtParams& adt,
                                    const AatParams& aat);

struct CertificateSampling {
  std::uint64_t seed = 7;
  std::size_t samples = 4000;
  double box = 3.0;  // half-width of the sampling box around the set
  double mu_max = 1e3;
  double mu0 = 1.0;
  double u_max = 1.0;
  double tau_d = 1.0;
  double N0 = 1.0;
  double exclusion_radius = 1e-12;
  double tolerance = 1e-9;
  double gradient_tolerance = 1e-4;
};

struct CertificateReport {
  bool pass = true;
  double worst_margin = 0.0;
  std::string worst_check;
  Vec witness_x;
  double witness_tau = 0.0;
  int witness_q = 0;
  double sandwich_margin = 0.0;
  double flow_margin = 0.0;
  double reset_margin = 0.0;
  double gradient_error = 0.0;
  std::size_t samples = 0;
};

/// Sample-based spot check of the sandwich, flow and reset inequalities. A
/// failure is a counterexample; a pass is evidence only.
CertificateReport verify_certificate(const LyapunovCertificate& cert, const HybridSystemDef& system,
                                     const CertificateSampling& sampling);

struct BoundSpec {
  InputChannel channel = InputChannel::zero;
  double ell = 0.0;
  double p = 2.0;
  double u_sup = 0.0;
  double tolerance = 1e-6;
};

struct BoundReport {
  bool pass = true;
  double max_ratio = 0.0;
  std::size_t worst_index = 0;
  std::vector<double> distance;
  std::vector<double> bound;
};

/// Right-hand side of the prescribed-time bound at dilated time s after j jumps.
double pt_bound_value(const TheoremConstants& consts, const BlowUpParams& params, const BoundSpec& spec,
                      double s, std::size_t j, double initial_distance);

BoundReport check_pt_bound(const HybridArc& arc, const TheoremConstants& consts,
                           const BlowUpParams& params, const BoundSpec& spec, const Vec& set_offset);

}  // namespace pth
