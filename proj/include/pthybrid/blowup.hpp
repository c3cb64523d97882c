#pragma once

#include <stdexcept>

namespace pth {

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

inline constexpr double kDefaultEpsTerm = 1e-6;

// Below this order the k = 1 (log/exp) branch is used.
inline constexpr double kUnitOrderCutoff = 1.0 + 1e-9;

/// Blow-up gain family mu' = (k/T) mu^(1+1/k), mu(0) = mu0.
struct BlowUpParams {
  double T = 10.0;
  double k = 1.0;
  double mu0 = 1.0;

  void validate() const;
};

bool unit_order(const BlowUpParams& p);

/// (k-1)/k
double rho_k(double k);

double terminal_time(const BlowUpParams& p);

/// mu_k(t) = T^k / (Upsilon - t)^k. Valid for t in [0, (1-eps_term) Upsilon].
double gain(const BlowUpParams& p, double t, double eps_term = kDefaultEpsTerm);

/// Gain expressed on the dilated axis; finite for every s >= 0.
double normalized_gain(const BlowUpParams& p, double s);

/// omega_k(b, a) for 1 <= a <= b.
double omega(const BlowUpParams& p, double b, double a);

/// T_k(t), the dilated time reached at original time t.
double dilate(const BlowUpParams& p, double t, double eps_term = kDefaultEpsTerm);

/// Inverse of dilate. Always lands in [0, Upsilon).
double contract(const BlowUpParams& p, double s);

}  // namespace pth
