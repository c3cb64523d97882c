#include "pthybrid/blowup.hpp"

#include <cmath>
#include <string>

namespace pth {

namespace {

// expm1(c*x)/c, continuous at c = 0.
double expm1_scaled(double x, double c) {
  if (c == 0.0) return x;
  return std::expm1(c * x) / c;
}

// log1p(c*x)/c, continuous at c = 0.
double log1p_scaled(double x, double c) {
  if (c == 0.0) return x;
  return std::log1p(c * x) / c;
}

double order_excess(const BlowUpParams& p) { return unit_order(p) ? 0.0 : p.k - 1.0; }

// L(t) = ln(Upsilon / (Upsilon - t)); every transform is a closed form in L.
double log_ratio(const BlowUpParams& p, double t, double eps_term) {
  const double ups = terminal_time(p);
  if (!(t >= 0.0)) throw DomainError("time must be nonnegative, got " + std::to_string(t));
  if (t >= ups || t > (1.0 - eps_term) * ups)
    throw DomainError("time " + std::to_string(t) + " beyond the terminal cap of " +
                      std::to_string((1.0 - eps_term) * ups));
  return -std::log1p(-t / ups);
}

double log_ratio_from_dilated(const BlowUpParams& p, double s) {
  if (!(s >= 0.0)) throw DomainError("dilated time must be nonnegative");
  const double c = order_excess(p);
  const double scale = p.T * std::pow(p.mu0, rho_k(p.k));
  return log1p_scaled(s / scale, c);
}

}  // namespace

void BlowUpParams::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("T must be positive");
  if (!(k >= 1.0) || !std::isfinite(k)) throw DomainError("k must be >= 1");
  if (!(mu0 >= 1.0) || !std::isfinite(mu0)) throw DomainError("mu0 must be >= 1");
}

bool unit_order(const BlowUpParams& p) { return p.k < kUnitOrderCutoff; }

double rho_k(double k) { return (k - 1.0) / k; }

double terminal_time(const BlowUpParams& p) { return p.T * std::pow(p.mu0, -1.0 / p.k); }

double gain(const BlowUpParams& p, double t, double eps_term) {
  return p.mu0 * std::exp(p.k * log_ratio(p, t, eps_term));
}

double normalized_gain(const BlowUpParams& p, double s) {
  return p.mu0 * std::exp(p.k * log_ratio_from_dilated(p, s));
}

double omega(const BlowUpParams& p, double b, double a) {
  if (!(a >= 1.0)) throw DomainError("omega needs a >= 1");
  if (!(b >= a)) throw DomainError("omega needs b >= a");
  const double lr = std::log(b / a);
  if (unit_order(p)) return p.T * lr;
  const double rho = rho_k(p.k);
  // (T/k) a^rho (e^{rho ln(b/a)} - 1) / rho
  return (p.T / p.k) * std::pow(a, rho) * expm1_scaled(lr, rho);
}

double dilate(const BlowUpParams& p, double t, double eps_term) {
  const double L = log_ratio(p, t, eps_term);
  const double c = order_excess(p);
  return p.T * std::pow(p.mu0, rho_k(p.k)) * expm1_scaled(L, c);
}

double contract(const BlowUpParams& p, double s) {
  const double L = log_ratio_from_dilated(p, s);
  return -terminal_time(p) * std::expm1(-L);
}

}  // namespace pth
