#include "pthybrid/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "pthybrid/kernels.hpp"

namespace pth {

const char* to_string(InputChannel c) {
  switch (c) {
    case InputChannel::zero: return "zero";
    case InputChannel::one: return "one";
    case InputChannel::mu_pow: return "mu_pow";
  }
  return "zero";
}

void LyapunovCertificate::validate() const {
  if (modes.empty()) throw std::invalid_argument("certificate has no modes");
  if (!(p > 0.0)) throw std::invalid_argument("certificate exponent p must be positive");
  if (!(chi > 0.0 && chi <= 1.0)) throw std::invalid_argument("reset factor chi must lie in (0, 1]");
  if (channel == InputChannel::mu_pow && !(ell > 0.0))
    throw std::invalid_argument("mu^(-ell) channel needs ell > 0");
  for (const auto& m : modes) {
    if (!(m.c1 > 0.0 && m.c2 >= m.c1)) throw std::invalid_argument("need 0 < c1 <= c2 in every mode");
    if (m.stable && !(m.c3 > 0.0)) throw std::invalid_argument("stable modes need c3 > 0");
    if (!m.stable && !(m.c5 > 0.0)) throw std::invalid_argument("unstable modes need c5 > 0");
    if (m.c4 < 0.0) throw std::invalid_argument("c4 must be nonnegative");
  }
}

const ModeConstants& LyapunovCertificate::mode(int q) const {
  for (const auto& m : modes)
    if (m.q == q) return m;
  throw std::out_of_range("certificate has no mode " + std::to_string(q));
}

bool LyapunovCertificate::has_unstable() const {
  return std::any_of(modes.begin(), modes.end(), [](const ModeConstants& m) { return !m.stable; });
}

double LyapunovCertificate::delta(double mu) const {
  switch (channel) {
    case InputChannel::zero: return 0.0;
    case InputChannel::one: return 1.0;
    case InputChannel::mu_pow: return std::pow(mu, -ell);
  }
  return 0.0;
}

namespace {

struct Extremes {
  double c1_min = std::numeric_limits<double>::infinity();
  double c2_max = 0.0;
  double c3_min = std::numeric_limits<double>::infinity();
  double c4_max = 0.0;
  double c5_max = 0.0;
  bool any_stable = false;
};

Extremes extremes(const LyapunovCertificate& cert) {
  if (cert.modes.empty()) throw std::invalid_argument("certificate has no modes");
  Extremes e;
  for (const auto& m : cert.modes) {
    e.c1_min = std::min(e.c1_min, m.c1);
    e.c2_max = std::max(e.c2_max, m.c2);
    e.c4_max = std::max(e.c4_max, m.c4);
    if (m.stable) {
      e.c3_min = std::min(e.c3_min, m.c3);
      e.any_stable = true;
    } else {
      e.c5_max = std::max(e.c5_max, m.c5);
    }
  }
  if (!e.any_stable) throw std::invalid_argument("certificate has no stable mode");
  return e;
}

}  // namespace

double ratio_r(const LyapunovCertificate& cert) {
  const Extremes e = extremes(cert);
  return e.c2_max / e.c1_min;
}

double min_dwell_time(const LyapunovCertificate& cert) {
  const Extremes e = extremes(cert);
  return std::log(e.c2_max / e.c1_min) / e.c3_min;
}

ConditionResult theorem2_condition(const LyapunovCertificate& cert, double tau_d, double tau_a) {
  const Extremes e = extremes(cert);
  const double lnr = std::log(e.c2_max / e.c1_min);
  const double rhs = lnr / (e.c3_min * tau_d) + (1.0 / tau_a) * (1.0 + e.c5_max / e.c3_min);
  return {rhs < 1.0, 1.0 - rhs};
}

TheoremConstants theorem1_constants(const LyapunovCertificate& cert, const AdtParams& adt) {
  adt.validate();
  const Extremes e = extremes(cert);
  TheoremConstants k;
  k.r = e.c2_max / e.c1_min;
  const double lnr = std::log(k.r);
  k.lambda = e.c3_min - lnr / adt.tau_d;
  if (!(k.lambda > 0.0))
    throw InvalidDwell("tau_d = " + std::to_string(adt.tau_d) + " is not above ln(r)/min c3 = " +
                       std::to_string(lnr / e.c3_min));
  const double p = cert.p;
  const double c_low = e.c1_min;
  const double c_high = std::pow(k.r, adt.N0) * e.c2_max;
  const double frac = adt.tau_d / (1.0 + adt.tau_d);
  k.kappa1 = std::pow(c_high / c_low, 1.0 / p) * std::exp(k.lambda / (2.0 * p) * frac * adt.N0);
  k.kappa2 = k.lambda * frac / (2.0 * p);
  k.kappa3 = std::pow(2.0 * e.c4_max * std::pow(k.r, adt.N0) / (k.lambda * c_low), 1.0 / p);
  k.note = "kappa3 includes the r^N0 factor picked up across the initial jumps";
  return k;
}

TheoremConstants theorem2_constants(const LyapunovCertificate& cert, const AdtParams& adt,
                                    const AatParams& aat) {
  adt.validate();
  aat.validate();
  const Extremes e = extremes(cert);
  TheoremConstants k;
  k.theorem2 = true;
  k.r = e.c2_max / e.c1_min;
  const double lnr = std::log(k.r);
  k.delta = lnr / adt.tau_d + (e.c3_min + e.c5_max) / aat.tau_a;
  k.lambda = e.c3_min - k.delta;
  if (!(k.lambda > 0.0))
    throw InvalidDwell("activation and dwell parameters leave no decay margin (lambda = " +
                       std::to_string(k.lambda) + ")");
  const double p = cert.p;
  const double phi_low = e.c1_min;
  const double phi_high = e.c2_max * std::exp(lnr * adt.N0 + (e.c3_min + e.c5_max) * aat.T0);
  const double frac = adt.tau_d / (1.0 + adt.tau_d);
  k.kappa1 = std::pow(phi_high / phi_low, 1.0 / p) * std::exp(k.lambda / (2.0 * p) * frac * adt.N0);
  k.kappa2 = k.lambda * frac / (2.0 * p);
  k.kappa3 = std::pow(2.0 * e.c4_max * phi_high / (e.c2_max * k.lambda * phi_low), 1.0 / p);
  return k;
}

namespace {

double uniform(std::mt19937_64& rng, double a, double b) {
  return a + (b - a) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

Vec random_direction(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> nd;
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  const double norm = v.norm();
  if (norm == 0.0) {
    v.setZero();
    if (n > 0) v[0] = 1.0;
    return v;
  }
  return v / norm;
}

struct Worst {
  double margin = std::numeric_limits<double>::infinity();
  Vec x;
  double tau = 0.0;
  int q = 0;

  void offer(double m, const Vec& xx, double t, int qq) {
    if (m < margin) {
      margin = m;
      x = xx;
      tau = t;
      q = qq;
    }
  }
};

}  // namespace

CertificateReport verify_certificate(const LyapunovCertificate& cert, const HybridSystemDef& system,
                                     const CertificateSampling& sampling) {
  cert.validate();
  if (!cert.V || !cert.grad_x) throw std::invalid_argument("certificate needs V and its gradient");
  if (!system.flow_map) throw std::invalid_argument("system has no flow map");
  const auto n = static_cast<Eigen::Index>(system.n);
  const Vec offset = cert.set_offset.size() == n ? cert.set_offset : Vec::Zero(n);
  const auto nu = static_cast<Eigen::Index>(system.input_dim);
  std::mt19937_64 rng(sampling.seed);
  const double tiny = std::numeric_limits<double>::min();

  Worst sandwich, flow, reset;
  double grad_err = 0.0;
  Vec grad_witness;

  for (std::size_t i = 0; i < sampling.samples; ++i) {
    // Radii spread over three decades so the region near the set is covered.
    const double radius = sampling.box * std::pow(10.0, -3.0 * uniform(rng, 0.0, 1.0));
    const Vec x = offset + radius * random_direction(rng, n);
    const double dist = (x - offset).norm();
    if (dist <= sampling.exclusion_radius) continue;
    const double tau = uniform(rng, 0.0, sampling.N0);
    const double eta = uniform(rng, 0.0, 1.0 / sampling.tau_d);
    const double mu = sampling.mu0 * std::exp(uniform(rng, 0.0, std::log(sampling.mu_max / sampling.mu0)));
    Vec u = sampling.u_max * random_direction(rng, nu);
    const double u_norm = nu > 0 ? u.norm() : sampling.u_max;

    for (const auto& m : cert.modes) {
      const int q = m.q;
      const double v = cert.V(x, tau, q);
      const double dp = std::pow(dist, cert.p);

      // Sandwich bounds, relative to the upper envelope.
      const double sw = std::min(v - m.c1 * dp, m.c2 * dp - v) / std::max(m.c2 * dp, tiny);
      sandwich.offer(sw, x, tau, q);

      // Directional derivative along (f_q, eta).
      FlowContext ctx;
      ctx.mu = mu;
      ctx.s = 0.0;
      ctx.tau = tau;
      ctx.q = q;
      Vec f(n);
      system.flow_map(x, u, ctx, f);
      const Vec g = cert.grad_x(x, tau, q);
      double lhs = g.dot(f);
      if (cert.dV_dtau) lhs += cert.dV_dtau(x, tau, q) * eta;
      const double input_term = m.c4 * cert.delta(mu) * std::pow(u_norm, cert.p);
      const double rate = m.stable ? -m.c3 * v : m.c5 * v;
      const double rhs = rate + input_term;
      const double scale = std::max({std::abs(rate), std::abs(lhs), input_term, tiny});
      flow.offer((rhs - lhs) / scale, x, tau, q);

      // Central-difference cross-check of the gradient.
      const double h = 1e-6 * (1.0 + x.norm());
      Vec fd(n);
      for (Eigen::Index d = 0; d < n; ++d) {
        Vec xp = x, xm = x;
        xp[d] += h;
        xm[d] -= h;
        fd[d] = (cert.V(xp, tau, q) - cert.V(xm, tau, q)) / (2.0 * h);
      }
      const double gscale = std::max(g.lpNorm<Eigen::Infinity>(), 1e-6 * (1.0 + std::abs(v)));
      const double gerr = (g - fd).lpNorm<Eigen::Infinity>() / gscale;
      if (gerr > grad_err) {
        grad_err = gerr;
        grad_witness = x;
      }

      // Reset into every other mode (or itself when there is only one).
      if (sampling.N0 >= 1.0) {
        const double tj = 1.0 + (sampling.N0 - 1.0) * uniform(rng, 0.0, 1.0);
        const double vo = cert.V(x, tj, q);
        for (const auto& to : cert.modes) {
          if (to.q == q && cert.modes.size() > 1) continue;
          JumpContext jc;
          jc.q_from = q;
          jc.q_to = to.q;
          jc.tau = tj;
          const Vec xr = system.jump_map ? system.jump_map(x, jc) : x;
          const double vq = cert.V(xr, tj - 1.0, to.q);
          reset.offer((cert.chi * vo - vq) / std::max(cert.chi * vo, tiny), x, tj, q);
        }
      }
    }
  }

  CertificateReport rep;
  rep.samples = sampling.samples;
  rep.sandwich_margin = sandwich.margin;
  rep.flow_margin = flow.margin;
  rep.reset_margin = reset.margin;
  rep.gradient_error = grad_err;
  const Worst* worst = &sandwich;
  rep.worst_check = "sandwich";
  if (flow.margin < worst->margin) {
    worst = &flow;
    rep.worst_check = "flow";
  }
  if (reset.margin < worst->margin) {
    worst = &reset;
    rep.worst_check = "reset";
  }
  rep.worst_margin = worst->margin;
  rep.witness_x = worst->x;
  rep.witness_tau = worst->tau;
  rep.witness_q = worst->q;
  const bool grad_ok = grad_err <= sampling.gradient_tolerance;
  if (!grad_ok && rep.worst_margin >= -sampling.tolerance) {
    rep.worst_check = "gradient";
    rep.witness_x = grad_witness;
  }
  rep.pass = rep.worst_margin >= -sampling.tolerance && grad_ok;
  return rep;
}

double pt_bound_value(const TheoremConstants& k, const BlowUpParams& params, const BoundSpec& spec,
                      double s, std::size_t j, double d0) {
  const double jd = static_cast<double>(j);
  switch (spec.channel) {
    case InputChannel::zero:
      return k.kappa1 * std::exp(-k.kappa2 * (s + jd)) * d0;
    case InputChannel::one:
      return k.kappa1 * std::exp(-k.kappa2 * (s + jd)) * d0 + k.kappa3 * spec.u_sup;
    case InputChannel::mu_pow: {
      // Restart the ISS estimate at s/2 so the input term inherits the gain at s/2.
      const double e = spec.ell / spec.p;
      return k.kappa1 * k.kappa1 * std::exp(-k.kappa2 * (s + jd)) * d0 +
             k.kappa1 * k.kappa3 * spec.u_sup * std::pow(params.mu0, -e) * std::exp(-k.kappa2 * s / 2.0) +
             k.kappa3 * spec.u_sup * std::pow(normalized_gain(params, s / 2.0), -e);
    }
  }
  return 0.0;
}

BoundReport check_pt_bound(const HybridArc& arc, const TheoremConstants& consts,
                           const BlowUpParams& params, const BoundSpec& spec, const Vec& set_offset) {
  BoundReport rep;
  if (arc.samples.empty()) return rep;
  rep.distance = distances_to(arc, set_offset);
  const double d0 = rep.distance.front();
  rep.bound.resize(rep.distance.size());
  for (std::size_t i = 0; i < rep.distance.size(); ++i)
    rep.bound[i] = pt_bound_value(consts, params, spec, arc.s_of(i), arc.samples[i].j, d0);
  const kernels::ArgMax am = kernels::max_ratio(rep.distance.data(), rep.bound.data(), rep.distance.size());
  rep.max_ratio = am.value;
  rep.worst_index = am.index;
  rep.pass = rep.max_ratio <= 1.0 + spec.tolerance;
  return rep;
}

}  // namespace pth
