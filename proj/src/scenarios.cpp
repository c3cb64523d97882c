#include "pthybrid/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace pth {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

double min_sym_eig(const Mat& A) {
  const Mat S = 0.5 * (A + A.transpose());
  return Eigen::SelfAdjointEigenSolver<Mat>(S, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

double spectral_norm(const Mat& A) {
  return Eigen::JacobiSVD<Mat>(A).singularValues()(0);
}

std::size_t mode_index(const std::vector<int>& modes, int q) {
  const auto it = std::find(modes.begin(), modes.end(), q);
  if (it == modes.end()) throw std::out_of_range("unknown mode " + std::to_string(q));
  return static_cast<std::size_t>(it - modes.begin());
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

Vec uniform_box(std::uint64_t seed, std::size_t n, double half_width) {
  std::mt19937_64 rng(seed);
  Vec v(idx(n));
  for (std::size_t i = 0; i < n; ++i)
    v[idx(i)] = half_width * (2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0);
  return v;
}

BuiltScenario build_scalar_halving() {
  BuiltScenario sc;
  sc.name = "halving";
  sc.params = {1.0, 1.0, 1.0};
  sc.adt = {1.0, 1.0};
  sc.system.n = 1;
  sc.system.flow_map = [](const Vec& x, const Vec&, const FlowContext&, Vec& dx) { dx = -x; };
  sc.system.jump_map = [](const Vec& x, const JumpContext&) { return Vec(0.5 * x); };
  sc.set_offset = Vec::Zero(1);
  sc.x0 = Vec::Constant(1, 1.0);

  auto& c = sc.certificate;
  c.modes = {{1, true, 1.0, 1.0, 2.0, 0.0, 0.0}};
  c.p = 2.0;
  c.chi = 0.25;
  c.set_offset = sc.set_offset;
  c.V = [](const Vec& x, double, int) { return x.squaredNorm(); };
  c.grad_x = [](const Vec& x, double, int) { return Vec(2.0 * x); };
  sc.policy.modes = {1};
  return sc;
}

JumpSchedule scalar_halving_schedule(const BlowUpParams& params, double horizon) {
  JumpSchedule js;
  js.q0 = 1;
  for (int i = 1;; ++i) {
    const double t = contract(params, static_cast<double>(i));
    if (!(t < horizon) || (!js.times.empty() && !(t > js.times.back()))) break;
    js.times.push_back(t);
    js.modes.push_back(1);
  }
  return js;
}

Mat cycle_laplacian(const std::vector<int>& order, std::size_t agents) {
  Mat adj = Mat::Zero(idx(agents), idx(agents));
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int a = order[i], b = order[(i + 1) % order.size()];
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= agents || static_cast<std::size_t>(b) >= agents)
      throw BuildError("cycle visits an agent outside the group");
    adj(a, b) = 1.0;
  }
  Mat L = -adj;
  for (std::size_t i = 0; i < agents; ++i) L(idx(i), idx(i)) += adj.row(idx(i)).sum();
  return L;
}

ConsensusSpec default_consensus_spec() {
  ConsensusSpec s;
  s.target = Vec(2);
  s.target << -1.0, 1.0;
  Mat b1 = Mat::Zero(2, 2), b2 = Mat::Zero(2, 2);
  b1(0, 0) = 1.0;
  b2(1, 1) = 1.0;
  s.B = {b1, b1, b2, b2};
  s.laplacians = {cycle_laplacian({0, 1, 2, 3}, 4), cycle_laplacian({0, 2, 1, 3}, 4),
                  cycle_laplacian({0, 1, 3, 2}, 4)};
  return s;
}

std::vector<Mat> consensus_matrices(const ConsensusSpec& spec) {
  const std::size_t N = spec.agents, n = spec.dim, nn = N * n;
  if (spec.B.size() != N) throw BuildError("need one measurement block per agent");
  if (spec.laplacians.size() != spec.modes.size()) throw BuildError("need one Laplacian per mode");
  Mat B = Mat::Zero(idx(nn), idx(nn));
  for (std::size_t i = 0; i < N; ++i) {
    if (spec.B[i].rows() != idx(n) || spec.B[i].cols() != idx(n)) throw BuildError("B_i has the wrong shape");
    B.block(idx(i * n), idx(i * n), idx(n), idx(n)) = spec.B[i];
  }
  std::vector<Mat> out;
  for (const Mat& L : spec.laplacians) {
    if (L.rows() != idx(N) || L.cols() != idx(N)) throw BuildError("Laplacian has the wrong shape");
    Mat LI = Mat::Zero(idx(nn), idx(nn));
    for (std::size_t a = 0; a < N; ++a)
      for (std::size_t b = 0; b < N; ++b)
        LI.block(idx(a * n), idx(b * n), idx(n), idx(n)) = L(idx(a), idx(b)) * Mat::Identity(idx(n), idx(n));
    out.push_back(-(spec.k_r * B + spec.k_c * LI));
  }
  return out;
}

Mat solve_lyapunov(const Mat& A, const Mat& Q) {
  // A' P + P A = -Q as a Kronecker system on vec(P).
  const Eigen::Index n = A.rows();
  const Mat I = Mat::Identity(n, n);
  // Column-major vec: vec(A'P) = (I (x) A') vec(P), vec(PA) = (A' (x) I) vec(P).
  Mat K = Mat::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K.block(i * n, i * n, n, n) += A.transpose();
    for (Eigen::Index j = 0; j < n; ++j) K.block(i * n, j * n, n, n) += A(j, i) * I;
  }
  const Vec rhs = -Eigen::Map<const Vec>(Mat(Q).data(), n * n);
  const Vec p = K.fullPivLu().solve(rhs);
  Mat P = Eigen::Map<const Mat>(p.data(), n, n);
  return 0.5 * (P + P.transpose());
}

ConsensusLyapunovReport consensus_lyapunov_report(const ConsensusSpec& spec) {
  const auto A = consensus_matrices(spec);
  ConsensusLyapunovReport rep;
  std::vector<Mat> P;
  for (const Mat& Aq : A) {
    P.push_back(solve_lyapunov(Aq, Mat::Identity(Aq.rows(), Aq.cols())));
    const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(P.back(), Eigen::EigenvaluesOnly).eigenvalues();
    rep.c1.push_back(ev.minCoeff());
    rep.c2.push_back(ev.maxCoeff());
    rep.c3.push_back(1.0 / ev.maxCoeff());
  }
  rep.r = *std::max_element(rep.c2.begin(), rep.c2.end()) / *std::min_element(rep.c1.begin(), rep.c1.end());
  rep.min_c3 = *std::min_element(rep.c3.begin(), rep.c3.end());
  rep.dwell_threshold = std::log(rep.r) / rep.min_c3;
  rep.chi = 0.0;
  for (std::size_t o = 0; o < P.size(); ++o)
    for (std::size_t q = 0; q < P.size(); ++q) {
      if (o == q) continue;
      Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(P[q], P[o], Eigen::EigenvaluesOnly);
      rep.chi = std::max(rep.chi, ges.eigenvalues().maxCoeff());
    }
  return rep;
}

BuiltScenario build_consensus(const ConsensusSpec& spec) {
  if (spec.target.size() != idx(spec.dim)) throw BuildError("target has the wrong dimension");
  const auto A = consensus_matrices(spec);
  std::vector<double> decay;
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double m = min_sym_eig(-A[i]);
    if (!(m > 0.0))
      throw BuildError("B + L_" + std::to_string(spec.modes[i]) + " is not positive definite");
    const Eigen::VectorXcd ev = A[i].eigenvalues();
    if (!(ev.real().maxCoeff() < 0.0)) throw BuildError("A_q is not Hurwitz");
    decay.push_back(m);
  }
  const std::size_t nn = spec.agents * spec.dim;

  BuiltScenario sc;
  sc.name = "consensus";
  sc.params = spec.params;
  sc.adt = spec.adt;
  sc.set_offset = spec.target.replicate(idx(spec.agents), 1);
  sc.x0 = uniform_box(spec.seed, nn, 3.0);
  sc.policy.modes = spec.modes;
  sc.policy.initial_mode = spec.modes.front();
  sc.policy.seed = spec.seed;

  const Vec offset = sc.set_offset;
  const std::vector<int> modes = spec.modes;
  sc.system.n = nn;
  sc.system.flow_map = [A, offset, modes](const Vec& x, const Vec&, const FlowContext& ctx, Vec& dx) {
    dx = A[mode_index(modes, ctx.q)] * (x - offset);
  };
  sc.system.jump_map = [](const Vec& x, const JumpContext&) { return x; };

  auto& c = sc.certificate;
  c.p = 2.0;
  c.chi = 1.0;
  c.set_offset = offset;
  if (spec.certificate == ConsensusCertificate::common) {
    for (std::size_t i = 0; i < modes.size(); ++i) c.modes.push_back({modes[i], true, 1.0, 1.0, 2.0 * decay[i]});
    c.V = [offset](const Vec& x, double, int) { return (x - offset).squaredNorm(); };
    c.grad_x = [offset](const Vec& x, double, int) { return Vec(2.0 * (x - offset)); };
  } else {
    std::vector<Mat> P;
    for (std::size_t i = 0; i < A.size(); ++i) {
      P.push_back(solve_lyapunov(A[i], Mat::Identity(idx(nn), idx(nn))));
      const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(P.back(), Eigen::EigenvaluesOnly).eigenvalues();
      c.modes.push_back({modes[i], true, ev.minCoeff(), ev.maxCoeff(), 1.0 / ev.maxCoeff()});
    }
    const auto rep = consensus_lyapunov_report(spec);
    c.chi = rep.chi;
    if (rep.chi > 1.0)
      sc.warnings.push_back("per-mode certificate needs reset factor " + fmt(rep.chi) + " > 1");
    if (spec.adt.tau_d <= rep.dwell_threshold)
      sc.warnings.push_back("tau_d " + fmt(spec.adt.tau_d) + " is below the per-mode dwell threshold " +
                            fmt(rep.dwell_threshold));
    c.V = [P, offset, modes](const Vec& x, double, int q) {
      const Vec e = x - offset;
      return e.dot(P[mode_index(modes, q)] * e);
    };
    c.grad_x = [P, offset, modes](const Vec& x, double, int q) {
      return Vec(2.0 * P[mode_index(modes, q)] * (x - offset));
    };
  }
  return sc;
}

BuiltScenario build_intermittent(const IntermittentSpec& spec) {
  if (spec.unstable_modes.empty()) throw BuildError("intermittent scenario needs an unstable mode");
  if (!(spec.eta > 0.0)) throw BuildError("feedback gain must be positive");
  for (int q : spec.stable_modes)
    if (q <= 0) throw BuildError("mode labels double as drift scales and must be positive");
  for (int q : spec.order)
    if (std::find(spec.stable_modes.begin(), spec.stable_modes.end(), q) == spec.stable_modes.end() &&
        std::find(spec.unstable_modes.begin(), spec.unstable_modes.end(), q) == spec.unstable_modes.end())
      throw BuildError("mode order names an unknown mode");

  BuiltScenario sc;
  sc.name = "intermittent";
  sc.params = spec.params;
  sc.adt = spec.adt;
  sc.aat = spec.aat;
  sc.set_offset = Vec::Zero(1);
  sc.x0 = Vec::Constant(1, spec.x0);
  sc.policy.modes = spec.order;
  sc.policy.unstable_modes = spec.unstable_modes;
  sc.policy.initial_mode = spec.order.front();

  const std::vector<int> unstable = spec.unstable_modes;
  const double eta = spec.eta;
  auto is_unstable = [unstable](int q) { return std::find(unstable.begin(), unstable.end(), q) != unstable.end(); };
  sc.system.n = 1;
  // Drift d_q = q tanh(x) enters through the 1/mu channel; stable modes add
  // -(eta + delta_q dbar_q^2) x with dbar_q = q|x| and delta_q = 1/q.
  sc.system.flow_map = [eta, is_unstable](const Vec& x, const Vec&, const FlowContext& ctx, Vec& dx) {
    const double q = ctx.q;
    const double v = x[0];
    const double drift = q * std::tanh(v) / ctx.mu;
    dx.resize(1);
    dx[0] = is_unstable(ctx.q) ? drift : -(eta + q * v * v) * v + drift;
  };
  sc.system.jump_map = [](const Vec& x, const JumpContext&) { return x; };

  auto& c = sc.certificate;
  c.p = 2.0;
  c.chi = 1.0;
  c.channel = InputChannel::mu_pow;
  c.ell = 2.0;
  c.set_offset = sc.set_offset;
  for (int q : spec.stable_modes) c.modes.push_back({q, true, 0.5, 0.5, 2.0 * eta, q / 4.0, 0.0});
  for (int q : spec.unstable_modes) c.modes.push_back({q, false, 0.5, 0.5, 0.0, q * q / 2.0, 1.0});
  c.V = [](const Vec& x, double, int) { return 0.5 * x.squaredNorm(); };
  c.grad_x = [](const Vec& x, double, int) { return x; };

  const auto cond = theorem2_condition(c, spec.adt.tau_d, spec.aat.tau_a);
  if (!cond.holds)
    throw BuildError("dwell/activation condition fails with margin " + fmt(cond.margin));
  sc.bound.channel = InputChannel::mu_pow;
  sc.bound.ell = 2.0;
  sc.bound.p = 2.0;
  sc.bound.u_sup = 1.0;
  return sc;
}

GameSpec reference_game_spec() {
  GameSpec g;
  Mat a1(2, 2), a2(2, 2), a3(2, 2);
  a1 << 6.0, -1.5, -1.5, 6.0;
  a2 << 8.0, -2.0, 2.0, 8.0;
  a3 << 4.0, 0.0, 0.0, 8.0;
  g.A = {a1, a2, a3};
  g.theta = 0.05;
  g.equilibrium = Vec::Ones(2);
  g.eta_low = 0.8;
  g.eta_high = 1.2;
  g.delta_eta = 0.78;
  g.delta_d = 0.17;
  g.params = {10.0, 1.0, 1.0};
  g.adt = {1.14, 1.75};
  g.enforce = false;
  g.x0 = Vec(2);
  g.x0 << -2.0, 3.0;
  return g;
}

GameSpec tuned_game_spec() {
  GameSpec g;
  const double a[3] = {1.254971, 1.174384, 1.192283};
  const double b[3] = {0.128267, 0.138436, 0.079865};
  for (int i = 0; i < 3; ++i) {
    Mat m(2, 2);
    m << a[i], -b[i], b[i], a[i];
    g.A.push_back(m);
  }
  g.theta = 1.0;
  g.equilibrium = Vec::Ones(2);
  g.eta_low = 0.678240;
  g.eta_high = 1.138227;
  g.delta_eta = 0.139927;
  g.delta_d = 0.238268;
  g.params = {10.0, 1.0, 1.0};
  g.adt = {9.3, 1.285551};
  g.enforce = true;
  g.x0 = Vec(2);
  g.x0 << -2.0, 3.0;
  return g;
}

double eta_of(const GameSpec& spec, double tau) {
  return spec.eta_low + tau * (spec.eta_high - spec.eta_low) / spec.adt.N0;
}

GameConstants game_constants(const GameSpec& spec) {
  if (spec.A.empty() || spec.A.size() != spec.modes.size()) throw BuildError("need one game matrix per mode");
  GameConstants gc;
  for (const Mat& A : spec.A) {
    const Mat G = spec.theta * A;
    const Mat S = Mat::Identity(G.rows(), G.cols()) - G;
    gc.kappa.push_back(min_sym_eig(G));
    gc.ell.push_back(spectral_norm(G));
    gc.sigma.push_back(spectral_norm(S));
    gc.zeta.push_back(gc.kappa.back() / (gc.ell.back() * gc.ell.back()));
  }
  gc.kappa_min = *std::min_element(gc.kappa.begin(), gc.kappa.end());
  gc.ell_max = *std::max_element(gc.ell.begin(), gc.ell.end());
  gc.sigma_max = *std::max_element(gc.sigma.begin(), gc.sigma.end());
  gc.zeta_min = *std::min_element(gc.zeta.begin(), gc.zeta.end());
  const double N0 = spec.adt.N0;
  const double e1 = eta_of(spec, 1.0), eN = eta_of(spec, N0 - 1.0);
  const double k2 = gc.kappa_min * gc.kappa_min;
  gc.gamma_bar = gc.ell_max * gc.ell_max / k2 * (eN * eN) / (e1 * e1) + 1.0 / (2.0 * k2 * e1 * e1);
  const double s2 = gc.sigma_max * gc.sigma_max;
  gc.nu_M = (1.0 - spec.delta_d - spec.delta_eta) * s2 /
            (spec.delta_eta * (1.0 - spec.delta_d) * gc.zeta_min + s2);
  gc.eta_tuning_ok = spec.eta_high * spec.eta_high <= spec.delta_eta * gc.zeta_min / s2;
  gc.dwell_tuning_ok =
      1.0 / spec.adt.tau_d <= spec.delta_d * N0 / (spec.eta_high - spec.eta_low) * gc.zeta_min;
  return gc;
}

double nu_M(const GameSpec& spec) { return game_constants(spec).nu_M; }

EigenvalueFloorReport eigenvalue_floor_check(const GameSpec& spec, std::size_t grid) {
  const GameConstants gc = game_constants(spec);
  EigenvalueFloorReport rep;
  rep.nu_M = gc.nu_M;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  const double N0 = spec.adt.N0;
  const double eta_prime = (spec.eta_high - spec.eta_low) / N0;
  const std::size_t m = std::max<std::size_t>(grid, 2);
  for (std::size_t qi = 0; qi < spec.A.size(); ++qi) {
    const Mat S = Mat::Identity(spec.A[qi].rows(), spec.A[qi].cols()) - spec.theta * spec.A[qi];
    const Eigen::Index n = S.rows();
    for (std::size_t a = 0; a < m; ++a) {
      const double tau = N0 * static_cast<double>(a) / static_cast<double>(m - 1);
      const double eta = eta_of(spec, tau);
      for (std::size_t b = 0; b < m; ++b) {
        const double rho = (1.0 / spec.adt.tau_d) * static_cast<double>(b) / static_cast<double>(m - 1);
        Mat M(2 * n, 2 * n);
        M.topLeftCorner(n, n) = Mat::Identity(n, n) / (eta * eta);
        M.topRightCorner(n, n) = S.transpose();
        M.bottomLeftCorner(n, n) = S;
        M.bottomRightCorner(n, n) = (gc.zeta[qi] - rho * eta_prime) * Mat::Identity(n, n);
        const double ev = Eigen::SelfAdjointEigenSolver<Mat>(M, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
        if (ev < rep.min_eigenvalue) {
          rep.min_eigenvalue = ev;
          rep.witness_q = spec.modes[qi];
          rep.witness_tau = tau;
          rep.witness_rho = rho;
        }
      }
    }
  }
  rep.pass = rep.min_eigenvalue >= rep.nu_M;
  return rep;
}

namespace {

struct ResetPieces {
  double m3, c3, ln_r, r;
};

ResetPieces reset_pieces(const GameSpec& spec, const GameConstants& gc) {
  ResetPieces p;
  const double k2 = gc.kappa_min * gc.kappa_min;
  const double eh = spec.eta_high, el = spec.eta_low;
  p.m3 = std::max(3.0, 2.0 * (1.0 / k2 + eh * eh));
  p.c3 = 4.0 * el * gc.nu_M / p.m3;
  p.r = std::max(3.0, 2.0 + 2.0 * gc.ell_max * gc.ell_max * eh * eh) / std::min(1.0, 2.0 * el * k2);
  p.ln_r = std::log(p.r);
  return p;
}

double v1(const GameSpec& spec, double kappa) {
  return 0.25 * std::min(1.0, 2.0 * kappa * kappa * spec.eta_low * spec.eta_low);
}

double v2(const GameSpec& spec, double ell) {
  return 0.25 * std::max(3.0, 2.0 + 2.0 * ell * ell * spec.eta_high * spec.eta_high);
}

}  // namespace

double reset_dwell_threshold(const GameSpec& spec) {
  const GameConstants gc = game_constants(spec);
  const ResetPieces p = reset_pieces(spec, gc);
  return p.m3 / (4.0 * spec.eta_low * gc.nu_M) * p.ln_r;
}

TheoremConstants reset_game_constants(const GameSpec& spec) {
  const GameConstants gc = game_constants(spec);
  const ResetPieces p = reset_pieces(spec, gc);
  const double td = spec.adt.tau_d, N0 = spec.adt.N0;
  TheoremConstants k;
  k.r = p.r;
  k.lambda = p.c3 - p.ln_r / td;
  k.kappa2 = td / (4.0 * (1.0 + td)) * std::min(1.0 - gc.gamma_bar, k.lambda);
  double v1_min = std::numeric_limits<double>::infinity(), v2_max = 0.0;
  for (std::size_t i = 0; i < gc.kappa.size(); ++i) {
    v1_min = std::min(v1_min, v1(spec, gc.kappa[i]));
    v2_max = std::max(v2_max, v2(spec, gc.ell[i]));
  }
  k.kappa1 = std::pow(v2_max, (N0 + 1.0) / 2.0) / std::pow(v1_min, N0 / 2.0) *
             std::exp(k.lambda / 2.0 * td / (1.0 + td) * N0);
  k.kappa3 = 0.0;
  if (!(k.kappa2 > 0.0)) k.note = "hypotheses fail: kappa2 is not positive";
  return k;
}

namespace {

void check_game(const GameSpec& spec, const GameConstants& gc, std::vector<std::string>& warnings) {
  for (std::size_t i = 0; i < gc.kappa.size(); ++i)
    if (!(gc.kappa[i] > 0.0))
      throw BuildError("pseudo-gradient of mode " + std::to_string(spec.modes[i]) + " is not strongly monotone");
  if (spec.equilibrium.size() != spec.A.front().rows()) throw BuildError("equilibrium has the wrong dimension");
  if (!(spec.eta_high > spec.eta_low && spec.eta_low > 0.0)) throw BuildError("need eta_high > eta_low > 0");
  std::vector<std::string> issues;
  const double dsum = spec.delta_eta + spec.delta_d;
  if (!(spec.delta_eta > 0.0 && spec.delta_eta < 1.0 && spec.delta_d > 0.0 && dsum < 1.0))
    issues.push_back("tuning constants need delta_eta in (0,1), delta_d > 0, sum < 1");
  if (!gc.eta_tuning_ok) issues.push_back("eta_high^2 exceeds delta_eta * zeta_min / sigma_max^2");
  if (!gc.dwell_tuning_ok) issues.push_back("1/tau_d exceeds delta_d * N0 * zeta_min / (eta_high - eta_low)");
  if (!(gc.gamma_bar > 0.0 && gc.gamma_bar <= 1.0))
    issues.push_back("reset factor gamma_bar = " + fmt(gc.gamma_bar) + " lies outside (0, 1]");
  if (spec.enforce && !issues.empty()) throw BuildError(issues.front());
  warnings.insert(warnings.end(), issues.begin(), issues.end());
}

}  // namespace

BuiltScenario build_nesmr(const GameSpec& spec) {
  const GameConstants gc = game_constants(spec);
  BuiltScenario sc;
  check_game(spec, gc, sc.warnings);
  const double thr = reset_dwell_threshold(spec);
  if (!(spec.adt.tau_d > thr))
    sc.warnings.push_back("tau_d " + fmt(spec.adt.tau_d) + " is below the dwell threshold " + fmt(thr));

  const Eigen::Index n = spec.equilibrium.size();
  sc.name = "nesmr";
  sc.params = spec.params;
  sc.adt = spec.adt;
  sc.set_offset = spec.equilibrium.replicate(2, 1);
  sc.x0 = (spec.x0.size() == n ? spec.x0 : Vec(Vec::Zero(n))).replicate(2, 1);
  sc.policy.modes = spec.modes;
  sc.policy.initial_mode = spec.modes.front();

  std::vector<Mat> G;
  for (const Mat& A : spec.A) G.push_back(spec.theta * A);
  const std::vector<int> modes = spec.modes;
  const Vec xe = spec.equilibrium;
  const GameSpec sp = spec;
  auto eta = [sp](double tau) { return eta_of(sp, tau); };

  sc.system.n = static_cast<std::size_t>(2 * n);
  sc.system.flow_map = [G, modes, xe, eta, n](const Vec& x, const Vec&, const FlowContext& ctx, Vec& dx) {
    const double e = eta(ctx.tau);
    const Vec x1 = x.head(n), x2 = x.tail(n);
    dx.resize(2 * n);
    dx.head(n) = (2.0 / e) * (x2 - x1);
    dx.tail(n) = -2.0 * e * (G[mode_index(modes, ctx.q)] * (x1 - xe));
  };
  sc.system.jump_map = [n](const Vec& x, const JumpContext&) {
    Vec out(2 * n);
    out.head(n) = x.head(n);
    out.tail(n) = x.head(n);
    return out;
  };

  auto& c = sc.certificate;
  c.p = 2.0;
  c.chi = gc.gamma_bar;
  c.set_offset = sc.set_offset;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const double kq = gc.kappa[i];
    const double denom = std::max(3.0, 2.0 * (1.0 / (kq * kq) + spec.eta_high * spec.eta_high));
    c.modes.push_back({modes[i], true, v1(spec, kq), v2(spec, gc.ell[i]),
                       4.0 * spec.eta_low * gc.nu_M / denom});
  }
  c.V = [G, modes, xe, eta, n](const Vec& x, double tau, int q) {
    const Vec x1 = x.head(n), x2 = x.tail(n);
    const double e = eta(tau);
    const Vec g = G[mode_index(modes, q)] * (x1 - xe);
    return 0.25 * (x2 - xe).squaredNorm() + 0.25 * (x2 - x1).squaredNorm() + 0.5 * e * e * g.squaredNorm();
  };
  c.grad_x = [G, modes, xe, eta, n](const Vec& x, double tau, int q) {
    const Vec x1 = x.head(n), x2 = x.tail(n);
    const double e = eta(tau);
    const Mat& Gq = G[mode_index(modes, q)];
    Vec out(2 * n);
    out.head(n) = -0.5 * (x2 - x1) + e * e * (Gq.transpose() * (Gq * (x1 - xe)));
    out.tail(n) = 0.5 * (x2 - xe) + 0.5 * (x2 - x1);
    return out;
  };
  const double eta_prime = (spec.eta_high - spec.eta_low) / spec.adt.N0;
  c.dV_dtau = [G, modes, xe, eta, eta_prime, n](const Vec& x, double tau, int q) {
    const Vec g = G[mode_index(modes, q)] * (x.head(n) - xe);
    return eta(tau) * eta_prime * g.squaredNorm();
  };
  return sc;
}

BuiltScenario build_ptpsg(const GameSpec& spec) {
  const GameConstants gc = game_constants(spec);
  BuiltScenario sc;
  check_game(spec, gc, sc.warnings);
  const Eigen::Index n = spec.equilibrium.size();
  sc.name = "ptpsg";
  sc.params = spec.params;
  sc.adt = spec.adt;
  sc.set_offset = spec.equilibrium;
  sc.x0 = spec.x0.size() == n ? spec.x0 : Vec(Vec::Zero(n));
  sc.policy.modes = spec.modes;
  sc.policy.initial_mode = spec.modes.front();

  std::vector<Mat> G;
  for (const Mat& A : spec.A) G.push_back(spec.theta * A);
  const std::vector<int> modes = spec.modes;
  const Vec xe = spec.equilibrium;
  sc.system.n = static_cast<std::size_t>(n);
  // Descent direction: the ascent form diverges for a strongly monotone game.
  sc.system.flow_map = [G, modes, xe](const Vec& x, const Vec&, const FlowContext& ctx, Vec& dx) {
    dx = -(G[mode_index(modes, ctx.q)] * (x - xe));
  };
  sc.system.jump_map = [](const Vec& x, const JumpContext&) { return x; };

  auto& c = sc.certificate;
  c.p = 2.0;
  c.chi = 1.0;
  c.set_offset = xe;
  for (std::size_t i = 0; i < modes.size(); ++i) c.modes.push_back({modes[i], true, 0.5, 0.5, 2.0 * gc.kappa[i]});
  c.V = [xe](const Vec& x, double, int) { return 0.5 * (x - xe).squaredNorm(); };
  c.grad_x = [xe](const Vec& x, double, int) { return Vec(x - xe); };
  return sc;
}

GeneratedSignal scenario_signal(const BuiltScenario& sc, double horizon) {
  if (sc.policy.modes.size() == 1) {
    // A single mode never switches; its jumps come from scenario_schedule.
    GeneratedSignal g;
    g.signal.start_times = {0.0};
    g.signal.modes = {sc.policy.modes.front()};
    g.signal.end_time = horizon;
    g.signal.stable_modes = sc.policy.modes;
    return g;
  }
  return generate_signal(sc.params, sc.adt, sc.aat, sc.policy, horizon);
}

JumpSchedule scenario_schedule(const BuiltScenario& sc, const SwitchingSignal& signal, double horizon) {
  if (sc.name == "halving") return scalar_halving_schedule(sc.params, horizon);
  return signal.schedule();
}

HybridArc run_scenario(const BuiltScenario& sc, const Vec& x0, const JumpSchedule& schedule,
                       double horizon, TimeScale scale, const SolverConfig& solver,
                       const SampleSpec& samples) {
  const TimerConfig timers = timers_for(sc.adt, sc.aat, sc.policy.unstable_modes, sc.policy.initial_tau);
  return simulate(sc.system, x0, schedule, horizon, scale, sc.params, timers, solver, samples);
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"consensus", "intermittent", "nesmr", "ptpsg", "halving"};
  return names;
}

}  // namespace pth
