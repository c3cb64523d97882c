#include "pthybrid/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace pth {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_arc_csv(std::ostream& os, const HybridArc& arc) {
  const std::size_t n = arc.samples.empty() ? 0 : static_cast<std::size_t>(arc.samples.front().x.size());
  os << "t,s,j,q,tau,rho,mu";
  for (std::size_t i = 0; i < n; ++i) os << ",x" << i;
  os << '\n';
  for (std::size_t i = 0; i < arc.samples.size(); ++i) {
    const ArcSample& smp = arc.samples[i];
    os << format_double(arc.t_of(i)) << ',' << format_double(arc.s_of(i)) << ',' << smp.j << ',' << smp.q
       << ',' << format_double(smp.tau) << ',';
    if (arc.has_rho) os << format_double(smp.rho);
    os << ',' << format_double(smp.mu);
    for (Eigen::Index d = 0; d < smp.x.size(); ++d) os << ',' << format_double(smp.x[d]);
    os << '\n';
  }
}

json arc_to_json(const HybridArc& arc) {
  json rows = json::array();
  for (std::size_t i = 0; i < arc.samples.size(); ++i) {
    const ArcSample& smp = arc.samples[i];
    json row = {{"t", arc.t_of(i)}, {"s", arc.s_of(i)}, {"j", smp.j}, {"q", smp.q}, {"tau", smp.tau},
                {"mu", smp.mu}};
    row["rho"] = arc.has_rho ? json(smp.rho) : json(nullptr);
    row["x"] = std::vector<double>(smp.x.data(), smp.x.data() + smp.x.size());
    rows.push_back(std::move(row));
  }
  json domain = json::array();
  for (const auto& iv : arc.domain.intervals) domain.push_back({iv.t_start, iv.t_end, iv.j});
  return {{"scale", to_string(arc.scale)}, {"params", to_json(arc.params)}, {"domain", domain},
          {"samples", rows}};
}

void write_signal_csv(std::ostream& os, const SwitchingSignal& signal) {
  os << "start_time,mode\n";
  for (std::size_t i = 0; i < signal.start_times.size(); ++i)
    os << format_double(signal.start_times[i]) << ',' << signal.modes[i] << '\n';
}

json signal_sidecar(const SwitchingSignal& signal) {
  return {{"stable_modes", signal.stable_modes},
          {"unstable_modes", signal.unstable_modes},
          {"end_time", signal.end_time}};
}

SwitchingSignal parse_signal(std::istream& csv, const json& sidecar) {
  SwitchingSignal sig;
  try {
    sig.end_time = sidecar.at("end_time").get<double>();
    sig.stable_modes = sidecar.value("stable_modes", std::vector<int>{});
    sig.unstable_modes = sidecar.value("unstable_modes", std::vector<int>{});
  } catch (const json::exception& e) {
    throw IoError(std::string("bad signal sidecar: ") + e.what());
  }
  std::string line;
  if (!std::getline(csv, line)) throw IoError("signal file is empty; expected a start_time,mode header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "start_time,mode") throw IoError("signal header must be start_time,mode");
  std::size_t lineno = 1;
  while (std::getline(csv, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("signal line " + std::to_string(lineno) + " has no comma");
    try {
      std::size_t used = 0;
      const std::string a = line.substr(0, comma), b = line.substr(comma + 1);
      const double t = std::stod(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
      const int q = std::stoi(b, &used);
      if (used != b.size()) throw std::invalid_argument(b);
      sig.start_times.push_back(t);
      sig.modes.push_back(q);
    } catch (const std::exception&) {
      throw IoError("cannot parse signal line " + std::to_string(lineno) + ": " + line);
    }
  }
  if (sig.start_times.empty()) {
    const int q = !sig.stable_modes.empty() ? sig.stable_modes.front()
                  : !sig.unstable_modes.empty() ? sig.unstable_modes.front()
                                                : 1;
    sig.start_times = {0.0};
    sig.modes = {q};
  }
  return sig;
}

SwitchingSignal read_signal(const std::string& csv_path, const std::string& sidecar_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open " + csv_path);
  return parse_signal(in, load_json(sidecar_path));
}

json to_json(const ValidationReport& r) {
  return {{"pass", r.pass}, {"min_slack", r.min_slack}, {"witness_t1", r.witness_t1},
          {"witness_t2", r.witness_t2}};
}

json to_json(const TheoremConstants& k) {
  json j = {{"r", k.r}, {"lambda", k.lambda}, {"kappa1", k.kappa1}, {"kappa2", k.kappa2},
            {"kappa3", k.kappa3}};
  if (k.theorem2) j["delta"] = k.delta;
  if (!k.note.empty()) j["note"] = k.note;
  return j;
}

json to_json(const CertificateReport& r) {
  return {{"pass", r.pass},
          {"worst_margin", r.worst_margin},
          {"worst_check", r.worst_check},
          {"witness", {{"x", std::vector<double>(r.witness_x.data(), r.witness_x.data() + r.witness_x.size())},
                       {"tau", r.witness_tau},
                       {"q", r.witness_q}}},
          {"margins", {{"sandwich", r.sandwich_margin}, {"flow", r.flow_margin}, {"reset", r.reset_margin}}},
          {"gradient_error", r.gradient_error},
          {"samples", r.samples}};
}

json to_json(const BoundReport& r) {
  return {{"pass", r.pass}, {"max_ratio", r.max_ratio}, {"worst_index", r.worst_index},
          {"samples", r.distance.size()}};
}

json to_json(const BlowUpParams& p) { return {{"T", p.T}, {"k", p.k}, {"mu0", p.mu0}}; }

json to_json(const EigenvalueFloorReport& r) {
  return {{"pass", r.pass}, {"min_eigenvalue", r.min_eigenvalue}, {"nu_M", r.nu_M},
          {"witness", {{"q", r.witness_q}, {"tau", r.witness_tau}, {"rho", r.witness_rho}}}};
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("cannot parse " + path + ": " + e.what());
  }
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

void save_json(const std::string& path, const json& j) { save_text(path, j.dump(2) + "\n"); }

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw IoError("scenario spec must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw IoError("unknown spec field '" + it.key() + "'");
}

Mat matrix_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw IoError("empty matrix in spec");
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw IoError("ragged matrix in spec");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

Vec vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw IoError(std::string("bad scenario spec: ") + e.what());
  }
}

}  // namespace

BlowUpParams blowup_from_json(const json& j, BlowUpParams base) {
  base.T = j.value("T", base.T);
  base.k = j.value("k", base.k);
  base.mu0 = j.value("mu0", base.mu0);
  return base;
}

ConsensusSpec consensus_spec_from_json(const json& j) {
  return guarded([&] {
    check_keys(j, {"scenario", "T", "k", "mu0", "tau_d", "N0", "agents", "dim", "target", "B", "cycles",
                   "laplacians", "modes", "k_r", "k_c", "certificate", "seed"});
    ConsensusSpec s = default_consensus_spec();
    s.params = blowup_from_json(j, s.params);
    s.adt.tau_d = j.value("tau_d", s.adt.tau_d);
    s.adt.N0 = j.value("N0", s.adt.N0);
    s.agents = j.value("agents", s.agents);
    s.dim = j.value("dim", s.dim);
    if (j.contains("target")) s.target = vector_from_json(j["target"]);
    if (j.contains("B")) {
      s.B.clear();
      for (const auto& b : j["B"]) s.B.push_back(matrix_from_json(b));
    }
    if (j.contains("modes")) s.modes = j["modes"].get<std::vector<int>>();
    if (j.contains("cycles")) {
      s.laplacians.clear();
      for (const auto& c : j["cycles"]) s.laplacians.push_back(cycle_laplacian(c.get<std::vector<int>>(), s.agents));
    }
    if (j.contains("laplacians")) {
      s.laplacians.clear();
      for (const auto& l : j["laplacians"]) s.laplacians.push_back(matrix_from_json(l));
    }
    s.k_r = j.value("k_r", s.k_r);
    s.k_c = j.value("k_c", s.k_c);
    const std::string cert = j.value("certificate", std::string("common"));
    if (cert == "common")
      s.certificate = ConsensusCertificate::common;
    else if (cert == "per_mode")
      s.certificate = ConsensusCertificate::per_mode;
    else
      throw IoError("certificate must be 'common' or 'per_mode'");
    s.seed = j.value("seed", s.seed);
    return s;
  });
}

IntermittentSpec intermittent_spec_from_json(const json& j) {
  return guarded([&] {
    check_keys(j, {"scenario", "T", "k", "mu0", "tau_d", "N0", "tau_a", "T0", "stable_modes",
                   "unstable_modes", "order", "eta", "x0"});
    IntermittentSpec s;
    s.params = blowup_from_json(j, s.params);
    s.adt.tau_d = j.value("tau_d", s.adt.tau_d);
    s.adt.N0 = j.value("N0", s.adt.N0);
    s.aat.tau_a = j.value("tau_a", s.aat.tau_a);
    s.aat.T0 = j.value("T0", s.aat.T0);
    s.stable_modes = j.value("stable_modes", s.stable_modes);
    s.unstable_modes = j.value("unstable_modes", s.unstable_modes);
    s.order = j.value("order", s.order);
    s.eta = j.value("eta", s.eta);
    s.x0 = j.value("x0", s.x0);
    return s;
  });
}

GameSpec game_spec_from_json(const json& j) {
  return guarded([&] {
    check_keys(j, {"scenario", "preset", "T", "k", "mu0", "tau_d", "N0", "A", "modes", "theta", "equilibrium",
                   "eta_low", "eta_high", "delta_eta", "delta_d", "enforce", "x0"});
    const std::string preset = j.value("preset", std::string("reference"));
    GameSpec s;
    if (preset == "reference")
      s = reference_game_spec();
    else if (preset == "tuned")
      s = tuned_game_spec();
    else
      throw IoError("preset must be 'reference' or 'tuned'");
    s.params = blowup_from_json(j, s.params);
    s.adt.tau_d = j.value("tau_d", s.adt.tau_d);
    s.adt.N0 = j.value("N0", s.adt.N0);
    if (j.contains("A")) {
      s.A.clear();
      for (const auto& a : j["A"]) s.A.push_back(matrix_from_json(a));
    }
    s.modes = j.value("modes", s.modes);
    s.theta = j.value("theta", s.theta);
    if (j.contains("equilibrium")) s.equilibrium = vector_from_json(j["equilibrium"]);
    s.eta_low = j.value("eta_low", s.eta_low);
    s.eta_high = j.value("eta_high", s.eta_high);
    s.delta_eta = j.value("delta_eta", s.delta_eta);
    s.delta_d = j.value("delta_d", s.delta_d);
    s.enforce = j.value("enforce", s.enforce);
    if (j.contains("x0")) s.x0 = vector_from_json(j["x0"]);
    return s;
  });
}

}  // namespace pth
