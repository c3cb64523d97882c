#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "pthybrid/io.hpp"
#include "pthybrid/kernels.hpp"

namespace fs = std::filesystem;
using namespace pth;

namespace {

constexpr const char* kVersion = PTHYBRID_VERSION;

enum Exit { kOk = 0, kFail = 1, kUsage = 2, kIo = 3 };

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct RunOptions {
  std::string scenario;
  std::string spec_path;
  std::string figure = "none";
  std::string out;
  std::string solver = "rk45";
  std::string scale = "dilated";
  std::uint64_t seed = 1;
  int runs = 1;
  int jobs = 1;
  double tol = 1e-10;
  std::optional<double> horizon;
  std::optional<double> T, k, mu0, tau_d, tau_a, n0, t0;
};

std::string names_list() {
  std::string s;
  for (const auto& n : scenario_names()) s += (s.empty() ? "" : ", ") + n;
  return s;
}

// Everything needed to build a scenario: its name plus the resolved spec document.
struct Resolved {
  std::string name;
  json spec = json::object();
};

Resolved resolve(const RunOptions& o) {
  Resolved r;
  if (!o.spec_path.empty()) {
    r.spec = load_json(o.spec_path);
    // A run manifest replays through its embedded spec.
    if (r.spec.is_object() && r.spec.value("tool", std::string()) == "pthybrid") r.spec = r.spec.value("spec", json());
    if (!r.spec.is_object()) throw IoError("spec must be a JSON object");
    r.name = r.spec.value("scenario", std::string());
    if (r.name.empty()) throw IoError("spec has no 'scenario' field");
    if (!o.scenario.empty() && o.scenario != r.name)
      throw UsageError("--scenario " + o.scenario + " conflicts with spec scenario " + r.name);
  } else {
    r.name = o.scenario;
  }
  if (r.name.empty()) throw UsageError("one of --scenario or --spec is required; scenarios: " + names_list());
  const auto& names = scenario_names();
  if (std::find(names.begin(), names.end(), r.name) == names.end())
    throw UsageError("unknown scenario '" + r.name + "'; valid names: " + names_list());

  // Flag overrides land in the spec so the manifest can replay them.
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) r.spec[key] = *v;
  };
  put("T", o.T);
  put("k", o.k);
  put("mu0", o.mu0);
  put("tau_d", o.tau_d);
  put("N0", o.n0);
  if ((o.tau_a || o.t0) && r.name != "intermittent")
    throw UsageError("--tau-a and --t0-budget apply only to the intermittent scenario");
  put("tau_a", o.tau_a);
  put("T0", o.t0);
  r.spec["scenario"] = r.name;
  return r;
}

BuiltScenario build(const Resolved& r, std::uint64_t seed) {
  BuiltScenario sc;
  if (r.name == "consensus") {
    json j = r.spec;
    j["seed"] = seed;
    sc = build_consensus(consensus_spec_from_json(j));
  } else if (r.name == "intermittent") {
    sc = build_intermittent(intermittent_spec_from_json(r.spec));
  } else if (r.name == "nesmr") {
    sc = build_nesmr(game_spec_from_json(r.spec));
  } else if (r.name == "ptpsg") {
    sc = build_ptpsg(game_spec_from_json(r.spec));
  } else {
    sc = build_scalar_halving();
    sc.params = blowup_from_json(r.spec, sc.params);
    sc.adt.tau_d = r.spec.value("tau_d", sc.adt.tau_d);
    sc.adt.N0 = r.spec.value("N0", sc.adt.N0);
  }
  sc.policy.seed = seed;
  return sc;
}

SolverConfig solver_of(const RunOptions& o) {
  SolverConfig s;
  s.method = method_from_string(o.solver);
  s.rtol = o.tol;
  s.atol = o.tol * 1e-2;
  s.validate();
  return s;
}

double default_horizon(const std::string& figure) { return figure == "fig6" ? 0.99 : 0.999; }

std::string csv_text(const HybridArc& arc) {
  std::ostringstream os;
  write_arc_csv(os, arc);
  return os.str();
}

json adt_json(const AdtParams& a) { return {{"tau_d", a.tau_d}, {"N0", a.N0}}; }
json aat_json(const AatParams& a) { return {{"tau_a", a.tau_a}, {"T0", a.T0}}; }

// Certificate, theorem constants and trajectory bound for one arc.
json stability_report(const BuiltScenario& sc, const HybridArc& arc, bool& ok) {
  json j;
  try {
    CertificateSampling cs;
    cs.tau_d = sc.adt.tau_d;
    cs.N0 = sc.adt.N0;
    cs.mu0 = sc.params.mu0;
    const CertificateReport cert = verify_certificate(sc.certificate, sc.system, cs);
    const TheoremConstants k = sc.aat ? theorem2_constants(sc.certificate, sc.adt, *sc.aat)
                                      : theorem1_constants(sc.certificate, sc.adt);
    const BoundReport b = check_pt_bound(arc, k, sc.params, sc.bound, sc.set_offset);
    j["applicable"] = true;
    j["pass"] = cert.pass && b.pass;
    j["worst_margin"] = cert.worst_margin;
    j["witness"] = to_json(cert)["witness"];
    j["constants"] = to_json(k);
    j["certificate"] = to_json(cert);
    j["trajectory_bound"] = to_json(b);
    j["bound_channel"] = to_string(sc.bound.channel);
    ok = ok && cert.pass && b.pass;
  } catch (const std::invalid_argument& e) {
    // Hypotheses that fail outright leave the bound without a certificate.
    j["applicable"] = false;
    j["reason"] = e.what();
  }
  return j;
}

std::string bounds_csv(const BlowUpParams& base, const AdtParams& adt, const std::vector<double>& ks,
                       std::size_t grid) {
  std::ostringstream os;
  os << "delta,k,bound\n";
  double ups_max = 0.0;
  for (double k : ks) {
    BlowUpParams p = base;
    p.k = k;
    p.validate();
    const double ups = terminal_time(p);
    ups_max = std::max(ups_max, ups);
    for (std::size_t i = 0; i <= grid; ++i) {
      const double d = (1.0 - kDefaultEpsTerm) * ups * static_cast<double>(i) / static_cast<double>(grid);
      os << format_double(d) << ',' << format_double(k) << ',' << format_double(bu_adt_bound(p, adt, 0.0, d))
         << '\n';
    }
  }
  for (std::size_t i = 0; i <= grid; ++i) {
    const double d = (1.0 - kDefaultEpsTerm) * ups_max * static_cast<double>(i) / static_cast<double>(grid);
    os << format_double(d) << ",adt," << format_double(d / adt.tau_d + adt.N0) << '\n';
  }
  return os.str();
}

void write_fig2(const fs::path& dir, const BlowUpParams& base, const AdtParams& adt,
                const std::vector<double>& ks, std::size_t grid) {
  save_text((dir / "fig2.csv").string(), bounds_csv(base, adt, ks, grid));
}

template <class F>
void parallel_for(std::size_t count, int jobs, F&& body) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < count;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

constexpr std::size_t kFig4Ics = 20;

void write_fig4(const fs::path& dir, const BuiltScenario& sc, const JumpSchedule& schedule, double horizon,
                TimeScale scale, const SolverConfig& solver, std::uint64_t seed, int jobs) {
  std::vector<std::string> chunks(kFig4Ics);
  parallel_for(kFig4Ics, jobs, [&](std::size_t ic) {
    const Vec x0 = uniform_box(seed + ic, sc.system.n, 3.0);
    const HybridArc arc = run_scenario(sc, x0, schedule, horizon, scale, solver);
    const std::vector<double> err = distances_to(arc, sc.set_offset);
    std::ostringstream os;
    for (std::size_t i = 0; i < arc.samples.size(); ++i)
      os << format_double(arc.t_of(i)) << ',' << format_double(arc.s_of(i)) << ',' << arc.samples[i].j << ','
         << ic << ',' << format_double(err[i]) << '\n';
    chunks[ic] = os.str();
  });
  std::string text = "t,s,j,ic,error\n";
  for (const auto& c : chunks) text += c;
  save_text((dir / "fig4.csv").string(), text);
}

// fig3 and fig5 are the arc itself with a trimmed column set.
void write_trace(const fs::path& path, const HybridArc& arc, bool with_rho) {
  std::ostringstream os;
  os << "t,s,j,q,tau";
  if (with_rho) os << ",rho";
  const Eigen::Index n = arc.samples.empty() ? 0 : arc.samples.front().x.size();
  for (Eigen::Index d = 0; d < n; ++d) os << ",x" << d;
  os << '\n';
  for (std::size_t i = 0; i < arc.samples.size(); ++i) {
    const ArcSample& s = arc.samples[i];
    os << format_double(arc.t_of(i)) << ',' << format_double(arc.s_of(i)) << ',' << s.j << ',' << s.q << ','
       << format_double(s.tau);
    if (with_rho) os << ',' << format_double(s.rho);
    for (Eigen::Index d = 0; d < n; ++d) os << ',' << format_double(s.x[d]);
    os << '\n';
  }
  save_text(path.string(), os.str());
}

// Both game dynamics on one signal; error is the action distance to the equilibrium.
json write_fig6(const fs::path& dir, const Resolved& r, std::uint64_t seed, double horizon, TimeScale scale,
                const SolverConfig& solver) {
  const GameSpec gs = game_spec_from_json(r.spec);
  BuiltScenario a = build_nesmr(gs), b = build_ptpsg(gs);
  a.policy.seed = b.policy.seed = seed;
  const GeneratedSignal g = scenario_signal(a, horizon);
  const JumpSchedule js = g.signal.schedule();
  const HybridArc ra = run_scenario(a, a.x0, js, horizon, scale, solver);
  const HybridArc rb = run_scenario(b, b.x0, js, horizon, scale, solver);
  if (ra.samples.size() != rb.samples.size()) throw std::logic_error("fig6 sample grids differ");
  const Eigen::Index n = gs.equilibrium.size();
  auto err = [&](const HybridArc& arc, std::size_t i) {
    return (arc.samples[i].x.head(n) - gs.equilibrium).norm();
  };
  std::ostringstream os;
  os << "t,s,j,nesmr,ptpsg\n";
  for (std::size_t i = 0; i < ra.samples.size(); ++i)
    os << format_double(ra.t_of(i)) << ',' << format_double(ra.s_of(i)) << ',' << ra.samples[i].j << ','
       << format_double(err(ra, i)) << ',' << format_double(err(rb, i)) << '\n';
  save_text((dir / "fig6.csv").string(), os.str());
  const std::size_t last = ra.samples.size() - 1;
  return {{"nesmr_initial", err(ra, 0)}, {"nesmr_terminal", err(ra, last)},
          {"ptpsg_initial", err(rb, 0)}, {"ptpsg_terminal", err(rb, last)}};
}

const std::map<std::string, std::vector<std::string>> kFigureScenarios{
    {"fig2", {}},
    {"fig3", {"consensus"}},
    {"fig4", {"consensus"}},
    {"fig5", {"intermittent"}},
    {"fig6", {"nesmr", "ptpsg"}},
};

// Writes one seed's outputs into `dir`; returns false when a check fails.
bool run_one(const RunOptions& o, const Resolved& r, std::uint64_t seed, const fs::path& dir,
             const std::vector<std::string>& argv) {
  fs::create_directories(dir);
  const BuiltScenario sc = build(r, seed);
  const SolverConfig solver = solver_of(o);
  const TimeScale scale = time_scale_from_string(o.scale);
  const double frac = o.horizon.value_or(default_horizon(o.figure));
  if (!(frac > 0.0 && frac < 1.0)) throw UsageError("--horizon must lie in (0, 1)");
  const double horizon = frac * terminal_time(sc.params);

  const GeneratedSignal g = scenario_signal(sc, horizon);
  const JumpSchedule js = scenario_schedule(sc, g.signal, horizon);
  const HybridArc arc = run_scenario(sc, sc.x0, js, horizon, scale, solver);

  std::vector<std::string> files{"trajectory.csv", "trajectory.json", "signal.csv", "signal.json",
                                 "bounds.json", "manifest.json"};
  save_text((dir / "trajectory.csv").string(), csv_text(arc));
  save_json((dir / "trajectory.json").string(), arc_to_json(arc));
  {
    std::ostringstream os;
    write_signal_csv(os, g.signal);
    save_text((dir / "signal.csv").string(), os.str());
    save_json((dir / "signal.json").string(), signal_sidecar(g.signal));
  }

  bool ok = true;
  json bounds;
  bounds["scenario"] = sc.name;
  bounds["warnings"] = sc.warnings;
  const ValidationReport adt_rep = validate_bu_adt(g.signal, sc.params, sc.adt);
  bounds["signal"]["adt"] = to_json(adt_rep);
  ok = ok && adt_rep.pass;
  if (sc.aat) {
    const ValidationReport aat_rep = validate_bu_aat(g.signal, sc.params, *sc.aat);
    bounds["signal"]["aat"] = to_json(aat_rep);
    ok = ok && aat_rep.pass;
  }
  bounds["stability"] = stability_report(sc, arc, ok);
  const std::vector<double> d = distances_to(arc, sc.set_offset);
  bounds["error"] = {{"initial", d.front()}, {"terminal", d.back()}};

  if (o.figure == "fig2") {
    write_fig2(dir, sc.params, sc.adt, {1.0, 2.0, 3.0, 4.0}, 200);
    files.push_back("fig2.csv");
  } else if (o.figure == "fig3") {
    write_trace(dir / "fig3.csv", arc, false);
    files.push_back("fig3.csv");
  } else if (o.figure == "fig4") {
    write_fig4(dir, sc, js, horizon, scale, solver, seed, o.jobs);
    files.push_back("fig4.csv");
  } else if (o.figure == "fig5") {
    write_trace(dir / "fig5.csv", arc, true);
    files.push_back("fig5.csv");
  } else if (o.figure == "fig6") {
    bounds["fig6"] = write_fig6(dir, r, seed, horizon, scale, solver);
    files.push_back("fig6.csv");
  }
  bounds["pass"] = ok;
  save_json((dir / "bounds.json").string(), bounds);

  json manifest;
  manifest["tool"] = "pthybrid";
  manifest["version"] = kVersion;
  manifest["command"] = argv;
  manifest["scenario"] = sc.name;
  manifest["spec"] = r.spec;
  manifest["seed"] = seed;
  manifest["params"] = to_json(sc.params);
  manifest["adt"] = adt_json(sc.adt);
  if (sc.aat) manifest["aat"] = aat_json(*sc.aat);
  manifest["solver"] = {{"method", o.solver}, {"rtol", solver.rtol}, {"atol", solver.atol},
                        {"eps_term", solver.eps_term}};
  manifest["scale"] = o.scale;
  manifest["horizon_fraction"] = frac;
  manifest["figure"] = o.figure;
  manifest["simd"] = std::string(kernels::isa_name(kernels::active_isa()));
  manifest["files"] = files;
  // Replays this exact seed into a fresh directory.
  std::string rerun = "pthybrid run --spec manifest.json --seed " + std::to_string(seed) + " --solver " +
                      o.solver + " --tol " + format_double(o.tol) + " --scale " + o.scale +
                      " --horizon " + format_double(frac) + " --figure " + o.figure;
  manifest["rerun"] = rerun;
  save_json((dir / "manifest.json").string(), manifest);
  return ok;
}

int cmd_run(const RunOptions& o, const std::vector<std::string>& argv) {
  if (!kFigureScenarios.count(o.figure) && o.figure != "none")
    throw UsageError("unknown figure '" + o.figure + "'; valid: fig2, fig3, fig4, fig5, fig6, none");
  Resolved r = resolve(o);
  if (o.figure != "none") {
    const auto& allowed = kFigureScenarios.at(o.figure);
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), r.name) == allowed.end())
      throw UsageError(o.figure + " needs scenario " + allowed.front() + ", got " + r.name);
  }
  if (o.runs < 1) throw UsageError("--runs must be at least 1");
  std::string out = o.out;
  if (out.empty()) {
    const char* env = std::getenv("PT_HYBRID_OUT");
    out = env && *env ? env : "pthybrid-out";
  }
  const fs::path root(out);
  const std::size_t runs = static_cast<std::size_t>(o.runs);
  std::vector<char> ok(runs, 0);
  // Seeds run in parallel only when there are several; otherwise fig4 takes the jobs.
  RunOptions inner = o;
  if (runs > 1) inner.jobs = 1;
  parallel_for(runs, runs > 1 ? o.jobs : 1, [&](std::size_t i) {
    const std::uint64_t seed = o.seed + i;
    const fs::path dir = runs == 1 ? root : root / ("seed-" + std::to_string(seed));
    ok[i] = run_one(inner, r, seed, dir, argv);
  });
  bool all = true;
  for (std::size_t i = 0; i < runs; ++i) {
    std::cout << "seed " << o.seed + i << ": " << (ok[i] ? "pass" : "FAIL") << '\n';
    all = all && ok[i];
  }
  std::cout << "outputs in " << root.string() << '\n';
  return all ? kOk : kFail;
}

struct SignalOptions {
  std::string signal;
  std::string sidecar;
  std::string report;
  double T = 10.0, k = 1.0, mu0 = 1.0, tau_d = 1.0, n0 = 1.0;
  std::optional<double> tau_a, t0;
};

int cmd_validate_signal(const SignalOptions& o) {
  const std::string sidecar = o.sidecar.empty() ? fs::path(o.signal).replace_extension(".json").string() : o.sidecar;
  const BlowUpParams params{o.T, o.k, o.mu0};
  params.validate();
  const AdtParams adt{o.tau_d, o.n0};
  adt.validate();
  SwitchingSignal sig = read_signal(o.signal, sidecar);
  try {
    sig.validate(terminal_time(params));
  } catch (const std::exception& e) {
    throw IoError(std::string("malformed signal: ") + e.what());
  }
  const ValidationReport a = validate_bu_adt(sig, params, adt);
  json rep = {{"pass", a.pass}, {"adt", to_json(a)}};
  if (o.tau_a || o.t0) {
    const AatParams aat{o.tau_a.value_or(2.0), o.t0.value_or(0.0)};
    aat.validate();
    const ValidationReport b = validate_bu_aat(sig, params, aat);
    rep["aat"] = to_json(b);
    rep["pass"] = a.pass && b.pass;
  }
  const std::string text = rep.dump(2) + "\n";
  std::cout << text;
  if (!o.report.empty()) save_text(o.report, text);
  return rep["pass"].get<bool>() ? kOk : kFail;
}

struct BoundsOptions {
  double T = 10.0, mu0 = 1.0, tau_d = 1.0, n0 = 1.0;
  std::vector<double> ks{1.0, 2.0, 3.0, 4.0};
  std::size_t grid = 200;
  std::string out;
};

int cmd_bounds(const BoundsOptions& o) {
  if (o.grid < 1) throw UsageError("--grid must be positive");
  const AdtParams adt{o.tau_d, o.n0};
  adt.validate();
  const std::string text = bounds_csv({o.T, 1.0, o.mu0}, adt, o.ks, o.grid);
  if (o.out.empty())
    std::cout << text;
  else
    save_text(o.out, text);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prescribed-time hybrid switching toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  RunOptions ro;
  auto* run = app.add_subcommand("run", "Simulate a scenario and write trajectory, signal, bounds and figure data");
  run->add_option("--scenario", ro.scenario, "Scenario name");
  run->add_option("--spec", ro.spec_path, "Scenario spec JSON");
  run->add_option("--seed", ro.seed, "Seed for the signal and initial conditions");
  run->add_option("--T", ro.T, "Gain time constant");
  run->add_option("--k", ro.k, "Gain order");
  run->add_option("--mu0", ro.mu0, "Initial gain");
  run->add_option("--tau-d", ro.tau_d, "Dwell-time constant");
  run->add_option("--tau-a", ro.tau_a, "Activation-time constant");
  run->add_option("--n0", ro.n0, "Chatter bound");
  run->add_option("--t0-budget", ro.t0, "Activation budget");
  run->add_option("--figure", ro.figure, "fig2|fig3|fig4|fig5|fig6|none");
  run->add_option("--out", ro.out, "Output directory (default $PT_HYBRID_OUT)");
  run->add_option("--jobs", ro.jobs, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--runs", ro.runs, "Number of consecutive seeds");
  run->add_option("--solver", ro.solver, "rk4|rk45")->check(CLI::IsMember({"rk4", "rk45"}));
  run->add_option("--tol", ro.tol, "Relative tolerance for rk45")->check(CLI::PositiveNumber);
  run->add_option("--scale", ro.scale, "Integration scale")->check(CLI::IsMember({"original", "dilated"}));
  run->add_option("--horizon", ro.horizon, "Horizon as a fraction of the terminal time");

  SignalOptions so;
  auto* val = app.add_subcommand("validate-signal", "Check a signal against the blow-up dwell and activation conditions");
  val->add_option("--signal", so.signal, "start_time,mode CSV")->required();
  val->add_option("--sidecar", so.sidecar, "JSON sidecar (default: signal path with .json)");
  val->add_option("--report", so.report, "Also write the report here");
  val->add_option("--T", so.T);
  val->add_option("--k", so.k);
  val->add_option("--mu0", so.mu0);
  val->add_option("--tau-d", so.tau_d);
  val->add_option("--n0", so.n0);
  val->add_option("--tau-a", so.tau_a);
  val->add_option("--t0-budget", so.t0);

  BoundsOptions bo;
  auto* bnd = app.add_subcommand("bounds", "Emit blow-up dwell bound curves as delta,k,bound CSV");
  bnd->add_option("--T", bo.T);
  bnd->add_option("--mu0", bo.mu0);
  bnd->add_option("--tau-d", bo.tau_d);
  bnd->add_option("--n0", bo.n0);
  bnd->add_option("--k", bo.ks, "Gain orders")->delimiter(',');
  bnd->add_option("--grid", bo.grid, "Points per curve");
  bnd->add_option("--out", bo.out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(ro, std::vector<std::string>(argv, argv + argc));
    if (*val) return cmd_validate_signal(so);
    return cmd_bounds(bo);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const BuildError& e) {
    std::cerr << "build failed: " << e.what() << '\n';
    return kFail;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kFail;
  }
}
