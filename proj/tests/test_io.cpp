#include <doctest.h>

#include <cmath>
#include <sstream>

#include "pthybrid/io.hpp"

using namespace pth;

namespace {

HybridArc small_arc(bool with_rho) {
  HybridArc arc;
  arc.scale = TimeScale::dilated;
  arc.params = {10, 1, 1};
  arc.has_rho = with_rho;
  for (int i = 0; i < 3; ++i) {
    ArcSample s;
    s.time = 0.1 * i;
    s.j = static_cast<std::size_t>(i / 2);
    s.q = 1 + i % 2;
    s.tau = 0.25 * i;
    s.rho = 0.5;
    s.mu = 1.0 + i;
    s.x = Vec::Constant(2, 1.0 / 3.0 + i);
    arc.samples.push_back(s);
  }
  arc.domain.intervals = {{0.0, 0.2, 0}};
  return arc;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("doubles are written with 17 significant digits and read back exactly") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 6.02214076e23}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("arc CSV layout") {
  std::ostringstream os;
  write_arc_csv(os, small_arc(false));
  const auto l = lines(os.str());
  REQUIRE(l.size() == 4);
  CHECK(l[0] == "t,s,j,q,tau,rho,mu,x0,x1");
  // rho is blank when the arc carries no activation timer.
  CHECK(l[1].find(",,") != std::string::npos);
  std::ostringstream os2;
  write_arc_csv(os2, small_arc(true));
  CHECK(lines(os2.str())[1].find(",0.5,") != std::string::npos);
  // Dilated arcs still carry original time in the first column.
  const double t1 = std::stod(l[2].substr(0, l[2].find(',')));
  CHECK(t1 == contract({10, 1, 1}, 0.1));
}

TEST_CASE("arc JSON mirrors the CSV columns") {
  const json j = arc_to_json(small_arc(false));
  CHECK(j["scale"] == "dilated");
  CHECK(j["samples"].size() == 3);
  CHECK(j["samples"][1]["rho"].is_null());
  CHECK(j["samples"][2]["x"][1].get<double>() == 1.0 / 3.0 + 2);
  CHECK(j["samples"][1]["s"].get<double>() == 0.1);
}

TEST_CASE("signal round trip through CSV and sidecar") {
  SwitchingSignal s;
  s.start_times = {0.0, 1.0 / 3.0, 2.5};
  s.modes = {1, 3, 2};
  s.end_time = 4.0;
  s.stable_modes = {1, 2};
  s.unstable_modes = {3};
  std::ostringstream os;
  write_signal_csv(os, s);
  std::istringstream is(os.str());
  const SwitchingSignal r = parse_signal(is, signal_sidecar(s));
  CHECK(r.start_times == s.start_times);
  CHECK(r.modes == s.modes);
  CHECK(r.end_time == s.end_time);
  CHECK(r.unstable_modes == s.unstable_modes);
}

TEST_CASE("an empty signal is one piece in the first listed mode") {
  std::istringstream is("start_time,mode\n");
  const SwitchingSignal r = parse_signal(is, json{{"stable_modes", {2, 1}}, {"end_time", 3.0}});
  CHECK(r.start_times == std::vector<double>{0.0});
  CHECK(r.modes == std::vector<int>{2});
}

TEST_CASE("malformed signals raise IoError") {
  const json side{{"end_time", 3.0}};
  std::istringstream no_header("0,1\n");
  CHECK_THROWS_AS(parse_signal(no_header, side), IoError);
  std::istringstream bad_row("start_time,mode\n0,x\n");
  CHECK_THROWS_AS(parse_signal(bad_row, side), IoError);
  std::istringstream trailing("start_time,mode\n0.5abc,1\n");
  CHECK_THROWS_AS(parse_signal(trailing, side), IoError);
  std::istringstream ok("start_time,mode\n0,1\n");
  CHECK_THROWS_AS(parse_signal(ok, json::object()), IoError);
  CHECK_THROWS_AS(read_signal("/nonexistent/signal.csv", "/nonexistent/signal.json"), IoError);
  CHECK_THROWS_AS(load_json("/nonexistent.json"), IoError);
}

TEST_CASE("report JSON field names") {
  const json v = to_json(ValidationReport{false, -0.5, 1.0, 2.0});
  for (const char* key : {"pass", "min_slack", "witness_t1", "witness_t2"}) CHECK(v.contains(key));
  TheoremConstants k;
  k.kappa1 = 2.0;
  const json kj = to_json(k);
  for (const char* key : {"r", "lambda", "kappa1", "kappa2", "kappa3"}) CHECK(kj.contains(key));
  CertificateReport c;
  c.witness_x = Vec::Zero(2);
  const json cj = to_json(c);
  for (const char* key : {"pass", "worst_margin", "witness"}) CHECK(cj.contains(key));
}

TEST_CASE("scenario specs parse with overrides and reject typos") {
  const ConsensusSpec c = consensus_spec_from_json(
      json{{"scenario", "consensus"}, {"T", 5.0}, {"tau_d", 0.5}, {"seed", 9}, {"cycles", {{0, 1, 2, 3}}},
           {"modes", {1}}});
  CHECK(c.params.T == 5.0);
  CHECK(c.adt.tau_d == 0.5);
  CHECK(c.seed == 9);
  CHECK(c.laplacians.size() == 1);
  CHECK_THROWS_AS(consensus_spec_from_json(json{{"tau-d", 1.0}}), IoError);
  CHECK_THROWS_AS(consensus_spec_from_json(json{{"certificate", "fancy"}}), IoError);
  CHECK_THROWS_AS(consensus_spec_from_json(json{{"T", "ten"}}), IoError);

  const IntermittentSpec i = intermittent_spec_from_json(json{{"tau_a", 3.0}, {"order", {1, 3, 2}}});
  CHECK(i.aat.tau_a == 3.0);
  CHECK(i.order == std::vector<int>{1, 3, 2});

  const GameSpec g = game_spec_from_json(json{{"preset", "tuned"}, {"x0", {0.0, 1.0}}});
  CHECK(g.adt.tau_d == tuned_game_spec().adt.tau_d);
  CHECK(g.x0[1] == 1.0);
  CHECK_THROWS_AS(game_spec_from_json(json{{"preset", "other"}}), IoError);
}
