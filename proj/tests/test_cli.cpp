#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "pthybrid/io.hpp"

namespace fs = std::filesystem;
using pth::json;

namespace {

const fs::path kScratch = TEST_SCRATCH;

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result cli(const std::string& args, const std::string& env = "") {
  fs::create_directories(kScratch);
  const fs::path out = kScratch / "stdout.txt", err = kScratch / "stderr.txt";
  const std::string cmd =
      env + " \"" PTHYBRID_BIN "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

// Column-name -> values for a CSV with a header row; non-numeric cells become NaN.
std::map<std::string, std::vector<double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> names;
  std::stringstream hs(line);
  for (std::string c; std::getline(hs, c, ',');) names.push_back(c);
  std::map<std::string, std::vector<double>> cols;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string cell;
    for (std::size_t i = 0; i < names.size(); ++i) {
      std::getline(ls, cell, ',');
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      cols[names[i]].push_back(end != cell.c_str() && *end == '\0' ? v : std::nan(""));
    }
  }
  return cols;
}

fs::path fresh(const std::string& name) {
  const fs::path p = kScratch / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  const Result r = cli("run --scenario warp --out " + fresh("u").string());
  CHECK(r.code == 2);
  for (const char* n : {"consensus", "intermittent", "nesmr", "ptpsg"}) CHECK(r.err.find(n) != std::string::npos);
  CHECK(cli("run --scenario intermittent --figure fig4 --out " + fresh("u").string()).code == 2);
  CHECK(cli("run --scenario consensus --figure fig9").code == 2);
  CHECK(cli("run --scenario consensus --bogus-flag").code == 2);
  CHECK(cli("").code == 2);
  CHECK(cli("run --scenario consensus --tau-a 2 --out " + fresh("u").string()).code == 2);
}

TEST_CASE("consensus run writes every declared file and the fig4 data") {
  const fs::path dir = fresh("fig4");
  const Result r = cli("run --scenario consensus --figure fig4 --jobs 2 --out " + dir.string());
  REQUIRE(r.code == 0);
  for (const char* f : {"trajectory.csv", "trajectory.json", "signal.csv", "signal.json", "bounds.json",
                        "manifest.json", "fig4.csv"})
    CHECK(fs::exists(dir / f));
  const auto cols = read_csv(dir / "fig4.csv");
  std::map<int, std::pair<double, double>> first_last;
  for (std::size_t i = 0; i < cols.at("ic").size(); ++i) {
    const int ic = static_cast<int>(cols.at("ic")[i]);
    if (!first_last.count(ic)) first_last[ic].first = cols.at("error")[i];
    first_last[ic].second = cols.at("error")[i];
  }
  CHECK(first_last.size() == 20);
  for (const auto& [ic, fl] : first_last) {
    CAPTURE(ic);
    CHECK(fl.second <= 1e-3 * fl.first);
  }
  const json bounds = pth::load_json((dir / "bounds.json").string());
  CHECK(bounds["pass"] == true);
  CHECK(bounds["stability"]["constants"].contains("kappa1"));
  const json manifest = pth::load_json((dir / "manifest.json").string());
  CHECK(manifest["seed"] == 1);
  CHECK(manifest["spec"]["scenario"] == "consensus");
}

TEST_CASE("a manifest replays to byte-identical CSVs") {
  const fs::path a = fresh("replay_a"), b = fresh("replay_b");
  REQUIRE(cli("run --scenario intermittent --figure fig5 --seed 4 --tau-d 1.2 --out " + a.string()).code == 0);
  REQUIRE(cli("run --spec " + (a / "manifest.json").string() + " --seed 4 --figure fig5 --out " + b.string()).code ==
          0);
  for (const char* f : {"trajectory.csv", "signal.csv", "fig5.csv"}) CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("output directory falls back to the environment") {
  const fs::path dir = fresh("env_out");
  REQUIRE(cli("run --scenario halving", "PT_HYBRID_OUT=\"" + dir.string() + "\"").code == 0);
  CHECK(fs::exists(dir / "trajectory.csv"));
}

TEST_CASE("several seeds run into separate directories") {
  const fs::path dir = fresh("multi");
  REQUIRE(cli("run --scenario consensus --runs 3 --jobs 3 --seed 10 --out " + dir.string()).code == 0);
  for (int s : {10, 11, 12}) CHECK(fs::exists(dir / ("seed-" + std::to_string(s)) / "trajectory.csv"));
  CHECK(slurp(dir / "seed-10" / "trajectory.csv") != slurp(dir / "seed-11" / "trajectory.csv"));
}

TEST_CASE("fig6 compares both game dynamics on one grid") {
  const fs::path dir = fresh("fig6");
  REQUIRE(cli("run --spec " CONFIG_DIR "/nesmr.json --figure fig6 --out " + dir.string()).code == 0);
  const auto cols = read_csv(dir / "fig6.csv");
  const auto& n = cols.at("nesmr");
  const auto& p = cols.at("ptpsg");
  CHECK(n.back() <= p.back());
  CHECK(n.back() <= 1e-2 * n.front());
  CHECK(p.back() <= 1e-2 * p.front());
  const json bounds = pth::load_json((dir / "bounds.json").string());
  CHECK(bounds["stability"]["applicable"] == false);
  CHECK_FALSE(bounds["warnings"].empty());
}

TEST_CASE("fig2 and fig3 data") {
  const fs::path dir = fresh("fig23");
  REQUIRE(cli("run --scenario consensus --figure fig2 --out " + dir.string()).code == 0);
  const auto f2 = read_csv(dir / "fig2.csv");
  CHECK(f2.at("delta").front() == 0.0);
  REQUIRE(cli("run --scenario consensus --figure fig3 --out " + dir.string()).code == 0);
  const auto f3 = read_csv(dir / "fig3.csv");
  CHECK(f3.count("x7") == 1);
  CHECK(f3.count("q") == 1);
}

TEST_CASE("bounds subcommand") {
  const Result r = cli("bounds --T 10 --mu0 1 --n0 3 --tau-d 1 --grid 50");
  REQUIRE(r.code == 0);
  std::istringstream is(r.out);
  std::string line;
  std::getline(is, line);
  CHECK(line == "delta,k,bound");
  std::map<std::string, double> last_delta;
  while (std::getline(is, line)) {
    const auto c1 = line.find(','), c2 = line.rfind(',');
    const double delta = std::stod(line.substr(0, c1));
    const std::string k = line.substr(c1 + 1, c2 - c1 - 1);
    if (delta == 0.0) CHECK(std::stod(line.substr(c2 + 1)) == 3.0);
    last_delta[k] = delta;
  }
  CHECK(last_delta.size() == 5);
  for (const char* k : {"1", "2", "3", "4"}) CHECK(last_delta[k] == doctest::Approx(10.0).epsilon(1e-5));

  const fs::path csv = kScratch / "bounds_mu2.csv";
  REQUIRE(cli("bounds --T 10 --mu0 2 --k 1,2,3 --out " + csv.string()).code == 0);
  const auto cols = read_csv(csv);
  std::map<double, double> end;
  for (std::size_t i = 0; i < cols.at("k").size(); ++i)
    if (!std::isnan(cols.at("k")[i])) end[cols.at("k")[i]] = cols.at("delta")[i];
  for (double k : {1.0, 2.0, 3.0}) CHECK(end[k] == doctest::Approx(10 * std::pow(2.0, -1 / k)).epsilon(1e-5));
}

TEST_CASE("validate-signal exit codes and reports") {
  const fs::path dir = fresh("signals");
  fs::create_directories(dir);
  std::ofstream(dir / "empty.csv") << "start_time,mode\n";
  std::ofstream(dir / "empty.json") << R"({"stable_modes":[1,2],"unstable_modes":[],"end_time":5})";
  Result r = cli("validate-signal --signal " + (dir / "empty.csv").string() + " --n0 3");
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["adt"]["min_slack"] == 3.0);

  {
    std::ofstream c(dir / "cluster.csv");
    c << "start_time,mode\n0,1\n";
    for (int i = 1; i <= 10; ++i) c << pth::format_double(4.9 + 0.01 * i) << ',' << (i % 2 ? 2 : 1) << '\n';
  }
  std::ofstream(dir / "cluster.json") << R"({"stable_modes":[1,2],"unstable_modes":[],"end_time":5.5})";
  r = cli("validate-signal --signal " + (dir / "cluster.csv").string() + " --T 10 --tau-d 1 --n0 3 --report " +
          (dir / "report.json").string());
  CHECK(r.code == 1);
  const json rep = pth::load_json((dir / "report.json").string());
  CHECK(rep["pass"] == false);
  CHECK(rep["adt"]["witness_t2"].get<double>() == doctest::Approx(5.0));
  CHECK(rep["adt"]["witness_t1"].get<double>() < 4.91);

  std::ofstream(dir / "broken.csv") << "start_time,mode\n0,one\n";
  std::ofstream(dir / "broken.json") << R"({"end_time":5})";
  CHECK(cli("validate-signal --signal " + (dir / "broken.csv").string()).code == 3);
  CHECK(cli("validate-signal --signal " + (dir / "missing.csv").string()).code == 3);

  // A generated signal passes its own validators after export.
  const fs::path run = fresh("gen");
  REQUIRE(cli("run --scenario intermittent --out " + run.string()).code == 0);
  r = cli("validate-signal --signal " + (run / "signal.csv").string() +
          " --T 10 --tau-d 1 --n0 1.5 --tau-a 2 --t0-budget 2");
  CHECK(r.code == 0);
  CHECK(json::parse(r.out).contains("aat"));
}
