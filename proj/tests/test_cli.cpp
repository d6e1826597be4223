#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "memsflow/cli.hpp"
#include "support.hpp"

using namespace memsflow;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string write_cfg(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << "n_x = 16\nn_z_layer = 4\nn_eta_gap = 4\n" << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("usage and configuration errors exit with 2") {
  const auto dir = testing::scratch_dir("cli_errors");
  const auto bad = write_cfg(dir, "bad.cfg", "H = 0\n");
  const auto r = cli({"validate", "--config", bad});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("H must be positive") != std::string::npos);
  CHECK(cli({"simulate", "--config", bad, "--out", (dir / "o").string()}).code == kExitConfig);
  CHECK(cli({"validate", "--config", (dir / "missing.cfg").string()}).code == kExitConfig);
  CHECK(cli({"frobnicate"}).code == kExitConfig);
  CHECK(cli({}).code == kExitConfig);

  const auto good = write_cfg(dir, "good.cfg", "V = 0.1\n");
  CHECK(cli({"sweep", "--config", good, "--param", "V", "--out", (dir / "s").string()}).code == kExitConfig);
  CHECK(cli({"sweep", "--config", good, "--param", "beta", "--values", "1,2", "--out", (dir / "s").string()}).code ==
        kExitConfig);

  const auto sigma = write_cfg(dir, "sigma.cfg", "sigma1 = 1\nsigma_min = 1.5\nsigma_max = 2\n");
  CHECK(cli({"oracle", "--config", sigma}).code == kExitConfig);
}

TEST_CASE("version and validate echo") {
  const auto v = cli({"--version"});
  CHECK(v.code == kExitOk);
  CHECK(v.out.find(version()) != std::string::npos);

  const auto dir = testing::scratch_dir("cli_validate");
  const auto cfg = write_cfg(dir, "c.cfg", "V = 0.1\n");
  const auto r = cli({"validate", "--config", cfg});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("V = 0.10000000000000001") != std::string::npos);
  CHECK(r.out.find("H = 1  # default") != std::string::npos);
  CHECK(r.out.find("delta0") != std::string::npos);
}

TEST_CASE("decay simulation writes a complete, reproducible run directory") {
  const auto dir = testing::scratch_dir("cli_decay");
  const auto cfg = write_cfg(dir, "decay.cfg",
                             "V = 0\nu0_profile = bump\nu0_amplitude = 0.1\nt_end = 5\nsnapshot_every = 2\n");
  const auto r = cli({"simulate", "--config", cfg, "--out", (dir / "a").string(), "--quiet"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.empty());

  const auto man = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(man["completed"] == true);
  CHECK(man["checks"]["passed"] == true);
  CHECK(man["version"] == version());
  for (const auto& f : man["files"]) CHECK(fs::exists(dir / "a" / f.get<std::string>()));
  CHECK(fs::exists(dir / "a" / "snapshots" / "step_000004.json"));

  const auto rows = csv_rows(dir / "a" / "trace.csv");
  REQUIRE(rows.size() == 7);  // header + u_0..u_5
  for (std::size_t k = 2; k < rows.size(); ++k) CHECK(std::stod(rows[k][3]) < std::stod(rows[k - 1][3]));

  REQUIRE(cli({"simulate", "--config", cfg, "--out", (dir / "b").string(), "--quiet"}).code == kExitOk);
  CHECK(slurp(dir / "a" / "trace.csv") == slurp(dir / "b" / "trace.csv"));
  CHECK(slurp(dir / "a" / "snapshots" / "step_000002.json") == slurp(dir / "b" / "snapshots" / "step_000002.json"));
}

TEST_CASE("touchdown onset is recorded in the manifest") {
  const auto dir = testing::scratch_dir("cli_touchdown");
  const auto cfg = write_cfg(dir, "t.cfg", "V = 10\ndelta = 0.001\nt_end = 0.06\n");
  const auto r = cli({"simulate", "--config", cfg, "--out", (dir / "o").string()});
  CHECK(r.code == kExitOk);
  CHECK(r.err.find("exceeds delta0") != std::string::npos);
  const auto man = nlohmann::json::parse(slurp(dir / "o" / "manifest.json"));
  REQUIRE(man["coincidence_onset"].is_object());
  CHECK(man["coincidence_onset"]["step"].get<int>() > 0);
  CHECK(man["delta_exceeds_delta0"] == true);
}

TEST_CASE("a failing step exits with 1 after flushing the partial trace") {
  const auto dir = testing::scratch_dir("cli_fail");
  const auto cfg = write_cfg(dir, "f.cfg", "V = 10\nmax_fp = 1\ndelta = 0.001\nt_end = 0.05\n");
  const auto r = cli({"simulate", "--config", cfg, "--out", (dir / "o").string(), "--quiet"});
  CHECK(r.code == kExitFailure);
  CHECK(fs::exists(dir / "o" / "trace.csv"));
  const auto man = nlohmann::json::parse(slurp(dir / "o" / "manifest.json"));
  CHECK(man["completed"] == false);
  CHECK_FALSE(man["error"].get<std::string>().empty());
}

TEST_CASE("oracle suite") {
  const auto dir = testing::scratch_dir("cli_oracle");
  const auto ok = write_cfg(dir, "o.cfg", "sigma1 = 1\nsigma2 = 2\nV = 2\n");
  const auto r = cli({"oracle", "--config", ok});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("FAIL") == std::string::npos);
  // n_x = 8: the gradient tolerance follows the schedule and is printed.
  const auto coarse = fs::path(dir / "c.cfg").string();
  std::ofstream(coarse) << "n_x = 8\nn_z_layer = 4\nn_eta_gap = 4\n";
  const auto c = cli({"oracle", "--config", coarse});
  CHECK(c.out.find("tolerance 0.64") != std::string::npos);
  CHECK(c.out.find("directional derivative at s = 1e-3") != std::string::npos);
}

TEST_CASE("sweep runs each value in its own directory") {
  const auto dir = testing::scratch_dir("cli_sweep");
  const auto cfg = write_cfg(dir, "s.cfg", "delta = 0.01\nt_end = 0.1\n");
  // At V = 10 the step map stops contracting for delta = 0.01; 1e-3 still converges.
  const auto vcfg = write_cfg(dir, "v.cfg", "delta = 0.001\nt_end = 0.1\n");
  const auto r = cli({"sweep", "--config", vcfg, "--param", "V", "--values", "0.05,1,10", "--out",
                      (dir / "o").string(), "--quiet"});
  CHECK(r.code == kExitOk);
  const auto rows = csv_rows(dir / "o" / "sweep.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0][0] == "param");
  // Stronger actuation closes the gap further.
  CHECK(std::stod(rows[1][6]) > std::stod(rows[2][6]));
  CHECK(std::stod(rows[2][6]) > std::stod(rows[3][6]));
  CHECK(rows[3][7] == "1");
  CHECK(fs::exists(dir / "o" / "run_0" / "trace.csv"));
  CHECK(fs::exists(dir / "o" / "run_2" / "manifest.json"));

  const auto d = cli({"sweep", "--config", cfg, "--param", "delta", "--values", "0.02,0.01,0.005", "--out",
                      (dir / "d").string(), "--quiet"});
  CHECK(d.code == kExitOk);
  const auto drows = csv_rows(dir / "d" / "sweep.csv");
  CHECK(drows[1][11].empty());
  CHECK(std::stod(drows[3][11]) < std::stod(drows[2][11]));
}
