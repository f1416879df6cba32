#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "catch_amalgamated.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "lockloss_cli_test" / name;
  fs::remove_all(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(LOCKLOSS_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string summary_value(const fs::path& dir, const std::string& key) {
  std::istringstream in(slurp(dir / "summary.txt"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  }
  return {};
}

}  // namespace

TEST_CASE("action-min reports the first-order exponent", "[cli]") {
  const fs::path dir = scratch("action1");
  REQUIRE(run("action-min --order 1 --output-dir " + dir.string()) == 0);
  CHECK(std::stod(summary_value(dir, "value")) == Catch::Approx(8.0).epsilon(0.01));
  CHECK(summary_value(dir, "subcommand") == "action-min");
  CHECK(summary_value(dir, "master_seed") == "1");
  CHECK(fs::exists(dir / "path.csv"));
  CHECK(slurp(dir / "result.csv").rfind("order,value,converged,iterations\n", 0) == 0);
  CHECK(slurp(dir / "path.csv").rfind("t,e\n", 0) == 0);
}

TEST_CASE("cnr-gap for the second-order pair", "[cli]") {
  const fs::path dir = scratch("gap2");
  REQUIRE(run("cnr-gap --order 2 --exp-nc 5 --exp-c 0.85 --output-dir " + dir.string()) == 0);
  CHECK(std::stod(summary_value(dir, "gap_db")) == Catch::Approx(10.2607).margin(1e-4));
}

TEST_CASE("configuration errors exit 2 and write nothing", "[cli]") {
  const fs::path dir = scratch("bad");
  CHECK(run("cnr-gap --order 2 --exp-nc 5 --output-dir " + dir.string()) == 2);
  CHECK_FALSE(fs::exists(dir));
  CHECK(run("action-min --order 3 --output-dir " + dir.string()) == 2);
  CHECK(run("action-min --order one --output-dir " + dir.string()) == 2);
  CHECK(run("action-min --order 1") == 2);
  CHECK(run("no-such-command --output-dir " + dir.string()) == 2);
  CHECK(run("") == 2);
  CHECK(run("mtll-mc --order 1 --epsilon 0.5 --horizon 10 --runs 0 --output-dir " + dir.string()) == 2);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("config file with flag override", "[cli]") {
  const fs::path dir = scratch("cfg");
  fs::create_directories(dir.parent_path());
  const fs::path cfg = dir.parent_path() / "gap.cfg";
  std::ofstream(cfg) << "# gap\norder = 1\nexp_nc = 8\nexp-c = 4\noutput_dir = " << dir.string() << "\n";
  REQUIRE(run("cnr-gap --config " + cfg.string() + " --exp-c 2") == 0);
  CHECK(summary_value(dir, "exp_c") == "2");
  CHECK(std::stod(summary_value(dir, "gap_db")) == Catch::Approx(12.0412).margin(1e-4));

  const fs::path bad_cfg = dir.parent_path() / "bad.cfg";
  std::ofstream(bad_cfg) << "order = 1\nexp_nc = 8\nexp_c = 2\nrunz = 3\n";
  const fs::path dir2 = scratch("cfg2");
  CHECK(run("cnr-gap --config " + bad_cfg.string() + " --output-dir " + dir2.string()) == 2);
  CHECK_FALSE(fs::exists(dir2));
  CHECK(run("cnr-gap --config /nonexistent/file.cfg --output-dir " + dir2.string()) == 2);
}

TEST_CASE("non-convergence exits 3 and keeps the outputs", "[cli]") {
  const fs::path dir = scratch("coarse");
  CHECK(run("action-min --order 2 --grid-points 32 --output-dir " + dir.string()) == 3);
  CHECK(fs::exists(dir / "summary.txt"));
  CHECK(summary_value(dir, "converged") == "false");
}

TEST_CASE("re-runs are byte-identical", "[cli]") {
  const std::string args = "mtll-mc --order 1 --epsilon-grid 0.5,0.4 --horizon 200 --runs 40 --master-seed 7";
  const fs::path a = scratch("rep_a"), b = scratch("rep_b");
  REQUIRE(run(args + " --workers 1 --output-dir " + a.string()) == 0);
  REQUIRE(run(args + " --workers 3 --output-dir " + b.string()) == 0);
  const std::string body = slurp(a / "mtll.csv");
  CHECK(body.rfind("epsilon,runs,n_events,censored,mtll_mean,mtll_stderr\n", 0) == 0);
  CHECK(body == slurp(b / "mtll.csv"));

  const std::string sim = "simulate --order 2 --epsilon 0.4 --horizon 20 --master-seed 3";
  const fs::path c = scratch("sim_a"), d = scratch("sim_b");
  REQUIRE(run(sim + " --output-dir " + c.string()) == 0);
  REQUIRE(run(sim + " --output-dir " + d.string()) == 0);
  for (const char* f : {"signal.csv", "measurements.csv", "error.csv", "slips.csv"}) {
    CHECK(slurp(c / f) == slurp(d / f));
    CHECK_FALSE(slurp(c / f).empty());
  }
}

TEST_CASE("cost-stats and order-stats outputs", "[cli]") {
  const fs::path dir = scratch("cost");
  REQUIRE(run("cost-stats --order 1 --epsilon 0.5 --bump-starts 2,5 --bump-width 3 --draws 200 --output-dir " +
              dir.string()) == 0);
  CHECK(fs::exists(dir / "cost_stats.csv"));
  CHECK(fs::exists(dir / "covariance.csv"));
  CHECK(fs::exists(dir / "delta_j_moments.csv"));
  const fs::path os = scratch("order");
  REQUIRE(run("order-stats --order 1 --epsilon 0.5 --draws 20000 --output-dir " + os.string()) == 0);
  CHECK(slurp(os / "argmin.csv").rfind("member_id,m,freq,log_freq\n", 0) == 0);
}

TEST_CASE("counterexample, eikonal and figures", "[cli]") {
  const fs::path ce = scratch("counter");
  REQUIRE(run("counterexample --output-dir " + ce.string()) == 0);
  CHECK(fs::exists(ce / "counterexample.csv"));
  const fs::path ek = scratch("eik");
  REQUIRE(run("eikonal --n-rays 16 --dt 0.01 --output-dir " + ek.string()) == 0);
  CHECK(slurp(ek / "rays.csv").rfind("ray_id,t,e,phi,pe,pphi,Phi\n", 0) == 0);
  const fs::path fg = scratch("fig");
  REQUIRE(run("figures --output-dir " + fg.string()) == 0);
  CHECK(slurp(fg / "exponents.csv").rfind("estimator,order,exponent,source\n", 0) == 0);
  for (const char* f : {"mtll_vs_inv_epsilon_order1.csv", "mtll_vs_inv_epsilon_order2.csv", "mtll_vs_cnr_order1.csv",
                        "mtll_vs_cnr_order2.csv"}) {
    CHECK(slurp(fg / f).rfind("x,ln_tau,estimator,order\n", 0) == 0);
  }
}
