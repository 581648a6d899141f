#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "oracle_helpers.hpp"

// Drives the installed binary end to end.

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const char* leaf = nullptr) const {
    return leaf ? (path / leaf).string() : path.string();
  }
};

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(PTC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

const std::string kConfigs = PTC_CONFIG_DIR;

}  // namespace

TEST_CASE("cli: usage and config errors exit with code 2") {
  CHECK(run_cli("") == 2);
  CHECK(run_cli("bogus-subcommand") == 2);
  CHECK(run_cli("simulate --config /nonexistent.cfg --out-dir /tmp/x") == 3);

  TempDir dir("ptc_cli_badcfg");
  {
    std::ofstream bad(dir.str("bad.cfg"));
    bad << "run.n_decays = 0\n";
  }
  CHECK(run_cli("simulate --config " + dir.str("bad.cfg") +
                " --out-dir " + dir.str()) == 2);
}

TEST_CASE("cli: rates table") {
  TempDir dir("ptc_cli_rates");
  const std::string out = dir.str("rates.csv");
  REQUIRE(run_cli("rates --config " + kConfigs + "/paper_s3.cfg --out " +
                  out) == 0);
  const std::string csv = oracle::slurp(out);
  CHECK(csv.rfind("s_cm,R_AA,R_DA,R_total\n", 0) == 0);
  // Deterministic output: a second run writes identical bytes.
  const std::string out2 = dir.str("rates2.csv");
  REQUIRE(run_cli("rates --config " + kConfigs + "/paper_s3.cfg --out " +
                  out2) == 0);
  CHECK(oracle::slurp(out2) == csv);
}

TEST_CASE("cli: simulate, histogram, fit round trip") {
  TempDir dir("ptc_cli_sim");
  // Small but statistically meaningful run on top of the bundled closed-loop
  // scenario.
  REQUIRE(run_cli("simulate --config " + kConfigs +
                  "/paper_v.cfg --out-dir " + dir.str() +
                  " --seed 11 --workers 2") == 0);
  CHECK(fs::exists(dir.str("run.lst")));
  CHECK(fs::exists(dir.str("summary.json")));
  CHECK(fs::exists(dir.str("manifest.json")));
  CHECK(oracle::slurp(dir.str("manifest.json")).find("config_digest") !=
        std::string::npos);

  REQUIRE(run_cli("histogram --in " + dir.str("run.lst") + " --out " +
                  dir.str("hist.csv") +
                  " --filter nontagged --bins-ps 6.1 --range-ns 47.5:52.5") ==
          0);
  CHECK(oracle::slurp(dir.str("hist.csv")).rfind("bin_center_ps,counts\n",
                                                 0) == 0);

  REQUIRE(run_cli("fit --in " + dir.str("run.lst") + " --out-fit " +
                  dir.str("fit.json") + " --out-hist " + dir.str("h2.csv") +
                  " --filter nontagged --bins-ps 6.1 --range-ns 47.5:52.5 "
                  "--weighting unweighted") == 0);
  const std::string fit = oracle::slurp(dir.str("fit.json"));
  CHECK(fit.find("\"fwhm_ps\"") != std::string::npos);
  CHECK(fit.find("\"converged\": true") != std::string::npos);

  // Histogram variants written by the two commands agree.
  CHECK(oracle::slurp(dir.str("h2.csv")) == oracle::slurp(dir.str("hist.csv")));

  // Unreadable list-mode path exits 3; a bad filter exits 2; a fit over an
  // empty selection is a numerical failure, exit 4.
  CHECK(run_cli("fit --in " + dir.str("missing.lst") + " --out-fit " +
                dir.str("f.json") + " --range-ns 0:1") == 3);
  CHECK(run_cli("histogram --in " + dir.str("run.lst") + " --out " +
                dir.str("h3.csv") + " --filter bogus --range-ns 47.5:52.5") ==
        2);
  CHECK(run_cli("fit --in " + dir.str("run.lst") + " --out-fit " +
                dir.str("f.json") + " --range-ns 0:1") == 4);
}

TEST_CASE("cli: experiment sweep precondition") {
  TempDir dir("ptc_cli_exp");
  // Two settings only: precondition failure, exit 2.
  CHECK(run_cli("experiment --config " + kConfigs +
                "/paper_v.cfg --out-dir " + dir.str() + " --sweep 30,20") ==
        2);
  CHECK(run_cli("experiment --config " + kConfigs +
                "/paper_v.cfg --out-dir " + dir.str() + " --sweep 30,x") == 2);
}
