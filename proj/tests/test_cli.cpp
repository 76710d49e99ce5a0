#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "sfpe/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWorkDir = fs::temp_directory_path() / "sfpe_cli_test";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SFPE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

struct Setup {
  Setup() {
    fs::remove_all(kWorkDir);
    fs::create_directories(kWorkDir);
  }
};
const Setup setup;

std::string out(const std::string& name) { return (kWorkDir / name).string(); }

}  // namespace

TEST_CASE("solve/audit/density/simulate/compare pipeline") {
  const std::string dir = "--out-dir " + kWorkDir.string() + " ";

  REQUIRE(run_cli(dir + "--seed 42 solve --model quicksort --n 20000 --iters 40") == 0);
  REQUIRE(fs::exists(kWorkDir / "pools.bin"));
  REQUIRE(fs::exists(kWorkDir / "pools_diagnostics.json"));
  REQUIRE(fs::exists(kWorkDir / "solve_manifest.json"));

  CHECK(run_cli(dir + "--seed 1 audit --model quicksort --draws 20000 --pools " +
                out("pools.bin")) == 0);
  const auto report = sfpe::parse_json_file(kWorkDir / "audit.json");
  CHECK(report.at("equations")[0].at("conditions").at("A1").at("verdict") == "pass");
  CHECK(report.at("support")[0].at("verdict") == "pass");
  CHECK(report.at("lattice")[0].at("verdict") == "pass");

  CHECK(run_cli(dir + "density --pools " + out("pools.bin") + " --method fourier") == 0);
  CHECK(fs::exists(kWorkDir / "grid.csv"));
  const auto sidecar = sfpe::parse_json_file(kWorkDir / "grid_density.json");
  CHECK(std::abs(sidecar.at("total_mass").get<double>() - 1.0) < 0.02);

  CHECK(run_cli(dir + "density --pools " + out("pools.bin") + " --method kde --out kde.csv") ==
        0);
  CHECK(fs::exists(kWorkDir / "kde.csv"));

  CHECK(run_cli(dir + "--seed 7 simulate --model quicksort_cmp --n 2000 --runs 2000") == 0);
  CHECK(fs::exists(kWorkDir / "samples.csv"));

  CHECK(run_cli(dir + "compare --pools " + out("pools.bin") + " --samples " +
                out("samples.csv")) == 0);
  const auto cmp = sfpe::parse_json_file(kWorkDir / "compare.json");
  CHECK(cmp.at("ks").get<double>() < 0.06);
  CHECK(cmp.at("bound_holds").get<bool>());
}

TEST_CASE("solve digests are reproducible (golden determinism)") {
  const std::string d1 = "--out-dir " + (kWorkDir / "g1").string() + " ";
  const std::string d2 = "--out-dir " + (kWorkDir / "g2").string() + " ";
  REQUIRE(run_cli(d1 + "--seed 42 solve --model quicksort --n 5000 --iters 30") == 0);
  REQUIRE(run_cli(d2 + "--seed 42 --threads 4 solve --model quicksort --n 5000 --iters 30") == 0);
  CHECK(sfpe::sha256_file(kWorkDir / "g1" / "pools.bin") ==
        sfpe::sha256_file(kWorkDir / "g2" / "pools.bin"));

  // different seed, different digest
  const std::string d3 = "--out-dir " + (kWorkDir / "g3").string() + " ";
  REQUIRE(run_cli(d3 + "--seed 43 solve --model quicksort --n 5000 --iters 30") == 0);
  CHECK(sfpe::sha256_file(kWorkDir / "g1" / "pools.bin") !=
        sfpe::sha256_file(kWorkDir / "g3" / "pools.bin"));
}

TEST_CASE("invalid urn config exits 2 and names the bound") {
  const fs::path cfg = kWorkDir / "bad_urn.json";
  std::ofstream(cfg) << R"({"model":"urn_det","a":1,"b":1,"c":1,"d":1})";
  CHECK(run_cli("--out-dir " + kWorkDir.string() + " solve --config " + cfg.string()) == 2);
}

TEST_CASE("audit failure exits 4") {
  const fs::path cfg = kWorkDir / "perpetuity.json";
  // single-term custom system: alpha_sec is identically zero, (A2) fails
  std::ofstream(cfg) << R"({"model":"custom","m":1,"d":1,"equations":[
      {"targets":[0],"atoms":[{"prob":1.0,"matrices":[[[1.0]]],"shift":[0.0]}]}]})";
  CHECK(run_cli("--out-dir " + kWorkDir.string() + " audit --config " + cfg.string() +
                " --draws 2000") == 4);
}

TEST_CASE("replay reproduces recorded digests") {
  const std::string dir = "--out-dir " + (kWorkDir / "rep").string() + " ";
  REQUIRE(run_cli(dir + "--seed 11 solve --model rrt --n 4000 --iters 30") == 0);
  CHECK(run_cli(dir + "replay " + (kWorkDir / "rep" / "solve_manifest.json").string()) == 0);
}

TEST_CASE("models subcommand lists the zoo") {
  CHECK(run_cli("models") == 0);
}

TEST_CASE("2d pools produce three-column density csv") {
  const std::string dir = "--out-dir " + (kWorkDir / "d2").string() + " ";
  REQUIRE(run_cli(dir + "--seed 5 solve --model split2d --n 20000 --iters 40") == 0);
  REQUIRE(run_cli(dir + "density --pools " + (kWorkDir / "d2" / "pools.bin").string() +
                  " --method fourier --points 128") == 0);
  std::ifstream in(kWorkDir / "d2" / "grid.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "x0,x1,value");
}
