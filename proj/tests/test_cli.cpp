#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cfslab/json_io.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using cfslab::Json;

namespace {

std::string cli_path() {
  const char* p = std::getenv("CFSLAB_CLI");
  REQUIRE(p != nullptr);
  return p;
}

std::string data_dir() {
  const char* p = std::getenv("CFSLAB_DATA");
  REQUIRE(p != nullptr);
  return p;
}

fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / "cfslab_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args, const fs::path& workdir) {
  std::string cmd = "cd " + workdir.string() + " && " + cli_path() + " " +
                    args + " > stdout.txt 2> stderr.txt";
  int ret = std::system(cmd.c_str());
  REQUIRE(ret != -1);
  return WIFEXITED(ret) ? WEXITSTATUS(ret) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("argument errors exit with code 2") {
  fs::path d = fresh_dir("args");
  CHECK(run_cli("--no-such-flag", d) == 2);
  CHECK(run_cli("no-such-subcommand", d) == 2);
  CHECK(run_cli("action --format yaml", d) == 2);
  CHECK(run_cli("action --tol broken", d) == 2);
  CHECK(run_cli("action --config /does/not/exist.json", d) == 2);
}

TEST_CASE("classify on the bundled demo system") {
  fs::path d = fresh_dir("classify");
  Json cfg;
  cfg["system_path"] = data_dir() + "/demo_two_point.json";
  std::ofstream(d / "cfg.json") << cfg.dump(2);
  CHECK(run_cli("classify --config cfg.json --out out", d) == 0);
  Json rep = Json::parse(slurp(d / "out" / "classify.json"));
  CHECK(rep["pass"].get<bool>());
  auto classes = rep["payload"]["classes"];
  REQUIRE(classes.size() == 2);
  CHECK(classes[0][0].get<std::string>() == "timelike");
  CHECK(classes[0][1].get<std::string>() == "spacelike");
  CHECK(classes[1][1].get<std::string>() == "timelike");
}

TEST_CASE("reports are byte-identical across runs with the same seed") {
  fs::path d = fresh_dir("determinism");
  REQUIRE(run_cli("action --seed 3 --points 4 --f 3 --n 1 --out out", d) == 0);
  std::string first = slurp(d / "out" / "action.json");
  std::string first_csv = slurp(d / "out" / "action-pairs.csv");
  REQUIRE(run_cli("action --seed 3 --points 4 --f 3 --n 1 --out out", d) == 0);
  CHECK(first == slurp(d / "out" / "action.json"));
  CHECK(first_csv == slurp(d / "out" / "action-pairs.csv"));
  // a different seed must change the payload
  REQUIRE(run_cli("action --seed 4 --points 4 --f 3 --n 1 --out out4", d) ==
          0);
  CHECK(first != slurp(d / "out4" / "action.json"));
}

TEST_CASE("format selection controls the artifact set") {
  fs::path d = fresh_dir("format");
  REQUIRE(run_cli("action --seed 3 --points 4 --f 3 --n 1 --format json "
                  "--out oj",
                  d) == 0);
  CHECK(fs::exists(d / "oj" / "action.json"));
  CHECK(!fs::exists(d / "oj" / "action-pairs.csv"));
  REQUIRE(run_cli("action --seed 3 --points 4 --f 3 --n 1 --format both "
                  "--out ob",
                  d) == 0);
  CHECK(fs::exists(d / "ob" / "action.json"));
  CHECK(fs::exists(d / "ob" / "action-pairs.csv"));
}

TEST_CASE("report meta carries seed, hash and tolerances") {
  fs::path d = fresh_dir("meta");
  REQUIRE(run_cli("solve-strip --seed 11 --points 6 --f 3 --n 1 "
                  "--tol solve_tol=1e-7 --out out",
                  d) == 0);
  Json rep = Json::parse(slurp(d / "out" / "solve-strip.json"));
  CHECK(rep["meta"]["seed"].get<unsigned>() == 11);
  CHECK(rep["meta"]["subcommand"].get<std::string>() == "solve-strip");
  CHECK(!rep["meta"]["config_hash"].get<std::string>().empty());
  CHECK(rep["meta"]["tolerances"]["solve_tol"].get<double>() == 1e-7);
  CHECK(rep["checks"].is_array());
}

TEST_CASE("failing checks exit with code 1") {
  fs::path d = fresh_dir("fail");
  CHECK(run_cli("solve-strip --seed 11 --points 6 --f 3 --n 1 "
                "--tol solve_tol=0 --out out",
                d) == 1);
  Json rep = Json::parse(slurp(d / "out" / "solve-strip.json"));
  CHECK(!rep["pass"].get<bool>());
  CHECK(slurp(d / "stderr.txt").find("solve-strip.residual") !=
        std::string::npos);
}

TEST_CASE("dirac-demo runs the mode suite") {
  fs::path d = fresh_dir("dirac");
  CHECK(run_cli("dirac-demo --k 0 --m 1 --out out", d) == 0);
  Json rep = Json::parse(slurp(d / "out" / "dirac-demo.json"));
  CHECK(rep["pass"].get<bool>());
  CHECK(rep["payload"]["omega"].get<double>() == doctest::Approx(1.0));
}
