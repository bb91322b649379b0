#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfslab/report.hpp"

namespace {

int run(const std::string& sub, cfslab::ExperimentConfig cfg) {
  cfslab::RunResult result = cfslab::run_subcommand(sub, cfg);
  std::vector<std::string> files =
      cfslab::write_artifacts(sub, cfg, result);
  for (const std::string& f : files) std::cout << "wrote " << f << "\n";
  if (!result.pass) {
    for (const cfslab::CheckResult& c : result.checks)
      if (!c.pass)
        std::cerr << "FAIL " << c.name << " value=" << c.value
                  << " tol=" << c.tol << "\n";
    return 1;
  }
  std::cout << "pass\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cfslab: numerical laboratory for finite causal fermion systems"};
  app.require_subcommand(1);

  std::string config_path, out_dir, format;
  long long seed = -1;
  int points = -1, f = -1, n = -1;
  double kappa = -1, r_param = -1, dirac_k = 0, dirac_m = 1, delta_g = 1;
  std::vector<std::string> tol_overrides;

  app.add_option("--config", config_path, "experiment config JSON");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--tol", tol_overrides, "tolerance override NAME=VAL")
      ->expected(-1);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--format", format, "json|csv|both");
  app.add_option("--points", points, "number of spacetime points");
  app.add_option("--f", f, "Hilbert space dimension");
  app.add_option("--n", n, "spin dimension bound");
  app.add_option("--kappa", kappa, "boundedness Lagrange parameter");
  app.add_option("--r", r_param, "trace Lagrange parameter");

  const char* names[] = {"action",      "classify",   "minimize",
                         "second-variation", "decoupling", "solve-strip",
                         "commutator",  "extend",     "couple",
                         "appendix-a",  "dirac-demo", "kernel-asymptotics",
                         "verify-all"};
  for (const char* nm : names) {
    CLI::App* sub = app.add_subcommand(nm);
    sub->fallthrough();  // global flags may follow the subcommand name
    if (std::string(nm) == "dirac-demo") {
      sub->add_option("--k", dirac_k, "spatial momentum");
      sub->add_option("--m", dirac_m, "mass");
      sub->add_option("--delta-g", delta_g, "cutoff width parameter");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    std::cerr << "{\"error\":\"invalid arguments\"}\n";
    return 2;
  }

  try {
    cfslab::ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::invalid_argument("cannot open config: " + config_path);
      cfslab::Json j = cfslab::Json::parse(in);
      cfg = cfslab::ExperimentConfig::from_json(j);
    }
    if (seed >= 0) cfg.seed = (unsigned)seed;
    if (points > 0) cfg.points = points;
    if (f > 0) cfg.f = f;
    if (n > 0) cfg.n = n;
    if (kappa >= 0) cfg.kappa = kappa;
    if (r_param >= 0) cfg.r = r_param;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!format.empty()) cfg.format = format;
    if (cfg.format != "json" && cfg.format != "csv" && cfg.format != "both")
      throw std::invalid_argument("format must be json, csv or both");
    cfg.dirac_k = dirac_k;
    cfg.dirac_m = dirac_m;
    cfg.delta_g = delta_g;
    for (const std::string& ov : tol_overrides) {
      size_t eq = ov.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("--tol expects NAME=VAL: " + ov);
      cfg.tolerances[ov.substr(0, eq)] = std::stod(ov.substr(eq + 1));
    }
    std::string sub = app.get_subcommands().front()->get_name();
    return run(sub, cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "{\"error\":" << cfslab::Json(e.what()).dump() << "}\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "FAIL " << e.what() << "\n";
    return 1;
  }
}
