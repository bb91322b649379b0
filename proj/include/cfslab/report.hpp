#ifndef CFSLAB_REPORT_HPP
#define CFSLAB_REPORT_HPP

#include <map>
#include <string>
#include <vector>

#include "cfslab/json_io.hpp"

namespace cfslab {

struct ExperimentConfig {
  std::string name = "experiment";
  std::string system_path;  // empty: use the generator
  unsigned seed = 1;
  int points = 6;
  int f = 4;
  int n = 1;
  double kappa = 0.1;
  double r = 0.05;
  // strip parameters; non-finite entries are derived from the time range
  double t0 = 0, t_min = 0, t_max = 0, t1 = 0, delta = 0.5;
  bool strip_set = false;
  // dirac-demo parameters
  double dirac_k = 0.0, dirac_m = 1.0, delta_g = 1.0;
  std::map<std::string, double> tolerances;
  std::string out_dir = "out";
  std::string format = "both";  // json | csv | both

  double tol(const std::string& name, double fallback) const;
  Json to_json() const;
  static ExperimentConfig from_json(const Json& j);
};

// FNV-1a over the canonical config dump
std::string config_hash(const ExperimentConfig& cfg);

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tol = 0.0;
};

struct RunResult {
  Json report;
  bool pass = true;
  std::vector<CheckResult> checks;
  // series name -> rows; first row is the header
  std::map<std::string, std::vector<std::vector<std::string>>> series;
  // plot name -> (x, y) pairs
  std::map<std::string, std::vector<std::pair<double, double>>> plots;
};

// valid names: action classify minimize second-variation decoupling
// solve-strip commutator extend couple appendix-a dirac-demo
// kernel-asymptotics verify-all
RunResult run_subcommand(const std::string& name, const ExperimentConfig& cfg);

// writes <name>.json plus CSV/plot files per cfg.format; returns paths
std::vector<std::string> write_artifacts(const std::string& subcommand,
                                         const ExperimentConfig& cfg,
                                         RunResult& result);

int thread_cap();  // CFS_LAB_THREADS, default 1

}  // namespace cfslab

#endif
