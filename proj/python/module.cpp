#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cfslab/core.hpp"
#include "cfslab/json_io.hpp"
#include "cfslab/report.hpp"
#include "cfslab/spin.hpp"
#include "cfslab/variations.hpp"

namespace py = pybind11;
using namespace cfslab;

namespace {

py::object json_to_py(const Json& j) {
  py::object loads = py::module_::import("json").attr("loads");
  return loads(j.dump());
}

Json py_to_json(const py::object& obj) {
  py::object dumps = py::module_::import("json").attr("dumps");
  return Json::parse(dumps(obj).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_cfslab, m) {
  m.doc() = "numerical laboratory for finite causal fermion systems";

  py::class_<DiscreteSystem>(m, "DiscreteSystem")
      .def_readwrite("n", &DiscreteSystem::n)
      .def_readwrite("f", &DiscreteSystem::f)
      .def_readwrite("kappa", &DiscreteSystem::kappa)
      .def_readwrite("r", &DiscreteSystem::r)
      .def_readwrite("s", &DiscreteSystem::s)
      .def_readwrite("points", &DiscreteSystem::points)
      .def_readwrite("weights", &DiscreteSystem::weights)
      .def_readwrite("times", &DiscreteSystem::times)
      .def("size", &DiscreteSystem::size)
      .def("validate", &DiscreteSystem::validate);

  m.def("random_system",
        [](int points, int f, int n, double kappa, unsigned seed) {
          Rng rng(seed);
          return random_system(points, f, n, kappa, rng);
        },
        py::arg("points"), py::arg("f"), py::arg("n"), py::arg("kappa") = 0.1,
        py::arg("seed") = 1);
  m.def("load_system", &load_system, py::arg("path"));
  m.def("save_system", &save_system, py::arg("system"), py::arg("path"));

  m.def("causal_action", &causal_action, py::arg("system"));
  m.def("lagrangian", &lagrangian, py::arg("x"), py::arg("y"), py::arg("n"),
        py::arg("kappa"));
  m.def("chain_spectrum",
        [](const DiscreteSystem& sys, int i, int j) {
          return chain_spectrum(sys.points.at(i), sys.points.at(j), sys.n)
              .values;
        },
        py::arg("system"), py::arg("i"), py::arg("j"));
  m.def("classify",
        [](const DiscreteSystem& sys, double class_tol) {
          std::vector<std::vector<std::string>> out(sys.size());
          for (int i = 0; i < sys.size(); ++i)
            for (int j = 0; j < sys.size(); ++j)
              out[i].push_back(to_string(
                  classify(sys.points[i], sys.points[j], sys.n, class_tol)));
          return out;
        },
        py::arg("system"), py::arg("class_tol") = 1e-8);
  m.def("constraints",
        [](const DiscreteSystem& sys) {
          ConstraintReport c = constraint_report(sys);
          py::dict d;
          d["volume"] = c.volume;
          d["trace"] = c.trace;
          d["local_traces"] = c.local_traces;
          return d;
        },
        py::arg("system"));

  m.def("minimize_action",
        [](const DiscreteSystem& sys, int max_iters, double gtol) {
          MinimizeOptions opts;
          opts.max_iters = max_iters;
          opts.gtol = gtol;
          MinimizeResult res = minimize_action(sys, opts);
          py::dict d;
          d["system"] = res.system;
          d["action"] = res.action;
          d["grad_norm"] = res.grad_norm;
          d["iters"] = res.iters;
          d["converged"] = res.converged;
          d["clipped"] = res.clipped;
          d["warning"] = res.warning;
          return d;
        },
        py::arg("system"), py::arg("max_iters") = 400, py::arg("gtol") = 1e-6);

  m.def("second_variation",
        [](const DiscreteSystem& sys, unsigned seed) {
          DiscreteSystem local = sys;
          SpinSetup ss = build_spin(local);
          ss.sys = &local;
          QKernel qk = q_kernel(ss);
          Rng rng(seed);
          VariationDirection phi = random_variation(ss, rng);
          SecondVariationReport sv = second_variation_action(ss, qk, phi);
          py::dict d;
          d["lfe_term"] = sv.lfe_term;
          d["q_term"] = sv.q_term;
          d["remainder"] = sv.remainder;
          d["total_assembled"] = sv.total_assembled;
          d["total_fd"] = sv.total_fd;
          return d;
        },
        py::arg("system"), py::arg("seed") = 1);

  // drives the same experiment runners as the command line tool;
  // config accepts the keys of the experiment config JSON
  m.def("run",
        [](const std::string& name, const py::object& config) {
          ExperimentConfig cfg;
          if (!config.is_none())
            cfg = ExperimentConfig::from_json(py_to_json(config));
          RunResult res = run_subcommand(name, cfg);
          py::dict d;
          d["pass"] = res.pass;
          d["report"] = json_to_py(res.report);
          py::list checks;
          for (const CheckResult& c : res.checks) {
            py::dict ck;
            ck["name"] = c.name;
            ck["pass"] = c.pass;
            ck["value"] = c.value;
            ck["tol"] = c.tol;
            checks.append(ck);
          }
          d["checks"] = checks;
          return d;
        },
        py::arg("name"), py::arg("config") = py::none());
}
