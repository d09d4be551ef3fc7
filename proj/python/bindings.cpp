// Thin Python layer: configs and results cross as JSON-shaped dicts.
#include "hsq/experiments.hpp"
#include "hsq/quad1d.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using nlohmann::json;

namespace {

hsq::ProblemKind kind_of(const std::string& name) {
  if (name == "linear") return hsq::ProblemKind::Linear;
  if (name == "darcy") return hsq::ProblemKind::Darcy;
  throw std::invalid_argument("unknown problem '" + name + "'");
}

// Round trip through the json module keeps the config parser the single source of truth.
json to_json(const py::object& obj) {
  const auto dumps = py::module_::import("json").attr("dumps");
  return json::parse(py::str(dumps(obj)).cast<std::string>());
}

py::object from_json(const json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

py::dict run(const std::string& problem, const py::object& config, const std::string& out) {
  const hsq::ProblemKind kind = kind_of(problem);
  hsq::ExperimentConfig cfg = config.is_none() ? hsq::ExperimentConfig::defaults(kind)
                                               : hsq::config_from_json(to_json(config), kind);
  cfg.validate();
  hsq::ExperimentResult res;
  {
    py::gil_scoped_release nogil;
    res = hsq::run_convergence(cfg);
    if (!out.empty()) hsq::write_outputs(res, out);
  }
  py::list rows;
  for (const auto& r : res.record.rows) {
    py::dict d;
    d["series"] = r.series;
    d["n_points"] = r.n_points;
    d["n_indices"] = r.n_indices;
    d["value"] = r.value;
    d["abs_error"] = r.abs_error;
    d["rel_error"] = r.rel_error;
    rows.append(d);
  }
  py::dict result;
  result["summary"] = from_json(res.summary);
  result["convergence"] = rows;
  result["rates"] = res.record.rates;
  result["converged"] = res.converged;
  return result;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<std::invalid_argument>(m, "InvalidArgument", PyExc_ValueError);

  m.def("default_config", [](const std::string& problem) {
    return from_json(hsq::config_to_json(hsq::ExperimentConfig::defaults(kind_of(problem))));
  }, py::arg("problem"));

  m.def("run", &run, py::arg("problem"), py::arg("config") = py::none(), py::arg("out") = "",
        "Run one convergence experiment. Returns summary, convergence rows and fitted rates.");

  m.def("hermite_rule", [](int level) {
    const auto& r = hsq::hermite_rule(level);
    return py::make_tuple(r.nodes, r.weights);
  }, py::arg("level"), "Nodes and weights of the level-ν Gauss-Hermite rule (2ν+1 exact).");

  m.def("estimate_rate", [](const std::vector<double>& n, const std::vector<double>& err) {
    return hsq::estimate_rate(n, err).rate;
  }, py::arg("n"), py::arg("err"));

  m.def("checkpoint_ladder", &hsq::checkpoint_ladder, py::arg("max_points"), py::arg("first") = 10);
}
