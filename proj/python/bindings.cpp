#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "aisetraj/aise.hpp"
#include "aisetraj/baselines.hpp"
#include "aisetraj/frenet.hpp"
#include "aisetraj/harness.hpp"
#include "aisetraj/predictor.hpp"
#include "aisetraj/scenarios.hpp"

namespace py = pybind11;
using namespace aisetraj;

namespace {

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::object& o) {
  const auto text = py::module_::import("json").attr("dumps")(o).cast<std::string>();
  return nlohmann::json::parse(text);
}

AiseConfig make_config(int order, const py::object& overrides) {
  AiseConfig c = AiseConfig::defaults_for_order(order);
  if (!overrides.is_none()) from_json(from_python(overrides), c);
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive numerical differentiation and trajectory prediction";

  py::register_exception<AiseError>(m, "AiseError", PyExc_RuntimeError);

  m.def("aise_defaults",
        [](int order) { return to_python(AiseConfig::defaults_for_order(order)); },
        py::arg("order"), "Default AISE parameters for a differentiation order.");

  py::class_<AiseEstimator>(m, "AiseEstimator")
      .def(py::init([](int order, const py::object& config) {
             return AiseEstimator(make_config(order, config));
           }),
           py::arg("order"), py::arg("config") = py::none())
      .def("step", &AiseEstimator::step, py::arg("y"))
      .def("run",
           [](AiseEstimator& e, const std::vector<double>& y) {
             std::vector<double> out;
             out.reserve(y.size());
             for (double v : y) out.push_back(e.step(v));
             return out;
           },
           py::arg("y"), "Feed samples in order and return the estimates.")
      .def_property_readonly("k", [](const AiseEstimator& e) { return e.state().k; })
      .def_property_readonly("eta", [](const AiseEstimator& e) { return e.state().eta; })
      .def_property_readonly("v2", [](const AiseEstimator& e) { return e.state().v2; })
      .def_property_readonly("forgetting",
                             [](const AiseEstimator& e) { return e.state().lambda; })
      .def_property_readonly("state_estimate",
                             [](const AiseEstimator& e) { return e.state().x_da; })
      .def_property_readonly("config",
                             [](const AiseEstimator& e) { return to_python(e.config()); })
      .def("snapshot", [](const AiseEstimator& e) { return to_python(e.snapshot()); })
      .def_static("restore", [](const py::object& snap) {
        return AiseEstimator::restore(from_python(snap));
      });

  m.def("differentiate",
        [](const std::vector<double>& y, int order, const py::object& config) {
          AiseEstimator e(make_config(order, config));
          std::vector<double> out;
          out.reserve(y.size());
          for (double v : y) out.push_back(e.step(v));
          return out;
        },
        py::arg("y"), py::arg("order"), py::arg("config") = py::none(),
        "AISE estimate of the order-th derivative at every sample.");

  m.def("gamma0", &gamma0, py::arg("phi"));
  m.def("gamma1", &gamma1, py::arg("phi"));

  m.def("curve_parameters",
        [](const Eigen::Vector3d& v, const Eigen::Vector3d& a,
           const Eigen::Vector3d& j) -> py::object {
          const auto sp = scalar_params(v, a, j);
          if (!sp) return py::none();
          return py::dict(py::arg("u") = sp->u, py::arg("kappa_t") = sp->kappa_t,
                          py::arg("tau_t") = sp->tau_t);
        },
        py::arg("v"), py::arg("a"), py::arg("j"),
        "Speed, curvature and torsion per unit length; None if degenerate.");

  m.def("predict",
        [](const std::string& method, const Eigen::Vector3d& p,
           const Eigen::Vector3d& v, const Eigen::Vector3d& a,
           const std::optional<Eigen::Vector3d>& j, int horizon,
           double sample_time) {
          const PredictionTrace t = predict(parse_method(method), 0, p,
                                            DerivativeEstimate{v, a, j}, horizon,
                                            sample_time);
          Eigen::MatrixXd out(t.positions.size(), 3);
          for (std::size_t i = 0; i < t.positions.size(); ++i) {
            out.row(static_cast<Eigen::Index>(i)) = t.positions[i].transpose();
          }
          return py::make_tuple(out, t.fallback_used);
        },
        py::arg("method"), py::arg("p"), py::arg("v"), py::arg("a"),
        py::arg("j") = py::none(), py::arg("horizon") = 100,
        py::arg("sample_time") = 0.01,
        "Positions p_{k+1}..p_{k+horizon} (rows) and whether FS fell back to va.");

  m.def("truth",
        [](const std::string& scenario, std::int64_t k, double sample_time) {
          const TruthSample s = parse_scenario(scenario) == ScenarioKind::Parabolic
                                    ? parabolic(k, sample_time)
                                    : helical(k, sample_time);
          return py::dict(py::arg("t") = s.t, py::arg("p") = s.p, py::arg("v") = s.v,
                          py::arg("a") = s.a, py::arg("j") = s.j);
        },
        py::arg("scenario"), py::arg("k"), py::arg("sample_time") = 0.01);

  m.def("abg_gains",
        [](double tracking_index, double sample_time) {
          const AbgGains g = abg_gains(tracking_index, sample_time);
          return py::make_tuple(g.alpha, g.beta, g.gamma);
        },
        py::arg("tracking_index") = 0.6, py::arg("sample_time") = 0.01);

  m.def("run_experiment",
        [](const py::object& config) {
          ExperimentConfig c;
          if (!config.is_none()) from_json(from_python(config), c);
          ExperimentResult r;
          {
            py::gil_scoped_release release;
            r = run_experiment(c);
          }
          return to_python(report_json(c, r));
        },
        py::arg("config") = py::none(),
        "Run an experiment and return its report as a dict.");

  m.attr("__version__") = code_version();
}
