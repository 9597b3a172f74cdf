#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nsiss/nonsmooth.hpp"
#include "nsiss/scenario.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

py::object json_to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null:
      return py::none();
    case json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case json::value_t::number_integer:
      return py::int_(j.get<int64_t>());
    case json::value_t::number_unsigned:
      return py::int_(j.get<uint64_t>());
    case json::value_t::number_float:
      return py::float_(j.get<double>());
    case json::value_t::string:
      return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(json_to_py(v));
      return out;
    }
    case json::value_t::object: {
      py::dict out;
      for (auto it = j.begin(); it != j.end(); ++it)
        out[py::str(it.key())] = json_to_py(it.value());
      return out;
    }
    default:
      return py::none();
  }
}

json py_to_json(const py::handle& h) {
  if (h.is_none()) return nullptr;
  if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
  if (py::isinstance<py::int_>(h)) return h.cast<int64_t>();
  if (py::isinstance<py::float_>(h)) return h.cast<double>();
  if (py::isinstance<py::str>(h)) return h.cast<std::string>();
  if (py::isinstance<py::dict>(h)) {
    json out = json::object();
    for (auto item : h.cast<py::dict>())
      out[item.first.cast<std::string>()] = py_to_json(item.second);
    return out;
  }
  if (py::isinstance<py::list>(h) || py::isinstance<py::tuple>(h)) {
    json out = json::array();
    for (auto item : h.cast<py::sequence>()) out.push_back(py_to_json(item));
    return out;
  }
  throw py::type_error("scenario values must be None, bool, int, float, str, "
                       "list, or dict");
}

py::dict outcome_to_py(const nsiss::ScenarioOutcome& out) {
  py::dict d;
  d["exit_code"] = out.exit_code;
  d["report"] = json_to_py(out.report);
  d["report_path"] = out.report_path;
  d["csv_path"] = out.csv_path;
  d["diagnostic"] = out.diagnostic;
  return d;
}

nsiss::GradientHull hull_from(const std::vector<nsiss::Vec>& vs) {
  nsiss::GradientHull h;
  h.vertices = vs;
  for (size_t k = 0; k < vs.size(); ++k) h.active.push_back(static_cast<int>(k));
  return h;
}

nsiss::FilippovHull fields_from(const std::vector<nsiss::Vec>& vs) {
  nsiss::FilippovHull h;
  h.vertices = vs;
  for (size_t k = 0; k < vs.size(); ++k) h.active.push_back(static_cast<int>(k));
  return h;
}

py::object interval_to_py(const nsiss::DerivativeInterval& iv) {
  if (iv.empty) return py::none();
  return py::make_tuple(iv.lo, iv.hi);
}

}  // namespace

PYBIND11_MODULE(_nsiss, m) {
  m.doc() = "certification and simulation of switched systems with "
            "nonsmooth Lyapunov functions";

  m.def("builtin_scenario_names", &nsiss::builtin_scenario_names,
        "Names of the scenarios shipped with the toolkit.");

  m.def("builtin_scenario",
        [](const std::string& name) {
          return json_to_py(nsiss::builtin_scenario(name));
        },
        py::arg("name"), "Returns a builtin scenario as a dict.");

  m.def("run_scenario",
        [](const std::string& path, const std::string& out_dir,
           std::optional<uint64_t> seed) {
          return outcome_to_py(nsiss::run_scenario(path, out_dir, seed));
        },
        py::arg("path"), py::arg("out_dir"), py::arg("seed") = py::none(),
        "Runs a scenario file (or builtin name) and writes its report into "
        "out_dir; returns a dict with exit_code, report, report_path, "
        "csv_path, and diagnostic.");

  m.def("run_scenario_json",
        [](const py::dict& scenario, const std::string& out_dir,
           std::optional<uint64_t> seed) {
          return outcome_to_py(
              nsiss::run_scenario_json(py_to_json(scenario), out_dir, seed));
        },
        py::arg("scenario"), py::arg("out_dir"), py::arg("seed") = py::none(),
        "Runs a scenario given as a dict.");

  m.def("lie_interval",
        [](const std::vector<nsiss::Vec>& gradients,
           const std::vector<nsiss::Vec>& fields) {
          return interval_to_py(
              nsiss::lie_interval(hull_from(gradients), fields_from(fields)));
        },
        py::arg("gradients"), py::arg("fields"),
        "Derivative values every gradient agrees on over the convex hull of "
        "the fields; (lo, hi) or None when no value is agreed.");

  m.def("clarke_interval",
        [](const std::vector<nsiss::Vec>& gradients,
           const std::vector<nsiss::Vec>& fields) {
          return interval_to_py(nsiss::clarke_interval(hull_from(gradients),
                                                       fields_from(fields)));
        },
        py::arg("gradients"), py::arg("fields"),
        "Range of gradient-field products over both hulls; (lo, hi).");
}
