#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lobmf/acceptance.hpp"
#include "lobmf/bertrand.hpp"
#include "lobmf/errors.hpp"
#include "lobmf/experiment.hpp"
#include "lobmf/measures.hpp"
#include "lobmf/presets.hpp"
#include "lobmf/skorokhod.hpp"

namespace py = pybind11;
using namespace lobmf;

namespace {

GameSpec linear_game(std::size_t n, double A, double B, double C, double x, double y, std::vector<double> fixed) {
  GameSpec g;
  g.n_sellers = n;
  g.demand = LinearDemand{A, B, C};
  g.cost = LinearCost{x, y, std::move(fixed)};
  return g;
}

py::dict path_dict(const CadlagPath& p) {
  py::dict d;
  d["grid"] = std::vector<double>(p.grid().begin(), p.grid().end());
  d["values"] = std::vector<double>(p.values().begin(), p.values().end());
  py::list jumps;
  for (const auto& j : p.jumps()) jumps.append(py::make_tuple(j.time, j.size));
  d["jumps"] = jumps;
  return d;
}

}  // namespace

PYBIND11_MODULE(_lobmf, m) {
  m.doc() = "Mean-field limit order book experiments";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<NonconvergenceError>(m, "NonconvergenceError", PyExc_RuntimeError);
  py::register_exception<InvariantViolation>(m, "InvariantViolation", PyExc_RuntimeError);

  m.def("wasserstein",
        [](int p, std::vector<double> a, std::vector<double> b) {
          return wasserstein(p, EmpiricalMeasure(std::move(a)), EmpiricalMeasure(std::move(b)));
        },
        py::arg("p"), py::arg("mu"), py::arg("nu"), "Exact W_p between two empirical measures (p = 1 or 2).");

  m.def("solve_dsp",
        [](std::vector<double> grid, std::vector<double> values, std::vector<std::pair<double, double>> jumps) {
          std::vector<Jump> js;
          for (auto [t, s] : jumps) js.push_back({t, s});
          const auto r = solve_dsp(CadlagPath(std::move(grid), std::move(values), std::move(js)));
          return py::make_tuple(path_dict(r.x_path), path_dict(r.k_path));
        },
        py::arg("grid"), py::arg("values"), py::arg("jumps") = std::vector<std::pair<double, double>>{},
        "Reflected path and regulator of a grid path; jumps are (time, size) pairs.");

  m.def("actual_demand",
        [](std::vector<double> p, double A, double B, double C) {
          return actual_demand(linear_game(p.size(), A, B, C, 0, 0, {}), p);
        },
        py::arg("prices"), py::arg("A") = 1.0, py::arg("B") = 2.0, py::arg("C") = 1.0);

  m.def("solve_linear_game",
        [](std::size_t n, double A, double B, double C, double x, double y, std::vector<double> fixed) {
          const auto spec = linear_game(n, A, B, C, x, y, std::move(fixed));
          const auto rep = solve_equilibrium(spec);
          py::list sellers;
          for (const auto& s : rep.by_id()) {
            py::dict d;
            d["id"] = s.id;
            d["price"] = s.price;
            d["demand"] = s.demand;
            d["candidate_demand"] = s.candidate_demand;
            d["cost"] = s.cost;
            d["profit"] = s.profit;
            d["class"] = to_string(s.cls);
            sellers.append(d);
          }
          py::dict out;
          out["sellers"] = sellers;
          out["deviation_gain"] = max_deviation_gain(spec, rep, 200);
          out["iterations"] = rep.iterations;
          return out;
        },
        py::arg("n"), py::arg("A") = 1.0, py::arg("B") = 2.0, py::arg("C") = 1.0, py::arg("x") = 0.0,
        py::arg("y") = 0.0, py::arg("fixed") = std::vector<double>{});

  m.def("meanfield_limit",
        [](double a, double b, double c, double x, double y) {
          const auto s = meanfield_limit({a, b, c, x, y});
          return py::make_tuple(s.p_star, s.p_bar);
        },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("x"), py::arg("y"));

  m.def("linear_equilibrium",
        [](double a, double b, double c, double x, double y, std::size_t n) {
          const auto s = linear_equilibrium({a, b, c, x, y}, n);
          return py::make_tuple(s.p_star, s.p_bar);
        },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("x"), py::arg("y"), py::arg("n"));

  m.def("presets", [] {
    py::list out;
    for (const auto& e : list_presets()) {
      py::dict d;
      d["name"] = e.name;
      d["summary"] = e.summary;
      d["exercises"] = e.exercises;
      d["defaults"] = e.defaults;
      out.append(d);
    }
    return out;
  });

  m.def("parse_config", [](const std::string& text) { return serialize_config(parse_config(text)); },
        "Validates a JSON config and returns its normalised serialisation.");
  m.def("default_config", [](const std::string& kind) { return serialize_config(default_config(kind)); });

  m.def("run_experiment",
        [](const std::string& text) {
          const auto cfg = parse_config(text);
          RunResult r;
          {
            py::gil_scoped_release release;
            r = run_experiment(cfg);
          }
          return py::make_tuple(r.exit_code, r.summary_json);
        },
        py::arg("config_json"), "Runs one experiment; returns (exit_code, summary_json).");

  m.def("run_acceptance",
        [](std::vector<int> only, unsigned threads) {
          AcceptanceOptions opt;
          opt.only = std::move(only);
          opt.threads = threads;
          std::vector<CriterionResult> rs;
          {
            py::gil_scoped_release release;
            rs = run_acceptance(opt);
          }
          py::list out;
          for (const auto& r : rs) {
            py::dict d;
            d["id"] = r.id;
            d["name"] = r.name;
            d["pass"] = r.pass;
            d["detail"] = r.detail;
            d["seconds"] = r.seconds;
            d["line"] = format_result(r);
            out.append(d);
          }
          return out;
        },
        py::arg("only") = std::vector<int>{}, py::arg("threads") = 1u);
}
