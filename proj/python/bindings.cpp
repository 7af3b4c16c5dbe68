#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "indimart/decompose.hpp"
#include "indimart/errors.hpp"
#include "indimart/io.hpp"
#include "indimart/transport.hpp"
#include "indimart/verify.hpp"

namespace py = pybind11;
using namespace indimart;

namespace {

DiscreteLaw make_law(const std::vector<std::vector<double>>& locations,
                     const std::vector<double>& masses) {
  if (locations.empty()) throw DomainError("law with no atoms");
  const std::size_t m = locations.front().size();
  std::vector<double> flat;
  for (const auto& x : locations) {
    if (x.size() != m) throw DomainError("atoms of different dimension");
    flat.insert(flat.end(), x.begin(), x.end());
  }
  return DiscreteLaw(m, std::move(flat), masses);
}

py::tuple law_tuple(const DiscreteLaw& law) {
  std::vector<std::vector<double>> locations;
  for (std::size_t a = 0; a < law.size(); ++a) {
    const auto x = law.location(a);
    locations.emplace_back(x.begin(), x.end());
  }
  return py::make_tuple(locations, std::vector<double>(law.masses().begin(), law.masses().end()));
}

std::string generate(std::uint64_t seed, std::size_t K, std::size_t m, std::size_t branching,
                     const std::string& weights, const std::string& values) {
  GeneratorOptions o;
  o.seed = seed;
  o.K = K;
  o.m = m;
  o.branching = branching;
  if (weights != "uniform" && weights != "random") throw DomainError("weights: uniform or random");
  if (values != "normal" && values != "integer") throw DomainError("values: normal or integer");
  o.weights = weights == "random" ? WeightProfile::random : WeightProfile::uniform;
  o.values = values == "integer" ? ValueDistribution::integer : ValueDistribution::normal;
  GeneratedMartingale g = generate_random_martingale(o);
  return to_json(FilteredMartingale{std::move(g.space), std::move(g.filtration), m, std::move(g.X)})
      .dump();
}

std::string decompose(const std::string& martingale, double tol_rel, std::size_t n_max,
                      std::size_t max_points) {
  const FilteredMartingale fm = martingale_from_json(parse_json(martingale));
  DecomposeOptions opts;
  opts.tol_rel = tol_rel;
  opts.n_max = n_max;
  opts.max_points = max_points;
  py::gil_scoped_release release;
  return to_json(decompose_martingale(fm.X, fm.filtration, fm.space, opts)).dump();
}

std::string verify(const std::string& decomposition) {
  const Decomposition d = decomposition_from_json(parse_json(decomposition));
  py::gil_scoped_release release;
  return to_json(run_full_report(d)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Martingale decomposition into independent-increment martingales";

  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<TheoryViolation>(m, "TheoryViolation", PyExc_RuntimeError);

  m.def("generate", &generate, py::arg("seed"), py::arg("K"), py::arg("m") = 1,
        py::arg("branching") = 2, py::arg("weights") = "uniform", py::arg("values") = "normal",
        "Random filtered martingale, as JSON text.");
  m.def("decompose", &decompose, py::arg("martingale"), py::arg("tol_rel") = 1e-6,
        py::arg("n_max") = 64, py::arg("max_points") = 1'000'000,
        "Decompose a filtered martingale given as JSON text; returns JSON text.");
  m.def("verify", &verify, py::arg("decomposition"),
        "Run every check on a decomposition given as JSON text; returns the report as JSON text.");
  m.def(
      "w2_sq",
      [](const std::vector<std::vector<double>>& nu_x, const std::vector<double>& nu_m,
         const std::vector<std::vector<double>>& mu_x, const std::vector<double>& mu_m) {
        return w2_sq(make_law(nu_x, nu_m), make_law(mu_x, mu_m));
      },
      py::arg("nu_locations"), py::arg("nu_masses"), py::arg("mu_locations"), py::arg("mu_masses"));
  m.def(
      "barycenter",
      [](const std::vector<std::pair<std::vector<std::vector<double>>, std::vector<double>>>& laws,
         const std::vector<double>& weights) {
        std::vector<DiscreteLaw> ls;
        for (const auto& [x, w] : laws) ls.push_back(make_law(x, w));
        const Barycenter b = barycenter(ls, weights);
        py::tuple law = law_tuple(b.law);
        return py::make_tuple(law[0], law[1], b.approximate);
      },
      py::arg("laws"), py::arg("weights"),
      "Returns (locations, masses, approximate).");
}
