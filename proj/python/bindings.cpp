#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lorentz/cone.hpp"

namespace py = pybind11;
using namespace lorentz;

namespace {

py::array_t<double> to_numpy(const Array3& a, int N) {
  py::array_t<double> out({N, N, N});
  auto m = out.mutable_unchecked<3>();
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k) m(i, j, k) = a(i, j, k);
  return out;
}

py::array_t<double> to_numpy(const Array4& a, int N) {
  py::array_t<double> out({N, N, N, N});
  auto m = out.mutable_unchecked<4>();
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k)
        for (int l = 0; l < N; ++l) m(i, j, k, l) = a(i, j, k, l);
  return out;
}

Observer observer_for(const MetricSpec& spec, const Vec& p, const std::optional<Vec>& T) {
  return T ? make_observer(spec, p, *T) : foliation_observer(spec, p);
}

py::dict radius_dict(const RadiusReport& r) {
  py::dict d;
  d["conj_radius"] = r.conj_radius;
  d["shortest_loop"] = r.shortest_loop;
  d["inj_estimate"] = r.inj_estimate;
  d["r_max"] = r.r_max;
  d["defined_radius"] = r.defined_radius;
  d["foliated_bound"] = r.thm_foliated_bound;
  d["main_bound"] = r.thm_main_bound;
  d["null_bound"] = r.thm_null_bound;
  d["bound_violations"] = r.bound_violations;
  py::dict diag;
  for (const auto& kv : r.diagnostics.items) diag[py::str(kv.first)] = kv.second;
  d["diagnostics"] = diag;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Observer-based injectivity radius, null cone and cone volume analyses";

  auto error = py::register_exception<Error>(m, "Error");
  auto spec_error = py::register_exception<SpecError>(m, "SpecError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", spec_error.ptr());
  py::register_exception<ChartError>(m, "ChartError", error.ptr());
  py::register_exception<AnalysisError>(m, "AnalysisError", error.ptr());

  py::class_<MetricSpec>(m, "MetricSpec")
      .def_property_readonly("dim", &MetricSpec::dim)
      .def_property_readonly("name", &MetricSpec::name)
      .def_property_readonly("foliated", &MetricSpec::foliated)
      .def_property_readonly("parameters", &MetricSpec::parameters)
      .def_property_readonly("scale", &MetricSpec::scale)
      .def("scaled", &MetricSpec::scaled, py::arg("lam"))
      .def("to_document", &MetricSpec::to_document)
      .def("metric", [](const MetricSpec& s, const Vec& x) { return metric_at(s, x).g; }, py::arg("x"))
      .def("christoffel", [](const MetricSpec& s, const Vec& x) { return to_numpy(christoffel_at(s, x).gamma, s.dim()); },
           py::arg("x"), "Gamma[c, a, b] = Γ^c_ab")
      .def("riemann", [](const MetricSpec& s, const Vec& x) { return to_numpy(riemann_at(s, x).riem, s.dim()); },
           py::arg("x"), "R[a, b, c, d] = R_abcd")
      .def("ricci", [](const MetricSpec& s, const Vec& x) { return riemann_at(s, x).ricci; }, py::arg("x"))
      .def("__repr__", [](const MetricSpec& s) { return "<MetricSpec " + s.name() + " dim=" + std::to_string(s.dim()) + ">"; });

  m.def("parse_spec", [](const std::string& text) { return parse_metric_spec(text); }, py::arg("text"));
  m.def("load_spec", &load_metric_spec, py::arg("path"));
  m.def("builtin_names", &builtin::names);
  m.def(
      "builtin",
      [](const std::string& name, const std::map<std::string, double>& params, int dim, const std::string& a) {
        return builtin::make(name, params, dim, a);
      },
      py::arg("name"), py::arg("params") = std::map<std::string, double>{}, py::arg("dim") = 4, py::arg("a") = "");
  m.def("expression_document", &expression_document, py::arg("spec"));

  m.def(
      "geodesic",
      [](const MetricSpec& spec, const Vec& p, const Vec& v0, double s_max, double tol) {
        auto geo = integrate_geodesic(spec, p, v0, s_max, tol);
        std::vector<double> s;
        Eigen::MatrixXd x(geo.samples.size(), spec.dim()), v(geo.samples.size(), spec.dim());
        for (size_t i = 0; i < geo.samples.size(); ++i) {
          s.push_back(geo.samples[i].s);
          x.row(i) = geo.samples[i].x.transpose();
          v.row(i) = geo.samples[i].v.transpose();
        }
        py::dict d;
        d["s"] = s;
        d["x"] = x;
        d["v"] = v;
        d["termination"] = to_string(geo.termination);
        d["norm_drift"] = norm_drift(spec, geo);
        return d;
      },
      py::arg("spec"), py::arg("p"), py::arg("v0"), py::arg("s_max"), py::arg("tol") = -1.0);

  m.def(
      "exp_map",
      [](const MetricSpec& spec, const Vec& p, const Vec& y, const std::optional<Vec>& T) -> std::optional<Vec> {
        auto e = exp_map(spec, observer_for(spec, p, T), y);
        if (!e.ok) return std::nullopt;
        return e.x;
      },
      py::arg("spec"), py::arg("p"), py::arg("y"), py::arg("T") = py::none(),
      "exp_p(E y) with y in observer-frame components; None if the geodesic leaves the chart");

  m.def(
      "exp_jacobian",
      [](const MetricSpec& spec, const Vec& p, const Vec& w, double s, const std::optional<Vec>& T) {
        return exp_jacobian(spec, observer_for(spec, p, T), w, s);
      },
      py::arg("spec"), py::arg("p"), py::arg("w"), py::arg("s"), py::arg("T") = py::none());

  m.def(
      "conjugate_radius",
      [](const MetricSpec& spec, const Vec& p, double r_max, int n_dirs, bool spatial, const std::optional<Vec>& T) {
        ConjugateOptions opt;
        opt.n_dirs = n_dirs;
        if (spatial) opt.directions = DirectionSet::spatial;
        return conjugate_radius(spec, observer_for(spec, p, T), r_max, opt).min_s;
      },
      py::arg("spec"), py::arg("p"), py::arg("r_max"), py::arg("n_dirs") = 64, py::arg("spatial") = false,
      py::arg("T") = py::none(), "first conjugate point over the direction lattice; spatial=True keeps g_T-unit vectors orthogonal to T");

  m.def(
      "injectivity_radius",
      [](const MetricSpec& spec, const Vec& p, double r_max, int n_dirs, int grid, bool null,
         const std::optional<Vec>& T) {
        RadiusOptions opt;
        opt.conjugate.n_dirs = n_dirs;
        opt.loops.grid_density = grid;
        const Observer obs = observer_for(spec, p, T);
        return radius_dict(null ? null_injectivity_radius(spec, obs, r_max, opt) : injectivity_radius(spec, obs, r_max, opt));
      },
      py::arg("spec"), py::arg("p"), py::arg("r_max"), py::arg("n_dirs") = 64, py::arg("grid") = 8,
      py::arg("null") = false, py::arg("T") = py::none());

  m.def(
      "cone_graph",
      [](const MetricSpec& spec, const Vec& p, double radius, int directions, int levels) {
        auto g = cone_graph(spec, foliation_observer(spec, p), radius, directions, levels);
        std::vector<double> rho, F;
        for (const auto& pt : g.points)
          if (pt.ok) {
            rho.push_back(pt.rho);
            F.push_back(pt.F);
          }
        py::dict d;
        d["rho"] = rho;
        d["F"] = F;
        d["lipschitz"] = g.lipschitz;
        d["annulus_violations"] = g.annulus_violations;
        d["excluded"] = g.excluded;
        return d;
      },
      py::arg("spec"), py::arg("p"), py::arg("radius"), py::arg("directions") = 16, py::arg("levels") = 8);

  m.def(
      "ratio_curve",
      [](const MetricSpec& spec, const Vec& p, const std::vector<double>& radii, double K2, double half_angle,
         bool past) {
        ConeSpec cone;
        cone.half_angle = half_angle;
        cone.orientation = past ? Orientation::past : Orientation::future;
        auto c = comparison_ratio_curve(spec, foliation_observer(spec, p), cone, radii, K2);
        py::dict d;
        d["radii"] = c.radii;
        d["volume"] = c.volume;
        d["model"] = c.model;
        d["ratio"] = c.ratio;
        d["violations"] = c.violations;
        return d;
      },
      py::arg("spec"), py::arg("p"), py::arg("radii"), py::arg("K2"), py::arg("half_angle") = kPi / 8,
      py::arg("past") = false);

  m.def("model_volume", &model_volume, py::arg("K2"), py::arg("r"), py::arg("n"), py::arg("solid_angle") = 1.0);
}
