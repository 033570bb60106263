#include <chrono>
#include <functional>

#include "cli.hpp"
#include "lorentz/expr.hpp"

namespace lorentz::cli {

namespace {

using Check = std::function<InvariantResult()>;

InvariantResult result(const std::string& name, double value, double tol, bool le = true) {
  InvariantResult r;
  r.name = name;
  r.value = value;
  r.tolerance = tol;
  r.passed = le ? value <= tol : value >= tol;
  r.detail = "value " + expr::format_number(value) + (le ? ", max " : ", min ") + expr::format_number(tol);
  return r;
}

Vec point(std::initializer_list<double> v) {
  Vec x(static_cast<int>(v.size()));
  int i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

double max_abs(const Array4& a) {
  double m = 0.0;
  const int N = a.dim();
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k)
        for (int l = 0; l < N; ++l) m = std::max(m, std::abs(a(i, j, k, l)));
  return m;
}

std::vector<MetricSpec> curved_builtins() {
  return {builtin::schwarzschild(1.0), builtin::desitter_slicing(1.0, 4), builtin::flrw(), builtin::static_sphere(1.0, 4)};
}

std::vector<std::pair<std::string, Check>> checks() {
  std::vector<std::pair<std::string, Check>> c;

  c.emplace_back("spacetime.minkowski_flat", [] {
    auto spec = builtin::minkowski(4);
    double worst = 0.0;
    for (const Vec& x : probe_points(spec.domain())) {
      worst = std::max(worst, max_abs(riemann_at(spec, x).riem));
      worst = std::max(worst, max_abs(riemann_fd(spec, x).riem));
    }
    return result("spacetime.minkowski_flat", worst, 1e-8);
  });

  c.emplace_back("spacetime.riemann_symmetries", [] {
    double worst = 0.0;
    for (const auto& spec : curved_builtins())
      for (const Vec& x : probe_points(spec.domain()))
        worst = std::max(worst, riemann_symmetry_residual(riemann_at(spec, x)));
    return result("spacetime.riemann_symmetries", worst, 1e-10);
  });

  c.emplace_back("spacetime.analytic_vs_fd", [] {
    auto spec = builtin::schwarzschild(1.0);
    double worst = 0.0;
    for (const Vec& x : {point({0, 6, 0, 0}), point({0, 3, 4, 1}), point({0.5, -4, 2, 7})}) {
      auto a = riemann_at(spec, x).riem;
      auto b = riemann_fd(spec, x).riem;
      const int N = 4;
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
          for (int k = 0; k < N; ++k)
            for (int l = 0; l < N; ++l) worst = std::max(worst, std::abs(a(i, j, k, l) - b(i, j, k, l)));
    }
    return result("spacetime.analytic_vs_fd", worst, 1e-6);
  });

  // Sectional curvature of the time-space plane: timelike geodesics spread like sinh.
  c.emplace_back("spacetime.desitter_closed_form", [] {
    auto spec = builtin::desitter_slicing(1.0, 4);
    Vec x = point({0.3, 0.1, -0.2, 0.4});
    auto R = riemann_at(spec, x);
    Mat g = spec.metric(x);
    double worst = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int cc = 0; cc < 4; ++cc)
          for (int d = 0; d < 4; ++d)
            worst = std::max(worst, std::abs(R.riem(a, b, cc, d) - (g(a, cc) * g(b, d) - g(a, d) * g(b, cc))));
    return result("spacetime.desitter_closed_form", worst, 1e-9);
  });

  c.emplace_back("frames.reference_metric", [] {
    double worst = 0.0;
    for (const auto& spec : curved_builtins())
      for (const Vec& x : probe_points(spec.domain())) {
        Observer obs = foliation_observer(spec, x);
        Mat g = spec.metric(x);
        OrthoFrame fr = complete_frame(spec, obs);
        worst = std::max(worst, eta_residual(fr.E, g));
        Mat gT = reference_metric(g, obs.T);
        if (Eigen::SelfAdjointEigenSolver<Mat>(gT).eigenvalues().minCoeff() <= 0.0) worst = kInf;
      }
    return result("frames.reference_metric", worst, 1e-10);
  });

  c.emplace_back("geodesic.norm_drift", [] {
    auto spec = builtin::schwarzschild(1.0);
    Observer obs = foliation_observer(spec, point({0, 8, 0, 0}));
    OrthoFrame fr = complete_frame(spec, obs);
    double worst = 0.0;
    for (const Vec& w : sphere_lattice(4, 20)) worst = std::max(worst, norm_drift(spec, integrate_geodesic(spec, obs.p, fr.E * w, 1.0)));
    return result("geodesic.norm_drift", worst, 1e-8);
  });

  c.emplace_back("geodesic.frame_transport", [] {
    auto spec = builtin::schwarzschild(1.0);
    Observer obs = foliation_observer(spec, point({0, 6, 2, 0}));
    OrthoFrame fr = complete_frame(spec, obs);
    double worst = 0.0;
    for (const Vec& w : sphere_lattice(4, 8)) {
      auto geo = integrate_geodesic(spec, obs.p, fr.E * w, 1.0);
      auto tf = transport_frame(spec, geo, fr.E);
      for (size_t i = 0; i < tf.E.size(); ++i)
        worst = std::max(worst, eta_residual(tf.E[i], spec.metric(geo.samples[i].x)));
    }
    return result("geodesic.frame_transport", worst, 1e-8);
  });

  c.emplace_back("geodesic.flat_exp", [] {
    auto spec = builtin::minkowski(4);
    Observer obs = foliation_observer(spec, Vec::Zero(4));
    OrthoFrame fr = complete_frame(spec, obs);
    double worst = 0.0;
    for (const Vec& w : sphere_lattice(4, 16)) {
      Vec y = 3.0 * w;
      auto e = exp_map(spec, fr, y);
      worst = std::max(worst, e.ok ? (e.x - fr.E * y).cwiseAbs().maxCoeff() : kInf);
    }
    return result("geodesic.flat_exp", worst, 1e-8);
  });

  c.emplace_back("jacobi.desitter_sinh", [] {
    auto spec = builtin::desitter_slicing(1.0, 4);
    Observer obs = foliation_observer(spec, Vec::Zero(4));
    OrthoFrame fr = complete_frame(spec, obs);
    auto geo = integrate_geodesic(spec, obs.p, fr.E.col(0), 2.0, -1.0, {}, {0.5, 1.0, 1.5, 2.0});
    auto js = integrate_jacobi(spec, geo, fr.E, Vec::Zero(4), point({0, 0, 1, 0}));
    double worst = 0.0;
    for (size_t i = 1; i < js.s.size(); ++i) worst = std::max(worst, std::abs(js.F[i] / std::sinh(js.s[i]) - 1.0));
    return result("jacobi.desitter_sinh", worst, 1e-6);
  });

  c.emplace_back("jacobi.sphere_conjugate", [] {
    auto spec = builtin::static_sphere(1.0, 4);
    Observer obs = foliation_observer(spec, point({0, 0.5, 0.3, 0}));
    ConjugateOptions opt;
    opt.directions = DirectionSet::spatial;
    opt.n_dirs = 6;
    auto res = conjugate_radius(spec, obs, 5.0, opt);
    return result("jacobi.sphere_conjugate", res.min_s ? std::abs(*res.min_s - kPi) : kInf, 1e-3);
  });

  c.emplace_back("radius.torus_loop", [] {
    auto spec = builtin::flat_spatial_torus(2.0, 3);
    auto ls = detect_short_loops(spec, foliation_observer(spec, Vec::Zero(3)), 3.0);
    return result("radius.torus_loop", ls.shortest ? std::abs(*ls.shortest / 2.0 - 1.0) : kInf, 0.02);
  });

  c.emplace_back("radius.main_bound_direction", [] {
    double worst = -kInf;
    RadiusOptions opt;
    opt.conjugate.n_dirs = 16;
    for (const auto& spec : {builtin::minkowski(3), builtin::flat_spatial_torus(2.0, 3), builtin::static_sphere(1.0, 3)}) {
      Vec p = Vec::Zero(3);
      if (spec.name() == "static_sphere") p = point({0, 0.5, 0.3});
      auto rep = injectivity_radius(spec, foliation_observer(spec, p), 4.0, opt);
      if (rep.thm_main_bound) worst = std::max(worst, *rep.thm_main_bound - rep.inj_estimate);
      if (rep.thm_foliated_bound) worst = std::max(worst, *rep.thm_foliated_bound - rep.inj_estimate);
    }
    return result("radius.main_bound_direction", worst, 0.0);
  });

  c.emplace_back("cone.minkowski_graph", [] {
    auto spec = builtin::minkowski(4);
    auto g = cone_graph(spec, foliation_observer(spec, Vec::Zero(4)), 1.0, 8, 4);
    return result("cone.minkowski_graph", std::abs(g.lipschitz - 1.0) + g.annulus_violations, 1e-6);
  });

  c.emplace_back("cone.flat_ratio", [] {
    auto spec = builtin::minkowski(4);
    auto vc = comparison_ratio_curve(spec, foliation_observer(spec, Vec::Zero(4)), ConeSpec{}, {0.5, 1.0, 2.0}, 0.0);
    double worst = 0.0;
    for (double r : vc.ratio) worst = std::max(worst, std::abs(r - 1.0));
    return result("cone.flat_ratio", worst, 1e-6);
  });

  // Under the Ricci hypothesis with the matched K2 the ratio cannot increase.
  c.emplace_back("cone.desitter_ratio_monotone", [] {
    auto spec = builtin::desitter_slicing(1.0, 4);
    ConeSpec cone;
    cone.n_azimuth = 8;
    auto vc = comparison_ratio_curve(spec, foliation_observer(spec, Vec::Zero(4)), cone, {0.4, 0.8, 1.2, 1.6, 2.0}, 1.0);
    return result("cone.desitter_ratio_monotone", vc.violations + vc.profile.ricci_violations, 0.0);
  });

  c.emplace_back("cone.model_volume", [] {
    const double ch = std::cosh(1.0);
    return result("cone.model_volume", std::abs(model_volume(1.0, 1.0, 3) - (ch * ch * ch - 3 * ch + 2) / 3), 1e-9);
  });

  c.emplace_back("parser.builtin_roundtrip", [] {
    double worst = 0.0;
    for (const auto& spec : curved_builtins()) {
      auto expr = parse_metric_spec(expression_document(spec));
      auto again = parse_metric_spec(spec.to_document());
      for (const Vec& x : probe_points(spec.domain())) {
        worst = std::max(worst, (expr.metric(x) - spec.metric(x)).cwiseAbs().maxCoeff());
        worst = std::max(worst, (again.metric(x) - spec.metric(x)).cwiseAbs().maxCoeff());
      }
    }
    return result("parser.builtin_roundtrip", worst, 1e-12);
  });

  c.emplace_back("frames.connection_gap", [] {
    auto spec = builtin::schwarzschild(1.0);
    auto rep = connection_gap(spec, halton_probes(spec, point({0, 8, 0, 0}), 1.0, 50));
    InvariantResult r;
    r.name = "frames.connection_gap";
    r.gating = false;
    r.value = rep.max_lhs;
    r.tolerance = rep.bound;
    r.passed = rep.violations == 0;
    r.detail = "max |Gamma_gT - Gamma|_T = " + expr::format_number(rep.max_lhs) + ", e^{2K0} K1^2 = " +
               expr::format_number(rep.bound) + ", " + std::to_string(rep.violations) + " of " +
               std::to_string(rep.rows.size()) + " probes above (Schwarzschild, reported only)";
    return r;
  });
  return c;
}

}  // namespace

std::vector<InvariantResult> run_invariant_suite() {
  std::vector<InvariantResult> out;
  for (auto& [name, check] : checks()) {
    auto t0 = std::chrono::steady_clock::now();
    InvariantResult r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r.name = name;
      r.value = kInf;
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(r);
  }
  return out;
}

}  // namespace lorentz::cli
