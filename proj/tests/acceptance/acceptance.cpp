// Acceptance gate: one PASS/FAIL line per criterion. `acceptance N` runs criterion N only.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "lorentz/cone.hpp"
#include "lorentz/expr.hpp"

using namespace lorentz;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream msg;
  void require(bool cond, const std::string& what) {
    if (!cond) ok = false;
    msg << (msg.tellp() > 0 ? "; " : "") << what << (cond ? "" : " [miss]");
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
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

double max_abs(const Array3& a, int N) {
  double m = 0.0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k) m = std::max(m, std::abs(a(i, j, k)));
  return m;
}

// 1. Flat exactness.
void flat_exactness(Outcome& o) {
  auto spec = builtin::minkowski(4);
  auto expr_spec = parse_metric_spec(expression_document(spec));
  double analytic = 0.0, fd = 0.0;
  for (const Vec& x : probe_points(spec.domain())) {
    analytic = std::max({analytic, max_abs(christoffel_at(spec, x).gamma, 4), max_abs(riemann_at(spec, x).riem)});
    fd = std::max({fd, max_abs(christoffel_fd(spec, x).gamma, 4), max_abs(riemann_fd(spec, x).riem),
                   max_abs(riemann_at(expr_spec, x).riem)});
  }
  o.require(analytic == 0.0, "analytic Gamma, R = " + num(analytic));
  o.require(fd < 1e-8, "finite-difference path " + num(fd) + " < 1e-8");
  auto obs = foliation_observer(spec, Vec::Zero(4));
  auto fr = complete_frame(spec, obs);
  double worst = 0.0;
  for (const Vec& w : sphere_lattice(4, 64))
    for (double r : {0.5, 3.0, 10.0}) {
      auto e = exp_map(spec, fr, r * w);
      worst = std::max(worst, e.ok ? (e.x - obs.p - fr.E * (r * w)).cwiseAbs().maxCoeff() : kInf);
    }
  o.require(worst < 1e-8, "exp vs translation " + num(worst) + " < 1e-8");
  auto conj = conjugate_radius(spec, obs, 10.0);
  o.require(!conj.min_s && conj.failures == 0, std::string("conjugate ") + (conj.min_s ? num(*conj.min_s) : "none <= 10"));
  RadiusOptions ro;
  ro.foliated_bound = ro.main_bound = false;
  auto rep = injectivity_radius(spec, obs, 10.0, ro);
  o.require(!rep.shortest_loop && !rep.conj_radius && rep.inj_estimate == 10.0,
            "injectivity " + std::string(rep.shortest_loop ? "loop found" : "none <= 10"));
}

// 2. Conservation on Schwarzschild.
void conservation(Outcome& o) {
  auto spec = builtin::schwarzschild(1.0);
  auto where = sphere_lattice(3, 100);
  auto dirs = sphere_lattice(4, 100);
  double drift = 0.0, eta = 0.0;
  int rays = 0;
  for (int i = 0; i < 100; ++i) {
    const double r = 4.0 + 16.0 * (i + 0.5) / 100.0;
    Vec p(4);
    p << 0.0, r * where[i][0], r * where[i][1], r * where[i][2];
    auto obs = foliation_observer(spec, p);
    auto fr = complete_frame(spec, obs);
    auto geo = integrate_geodesic(spec, p, fr.E * dirs[i], 1.0);
    if (geo.termination != Termination::reached_smax) continue;
    ++rays;
    drift = std::max(drift, norm_drift(spec, geo));
    auto tf = transport_frame(spec, geo, fr.E);
    for (size_t k = 0; k < tf.E.size(); ++k) eta = std::max(eta, eta_residual(tf.E[k], spec.metric(geo.samples[k].x)));
  }
  o.require(rays == 100, std::to_string(rays) + "/100 rays complete");
  o.require(drift < 1e-8, "norm drift " + num(drift) + " < 1e-8");
  o.require(eta < 1e-8, "eta residual " + num(eta) + " < 1e-8");
}

// 3. Jacobi closed forms.
void jacobi_closed_forms(Outcome& o) {
  auto ds = builtin::desitter_slicing(1.0, 4);
  auto obs = foliation_observer(ds, Vec::Zero(4));
  auto fr = complete_frame(ds, obs);
  std::vector<double> stops;
  for (int k = 1; k <= 40; ++k) stops.push_back(0.05 * k);
  auto geo = integrate_geodesic(ds, obs.p, fr.E.col(0), 2.0, -1.0, {}, stops);
  auto js = integrate_jacobi(ds, geo, fr.E, Vec::Zero(4), point({0, 0, 1, 0}));
  double rel = 0.0;
  for (size_t i = 0; i < js.s.size(); ++i)
    if (js.s[i] > 0.0) rel = std::max(rel, std::abs(js.F[i] / std::sinh(js.s[i]) - 1.0));
  o.require(rel < 1e-6, "F/sinh - 1 = " + num(rel) + " < 1e-6");
  ConjugateOptions opt;
  opt.directions = DirectionSet::spatial;
  opt.n_dirs = 12;
  double s1 = kInf, s4 = kInf;
  for (double K : {1.0, 4.0}) {
    auto sph = builtin::static_sphere(K, 4);
    auto so = foliation_observer(sph, point({0, 0.5 / std::sqrt(K), 0.3 / std::sqrt(K), 0}));
    auto res = conjugate_radius(sph, so, 5.0, opt);
    (K == 1.0 ? s1 : s4) = res.min_s ? *res.min_s : kInf;
  }
  o.require(std::abs(s1 - kPi) < 1e-3, "sphere conjugate " + num(s1) + " vs pi");
  o.require(std::abs(s4 - s1 / 2) < 1e-3, "quadrupled curvature " + num(s4) + " vs half");
}

// 4. Jacobian consistency against finite differences of exp.
void jacobian_consistency(Outcome& o) {
  double worst = 0.0;
  int probes = 0;
  for (const auto& spec : {builtin::minkowski(4), builtin::desitter_slicing(1.0, 4)}) {
    auto obs = foliation_observer(spec, Vec::Zero(4));
    auto fr = complete_frame(spec, obs);
    auto dirs = sphere_lattice(4, 100);
    for (const Vec& w : dirs)
      for (int k = 1; k <= 10; ++k) {
        const double s = 0.1 * k;
        const Vec y = s * w;
        const double h = 1e-4;
        Mat D(4, 4);
        bool ok = true;
        for (int j = 0; j < 4 && ok; ++j) {
          Vec e = Vec::Unit(4, j) * h;
          auto a = exp_map(spec, fr, y + e), b = exp_map(spec, fr, y - e);
          ok = a.ok && b.ok;
          if (ok) D.col(j) = (a.x - b.x) / (2 * h);
        }
        auto c = exp_map(spec, fr, y);
        if (!ok || !c.ok) continue;
        const double fd = std::sqrt(std::abs(spec.metric(c.x).determinant())) * D.determinant();
        const double phi = exp_jacobian(spec, fr, w, s);
        worst = std::max(worst, std::abs(phi / fd - 1.0));
        ++probes;
      }
  }
  o.require(probes == 2000, std::to_string(probes) + "/2000 probes");
  o.require(worst < 1e-3, "relative mismatch " + num(worst) + " < 1e-3");
}

// 5. Loop detection on the torus.
void loop_detection(Outcome& o) {
  auto spec = builtin::flat_spatial_torus(2.0, 4);
  auto obs = foliation_observer(spec, Vec::Zero(4));
  RadiusOptions ro;
  auto rep = injectivity_radius(spec, obs, 3.0, ro);
  const double loop = rep.shortest_loop ? *rep.shortest_loop : kInf;
  o.require(std::abs(loop / 2.0 - 1.0) < 0.02, "loop " + num(loop) + " vs 2");
  o.require(std::abs(rep.inj_estimate - 1.0) < 0.02, "inj " + num(rep.inj_estimate) + " vs 1");
  LoopOptions fine = ro.loops;
  fine.grid_density *= 2;
  auto ls = detect_short_loops(spec, obs, 3.0, fine);
  const double change = ls.shortest ? std::abs(*ls.shortest - loop) : kInf;
  const double bisection_tol = ConjugateOptions{}.root_tol;
  o.require(change < bisection_tol, "2x refinement change " + num(change) + " < " + num(bisection_tol));
}

// 6. Scale equivariance.
void scale_equivariance(Outcome& o) {
  struct Case {
    MetricSpec spec;
    Vec p;
    bool null;
  };
  std::vector<Case> cases{{builtin::flat_spatial_torus(2.0, 4), Vec::Zero(4), false},
                          {builtin::static_sphere(1.0, 3), point({0, 0.5, 0.3}), false},
                          {builtin::flat_spatial_torus(2.0, 3), Vec::Zero(3), true}};
  double worst = 0.0, ratio_dev = 0.0, foliated_dev = 0.0;
  RadiusOptions ro;
  ro.conjugate.n_dirs = 24;
  for (const auto& c : cases) {
    auto run = [&](const MetricSpec& s, double lam) {
      auto obs = foliation_observer(s, c.p);
      return c.null ? null_injectivity_radius(s, obs, 4.0 * lam, ro) : injectivity_radius(s, obs, 4.0 * lam, ro);
    };
    auto base = run(c.spec, 1.0);
    for (double lam : {0.5, 2.0}) {
      auto rep = run(c.spec.scaled(lam), lam);
      auto cmp = [&](const std::optional<double>& a, const std::optional<double>& b) {
        if (a.has_value() != b.has_value()) worst = kInf;
        if (a && b) worst = std::max(worst, std::abs(*b / (lam * *a) - 1.0));
      };
      cmp(base.inj_estimate, rep.inj_estimate);
      cmp(base.conj_radius, rep.conj_radius);
      cmp(base.shortest_loop, rep.shortest_loop);
      cmp(base.defined_radius, rep.defined_radius);
      cmp(base.thm_main_bound, rep.thm_main_bound);
      cmp(base.thm_null_bound, rep.thm_null_bound);
      if (base.thm_foliated_bound && rep.thm_foliated_bound)
        foliated_dev = std::max(foliated_dev, std::abs(*rep.thm_foliated_bound / (lam * *base.thm_foliated_bound) - 1.0));
    }
  }
  auto ds = builtin::desitter_slicing(1.0, 4);
  const double ref = theorem_main_bound(ds, foliation_observer(ds, Vec::Zero(4)), 0.8).bound / 0.8;
  for (double lam : {0.5, 2.0}) {
    auto s = ds.scaled(lam);
    const double r = theorem_main_bound(s, foliation_observer(s, Vec::Zero(4)), 0.8 * lam).bound / (0.8 * lam);
    ratio_dev = std::max(ratio_dev, std::abs(r / ref - 1.0));
  }
  o.require(worst < 0.01, "radii scale by lambda, worst " + num(worst) + " < 1%");
  o.require(ratio_dev < 1e-6, "main bound/r0 invariant " + num(ratio_dev) + " < 1e-6");
  o.msg << "; foliated-chain bound (absolute constants, not scale covariant) deviates " << num(foliated_dev);
}

// 7. Theorem-direction inequalities on every builtin model.
void theorem_direction(Outcome& o) {
  int checked = 0, violations = 0;
  RadiusOptions ro;
  ro.conjugate.n_dirs = 32;
  for (const std::string& name : builtin::names()) {
    auto spec = builtin::make(name, {}, 4);
    Vec p = Vec::Zero(4);
    if (name == "schwarzschild") p = point({0, 8, 0, 0});
    if (name == "static_sphere") p = point({0, 0.5, 0.3, 0});
    auto obs = foliation_observer(spec, p);
    auto rep = injectivity_radius(spec, obs, 3.0, ro);
    if (rep.thm_main_bound && std::isfinite(rep.inj_estimate)) {
      ++checked;
      if (*rep.thm_main_bound > rep.inj_estimate) ++violations;
    }
    auto nrep = null_injectivity_radius(spec, obs, 3.0, ro);
    if (nrep.thm_null_bound && std::isfinite(nrep.inj_estimate)) {
      ++checked;
      if (*nrep.thm_null_bound > nrep.inj_estimate) ++violations;
    }
  }
  o.require(checked >= 2 * static_cast<int>(builtin::names().size()), std::to_string(checked) + " comparisons");
  o.require(violations == 0, std::to_string(violations) + " violations");
}

// 8. Null-cone localization.
void null_localization(Outcome& o) {
  auto mink = builtin::minkowski(4);
  auto g = cone_graph(mink, foliation_observer(mink, Vec::Zero(4)), 1.0, 16, 8);
  double graph_dev = 0.0;
  for (const auto& pt : g.points) graph_dev = std::max(graph_dev, pt.ok ? std::abs(pt.F - pt.rho) : kInf);
  o.require(graph_dev < 1e-6 && std::abs(g.lipschitz - 1.0) < 1e-6,
            "Minkowski t = -|x| dev " + num(graph_dev) + ", Lipschitz " + num(g.lipschitz));
  auto flat4 = parse_metric_spec("[model]\ndim = 4\n[lapse]\nlapse = \"1\"\n[spatial]\ng11 = \"4\"\ng22 = \"4\"\ng33 = \"4\"\n");
  auto g4 = cone_graph(flat4, foliation_observer(flat4, Vec::Zero(4)), 0.5, 16, 8);
  o.require(std::abs(g4.lipschitz - 0.5) < 1e-6, "g_ij = 4 delta slope " + num(g4.lipschitz));
  auto schw = builtin::schwarzschild(1.0);
  auto so = foliation_observer(schw, point({0, 10, 0, 0}));
  auto loc = localize_null_cone(schw, so, 2.0, 256, 16);
  auto gs = cone_graph(schw, so, 1.0, 16, 8);
  o.require(loc.violations + gs.annulus_violations == 0 && loc.incomplete == 0 && gs.excluded == 0,
            "Schwarzschild annulus violations " + std::to_string(loc.violations + gs.annulus_violations));
}

// 9. Volume comparison.
void volume_comparison(Outcome& o) {
  std::vector<double> radii;
  for (int k = 1; k <= 20; ++k) radii.push_back(0.1 * k);
  ConeSpec cone;
  auto mink = builtin::minkowski(4);
  auto mo = foliation_observer(mink, Vec::Zero(4));
  auto curved = comparison_ratio_curve(mink, mo, cone, radii, 1.0);
  auto flat = comparison_ratio_curve(mink, mo, cone, radii, 0.0);
  auto ds = builtin::desitter_slicing(1.0, 4);
  auto dsc = comparison_ratio_curve(ds, foliation_observer(ds, Vec::Zero(4)), cone, radii, 1.0);
  double flat_dev = 0.0;
  for (double r : flat.ratio) flat_dev = std::max(flat_dev, std::abs(r - flat.ratio.front()));
  const double ch = std::cosh(1.5);
  const double model_dev = std::abs(model_volume(1.0, 1.5, 3) - (ch * ch * ch - 3 * ch + 2) / 3);
  o.require(curved.violations == 0, "Minkowski vs K2=1 violations " + std::to_string(curved.violations));
  o.require(dsc.violations == 0 && dsc.profile.ricci_violations == 0,
            "de Sitter vs K2=1 violations " + std::to_string(dsc.violations));
  o.require(flat_dev < 1e-6, "flat/flat spread " + num(flat_dev));
  o.require(model_dev < 1e-9, "model_volume vs antiderivative " + num(model_dev));
}

// 10. Convexity of the synchronous chart.
void convexity(Outcome& o) {
  auto mink = builtin::minkowski(4);
  auto mo = foliation_observer(mink, Vec::Zero(4));
  auto ch = build_synchronous_chart(mink, mo, 1.0);
  auto cv = convexity_check(mink, mo, ch, 1e-6);
  int close = 0;
  for (const auto& r : cv.rows)
    if (std::abs(r.min_eig - 2.0) <= 1e-6 && std::abs(r.max_eig - 2.0) <= 1e-6) ++close;
  const double frac = cv.rows.empty() ? 0.0 : double(close) / cv.rows.size();
  o.require(frac >= 0.99, "Minkowski eigenvalues 2 +- 1e-6 on " + num(100 * frac) + "% of points");
  o.require(ch.max_residual < 1e-6, "|grad tau|^2 + 1 residual " + num(ch.max_residual));
  auto ds = builtin::desitter_slicing(1.0, 4);
  auto dso = foliation_observer(ds, Vec::Zero(4));
  const double r0 = 0.2;
  const double eps = riemann_norm_T(ds, dso.p) * r0 * r0;
  auto dch = build_synchronous_chart(ds, dso, r0);
  auto dcv = convexity_check(ds, dso, dch, eps);
  o.require(dcv.evaluated > 0 && dcv.min_eig >= 2 - eps && dcv.max_eig <= 2 + eps,
            "de Sitter eigenvalues [" + num(dcv.min_eig) + ", " + num(dcv.max_eig) + "] in [2 -+ " + num(eps) + "]");
}

// 11. Connection gap lemma.
void connection_gap_check(Outcome& o) {
  for (const std::string& name : builtin::names()) {
    auto spec = builtin::make(name, {}, 4);
    Vec p = Vec::Zero(4);
    if (name == "schwarzschild") p = point({0, 8, 0, 0});
    auto rep = connection_gap(spec, halton_probes(spec, p, 1.0, 100));
    o.require(rep.violations == 0 && rep.rows.size() == 100,
              name + " lhs " + num(rep.max_lhs) + " vs e^{2K0}K1^2 " + num(rep.bound));
  }
}

// 12. Parser round trips, located errors and fuzzing.
void parser(Outcome& o) {
  double worst = 0.0;
  for (const std::string& name : builtin::names()) {
    auto spec = builtin::make(name, {}, 4);
    auto e = parse_metric_spec(expression_document(spec));
    auto again = parse_metric_spec(e.to_document());
    for (const Vec& x : probe_points(spec.domain())) {
      worst = std::max(worst, (e.metric(x) - spec.metric(x)).cwiseAbs().maxCoeff());
      worst = std::max(worst, (again.metric(x) - spec.metric(x)).cwiseAbs().maxCoeff());
    }
  }
  o.require(worst < 1e-12, "expression round trip " + num(worst));

  const std::string spatial = "[spatial]\ng11 = \"1\"\ng22 = \"1\"\ng33 = \"1\"\n";
  auto with_lapse = [&](const std::string& l) { return "[model]\ndim = 4\n[lapse]\nlapse = " + l + "\n" + spatial; };
  const std::vector<std::string> bad{
      "[model\ndim = 4\n",
      "[model]\ndim = \n",
      "[model]\ndim 4\n",
      "[model]\ndim = 4\ndim = 4\n",
      with_lapse("\"1 +\""),
      with_lapse("\"1 * (x\""),
      with_lapse("\"foo(x)\""),
      with_lapse("\"q + 1\""),
      with_lapse("\"1"),
      with_lapse("\"1 +* x\""),
      with_lapse("\"2..5\""),
      with_lapse("\"x^\""),
      with_lapse("\"\""),
      with_lapse("\"sin(x,)\""),
      "[model]\ndim = \"four\"\n" + spatial,
      "[model]\ndim = 1\n",
      "[bogus]\nk = 1\n",
      "= 3\n",
      "[model]\ndim = 4 4\n",
      "[model]\nmodel = \"nonexistent\"\ndim = 4\n",
  };
  int located = 0;
  std::string missed;
  for (size_t i = 0; i < bad.size(); ++i) {
    try {
      parse_metric_spec(bad[i]);
      missed += " #" + std::to_string(i + 1) + "(accepted)";
    } catch (const ParseError& e) {
      ++located;
    } catch (const std::exception& e) {
      missed += " #" + std::to_string(i + 1) + "(" + e.what() + ")";
    }
  }
  o.require(located == static_cast<int>(bad.size()),
            std::to_string(located) + "/" + std::to_string(bad.size()) + " located errors" + missed);

  const std::vector<std::string> tokens{
      "[model]", "[lapse]", "[spatial]", "[metric]", "[domain]", "[params]", "dim", "lapse", "g11", "g12", "g00",
      "model", "K", "=", "\"", "\n", ";", "#", ",", "4", "-1", "1e400", "0.5", "x", "y", "t", "+", "-", "*",
      "/", "^", "(", ")", "sin", "exp", "sqrt", "log", "pi", "[", "]", " ", "\t", "abc", "\\", "\xff", "1e-3"};
  std::mt19937_64 rng(12345);
  std::uniform_int_distribution<size_t> pick(0, tokens.size() - 1);
  std::uniform_int_distribution<int> len(0, 40);
  int accepted = 0, rejected = 0, crashed = 0;
  for (int n = 0; n < 10000; ++n) {
    std::string doc;
    const int L = len(rng);
    for (int k = 0; k < L; ++k) doc += tokens[pick(rng)];
    try {
      parse_metric_spec(doc);
      ++accepted;
    } catch (const Error&) {
      ++rejected;
    } catch (...) {
      ++crashed;
    }
  }
  o.require(crashed == 0, "fuzz 10^4 streams: " + std::to_string(rejected) + " rejected, " +
                              std::to_string(accepted) + " accepted, " + std::to_string(crashed) + " unexpected");
}

struct Criterion {
  const char* name;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {"flat exactness", flat_exactness},
      {"conservation", conservation},
      {"Jacobi closed forms", jacobi_closed_forms},
      {"Jacobian consistency", jacobian_consistency},
      {"loop detection", loop_detection},
      {"scale equivariance", scale_equivariance},
      {"theorem-direction inequalities", theorem_direction},
      {"null-cone localization", null_localization},
      {"volume comparison", volume_comparison},
      {"convexity", convexity},
      {"connection gap", connection_gap_check},
      {"parser", parser},
  };
  int only = argc > 1 ? std::atoi(argv[1]) : 0;
  int failed = 0;
  for (size_t i = 0; i < all.size(); ++i) {
    if (only && static_cast<int>(i) + 1 != only) continue;
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
      all[i].run(o);
    } catch (const std::exception& e) {
      o.ok = false;
      o.msg << (o.msg.tellp() > 0 ? "; " : "") << "error: " << e.what();
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.ok ? "PASS" : "FAIL") << " " << (i + 1 < 10 ? "0" : "") << i + 1 << " " << all[i].name << ": "
              << o.msg.str() << " (" << num(sec) << " s)" << std::endl;
    if (!o.ok) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
