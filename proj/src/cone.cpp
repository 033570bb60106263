#include "lorentz/cone.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "lorentz/expr.hpp"
#include "lorentz/parallel.hpp"

namespace lorentz {

using expr::format_number;

// ================================================================ localization

ConeBounds measure_cone_bounds(const MetricSpec& spec, const Vec& p, double t_range, double space_range,
                               int per_axis) {
  if (!spec.foliated()) throw SpecError("null-cone localization needs a spec in foliated form");
  const int N = spec.dim(), n = N - 1;
  per_axis = std::max(per_axis, 2);
  ConeBounds b;
  b.c1 = kInf;
  long total = 1;
  for (int a = 0; a < N; ++a) total *= per_axis;
  for (long id = 0; id < total; ++id) {
    Vec x = p;
    long rem = id;
    for (int a = 0; a < N; ++a) {
      const double f = static_cast<double>(rem % per_axis) / (per_axis - 1);
      rem /= per_axis;
      x[a] += a == 0 ? -t_range * f : space_range * (2.0 * f - 1.0);
    }
    if (!spec.domain().contains(x)) continue;
    ++b.samples;
    const double lapse = spec.lapse(x);
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(spec.metric(x).bottomRightCorner(n, n)));
    const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
    b.c1 = std::min(b.c1, lapse / std::sqrt(lmax));
    b.C1 = std::max(b.C1, lapse / std::sqrt(lmin));
    b.C0_display = std::max({b.C0_display, lapse * lapse, 1.0 / (lapse * lapse)});
    b.C1_display = std::max({b.C1_display, lmax, 1.0 / lmin});
  }
  if (b.samples == 0) throw ChartError("no sample of the cone region lies in the chart");
  return b;
}

namespace {

ConeBounds bounds_for_cone(const MetricSpec& spec, const Vec& p, double t_range) {
  ConeBounds at_p = measure_cone_bounds(spec, p, 0.0, 0.0, 2);
  ConeBounds b = measure_cone_bounds(spec, p, t_range, 1.2 * at_p.C1 * t_range, 5);
  // One widening pass in case the light speed grows inside the region.
  if (b.C1 > 1.2 * at_p.C1) b = measure_cone_bounds(spec, p, t_range, 1.2 * b.C1 * t_range, 5);
  return b;
}

double spatial_distance(const MetricSpec& spec, const Vec& from, const Vec& to) {
  Vec d = spec.domain().displacement(from, to);
  return d.tail(d.size() - 1).norm();
}

}  // namespace

Localization localize_null_cone(const MetricSpec& spec, const Observer& obs, double t_range, int n_rays, int slices) {
  if (!(t_range > 0.0)) throw SpecError("t_range must be positive");
  const int N = spec.dim();
  const ChartDomain& dom = spec.domain();
  if (obs.p[0] - t_range <= dom.lo[0]) throw ChartError("chart too small for the requested t_range");
  Localization loc;
  loc.t_range = t_range;
  loc.bounds = bounds_for_cone(spec, obs.p, t_range);
  OrthoFrame frame = complete_frame(spec, obs);
  ChartDomain cut = dom;
  cut.lo[0] = std::max(dom.lo[0], obs.p[0] - t_range * (1.0 + 1e-3));
  MetricSpec bounded = spec.with_domain(cut);
  std::vector<Vec> dirs = direction_set(DirectionSet::null_past, N, n_rays);
  loc.rays = static_cast<int>(dirs.size());
  std::vector<std::vector<SliceHit>> per(dirs.size());
  std::vector<char> incomplete(dirs.size(), 0);
  const double c1 = loc.bounds.c1, C1 = loc.bounds.C1;
  parallel_for(dirs.size(), [&](size_t i) {
    RaySetup setup;
    setup.p = obs.p;
    setup.v = frame.E * dirs[i];
    const double rate = std::abs(setup.v[0]);
    Ray ray = integrate_ray(bounded, setup, 20.0 * t_range / std::max(rate, 1e-12), IntegratorOptions{});
    for (int k = 1; k <= slices; ++k) {
      const double dt = t_range * k / slices;
      const double target = obs.p[0] - dt;
      size_t j = 1;
      while (j < ray.size() && ray.node(j).x[0] > target) ++j;
      if (j >= ray.size()) {
        incomplete[i] = 1;
        break;
      }
      double s_hit = ray.traj.s[j];
      if (ray.node(j).x[0] != target) {
        auto f = [&](double s) { return ray.at(s).x[0] - target; };
        boost::uintmax_t iters = 100;
        auto r = boost::math::tools::toms748_solve(f, ray.traj.s[j - 1], ray.traj.s[j],
                                                   boost::math::tools::eps_tolerance<double>(50), iters);
        s_hit = 0.5 * (r.first + r.second);
      }
      SliceHit h;
      h.direction = dirs[i];
      h.dt = dt;
      h.rho = spatial_distance(spec, obs.p, ray.at(s_hit).x);
      h.inside = h.rho >= c1 * dt * (1.0 - 1e-9) - 1e-12 && h.rho <= C1 * dt * (1.0 + 1e-9) + 1e-12;
      per[i].push_back(h);
    }
  });
  for (size_t i = 0; i < dirs.size(); ++i) {
    loc.incomplete += incomplete[i];
    for (const auto& h : per[i]) {
      if (!h.inside) ++loc.violations;
      loc.hits.push_back(h);
    }
  }
  return loc;
}

// ================================================================ graph

std::string ConeGraph::csv() const {
  std::ostringstream os;
  os << "direction,level,rho,height,F,in_annulus\n";
  for (size_t i = 0; i < points.size(); ++i) {
    const GraphPoint& g = points[i];
    if (!g.ok) continue;
    os << i / std::max(radial, 1) << "," << i % std::max(radial, 1) + 1 << "," << format_number(g.rho) << ","
       << format_number(g.height) << "," << format_number(g.F) << "," << (g.in_annulus ? 1 : 0) << "\n";
  }
  return os.str();
}

ConeGraph cone_graph(const MetricSpec& spec, const Observer& obs, double radius, int directions, int radial) {
  if (!(radius > 0.0)) throw SpecError("graph radius must be positive");
  const int N = spec.dim(), n = N - 1;
  ConeGraph cg;
  cg.radius = radius;
  cg.radial = std::max(radial, 1);
  ConeBounds at_p = measure_cone_bounds(spec, obs.p, 0.0, 0.0, 2);
  cg.bounds = bounds_for_cone(spec, obs.p, 1.5 * radius / at_p.c1);
  const double c1 = cg.bounds.c1, C1 = cg.bounds.C1;
  OrthoFrame frame = complete_frame(spec, obs);
  Mat g0 = spec.metric(obs.p);
  Mat Einv = frame_inverse(frame.E, g0);
  std::vector<Vec> thetas = sphere_lattice(n, directions);
  cg.points.resize(thetas.size() * cg.radial);

  parallel_for(thetas.size(), [&](size_t j) {
    const Vec& th = thetas[j];
    // Flat first guess: null chart vector with the requested spatial displacement.
    Vec u;
    double prev_rho = 0.0;
    for (int i = 1; i <= cg.radial; ++i) {
      GraphPoint& gp = cg.points[j * cg.radial + (i - 1)];
      gp.theta = th;
      gp.rho = radius * i / cg.radial;
      gp.xq = obs.p.tail(n) + gp.rho * th;
      if (u.size() == 0) {
        Vec v(N);
        v.tail(n) = gp.rho * th;
        const double h = std::sqrt(v.tail(n).dot(g0.bottomRightCorner(n, n) * v.tail(n)));
        v[0] = -h / spec.lapse(obs.p);
        u = std::sqrt(2.0) * Vec(Einv * v).tail(n);
      } else {
        u *= gp.rho / prev_rho;
      }
      prev_rho = gp.rho;
      bool converged = false;
      Vec x_end;
      for (int it = 0; it < 40; ++it) {
        const double nu = u.norm();
        Vec y(N);
        y[0] = -nu / std::sqrt(2.0);
        y.tail(n) = u / std::sqrt(2.0);
        Ray ray = jacobian_ray(spec, frame, y, Mat::Identity(N, N), 1.0, IntegratorOptions{});
        if (ray.termination() != Termination::reached_smax) break;
        RayState st = ray.node(ray.size() - 1);
        Vec d = spec.domain().displacement(obs.p, st.x);
        Vec R = d.tail(n) - gp.rho * th;
        x_end = st.x;
        if (R.norm() < 1e-12 * std::max(1.0, radius)) {
          converged = true;
          break;
        }
        Mat D = st.E * st.A;  // d x / d y
        Mat dy = Mat::Zero(N, n);
        for (int k = 0; k < n; ++k) {
          dy(0, k) = -u[k] / (nu * std::sqrt(2.0));
          dy(k + 1, k) = 1.0 / std::sqrt(2.0);
        }
        Mat Jr = (D * dy).bottomRows(n);
        Vec step = Jr.partialPivLu().solve(R);
        if (!step.allFinite()) break;
        u -= step;
      }
      if (!converged) {
        u.resize(0);
        continue;
      }
      gp.ok = true;
      gp.height = x_end[0];
      gp.F = obs.p[0] - x_end[0];
      gp.in_annulus = gp.rho >= c1 * gp.F * (1.0 - 1e-9) - 1e-12 && gp.rho <= C1 * gp.F * (1.0 + 1e-9) + 1e-12;
    }
  });

  for (size_t j = 0; j < thetas.size(); ++j) {
    double rho_prev = 0.0, F_prev = 0.0;
    bool chain = true;
    for (int i = 0; i < cg.radial; ++i) {
      const GraphPoint& gp = cg.points[j * cg.radial + i];
      if (!gp.ok) {
        ++cg.excluded;
        chain = false;
        continue;
      }
      if (!gp.in_annulus) ++cg.annulus_violations;
      if (chain && gp.F != F_prev) cg.lipschitz = std::max(cg.lipschitz, std::abs(gp.rho - rho_prev) / std::abs(gp.F - F_prev));
      rho_prev = gp.rho;
      F_prev = gp.F;
      chain = true;
    }
  }
  return cg;
}

// ================================================================ null injectivity

RadiusReport null_injectivity_radius(const MetricSpec& spec, const Observer& obs, double r_max,
                                     const RadiusOptions& opt) {
  if (!(r_max > 0.0)) throw SpecError("r_max must be positive");
  RadiusReport rep;
  rep.null_variant = true;
  rep.r_max = r_max;
  Diagnostics& d = rep.diagnostics;
  ConjugateSearch nc = null_conjugate_radius(spec, obs, r_max, opt.conjugate);
  rep.conj_radius = nc.min_s;
  rep.defined_radius = nc.searched;
  d.add("null_conjugate.directions", static_cast<double>(nc.rows.size()));
  d.add("null_conjugate.incomplete_rays", static_cast<double>(nc.failures));
  double est = std::min(r_max, rep.defined_radius);
  if (rep.conj_radius) est = std::min(est, *rep.conj_radius);
  if (opt.loop_search) {
    try {
      LoopSearch ls = detect_null_loops(spec, obs, std::min(r_max, rep.defined_radius), opt.loops);
      rep.shortest_loop = ls.shortest;
      d.add("null_loops.grid_points", static_cast<double>(ls.grid_points));
      d.add("null_loops.cell", ls.cell);
      d.add("null_loops.candidates", static_cast<double>(ls.candidates));
      d.add("null_loops.refined", static_cast<double>(ls.refined));
      d.add("null_loops.diverged", static_cast<double>(ls.diverged));
    } catch (const Error& e) {
      d.add("null_loops.error", e.what());
    }
  }
  if (rep.shortest_loop) est = std::min(est, 0.5 * *rep.shortest_loop);
  rep.inj_estimate = est;

  // chart radius is a coordinate distance; sqrt(min eig gT) converts it to gT length at p
  const Mat gT = reference_metric(spec.metric(obs.p), obs.T);
  const double gT_min = Eigen::SelfAdjointEigenSolver<Mat>(gT).eigenvalues().minCoeff();
  double r0 = std::min({r_max, rep.defined_radius, spec.domain().chart_radius(obs.p) * std::sqrt(gT_min)});
  if (rep.conj_radius) r0 = std::min(r0, *rep.conj_radius);
  d.add("null_bound.r0", r0);
  if (spec.foliated() && r0 > 0.0) {
    try {
      ConeBounds b = measure_cone_bounds(spec, obs.p, std::min(r0, obs.p[0] - spec.domain().lo[0]), r0, 5);
      rep.thm_null_bound = std::pow(b.c1, 6) * r0;
      d.add("null_bound.c1", b.c1);
      d.add("null_bound.C1", b.C1);
    } catch (const Error& e) {
      d.add("null_bound.error", e.what());
    }
  }
  if (rep.thm_null_bound && *rep.thm_null_bound > est + 1e-12 * std::max(1.0, est)) ++rep.bound_violations;
  d.add("bound_violations", static_cast<double>(rep.bound_violations));
  return rep;
}

// ================================================================ volumes

std::vector<WeightedDirection> cone_directions(const ConeSpec& cone, int N) {
  if (!cone.directions.empty()) return cone.directions;
  if (!(cone.half_angle > 0.0) || cone.half_angle > kPi / 4 + 1e-15)
    throw SpecError("cone half-angle must lie in (0, pi/4]");
  std::vector<WeightedDirection> dirs = cap_quadrature(N, cone.half_angle, cone.n_azimuth, cone.panels);
  if (cone.orientation == Orientation::past)
    for (auto& d : dirs) d.dir[0] = -d.dir[0];
  return dirs;
}

double solid_angle(const std::vector<WeightedDirection>& dirs) {
  double s = 0.0;
  for (const auto& d : dirs) s += d.weight;
  return s;
}

VolumeProfile volume_profile(const MetricSpec& spec, const OrthoFrame& frame,
                             const std::vector<WeightedDirection>& dirs, const std::vector<double>& radii,
                             const VolumeOptions& opt) {
  if (radii.empty()) throw SpecError("no radii requested");
  for (size_t k = 0; k < radii.size(); ++k)
    if (!(radii[k] > 0.0) || (k > 0 && !(radii[k] > radii[k - 1])))
      throw SpecError("radii must be positive and strictly increasing");
  const int N = spec.dim(), n = N - 1;
  const Mat I = Mat::Identity(N, N);
  const double R = radii.back();
  VolumeProfile prof;
  prof.radii = radii;
  prof.volume.assign(radii.size(), 0.0);
  prof.solid_angle = solid_angle(dirs);
  prof.rays = static_cast<int>(dirs.size());

  struct RayOut {
    std::vector<double> vol;
    bool chart = false, conj = false, failed = false;
    int ricci = 0, ricci_bad = 0;
  };
  std::vector<RayOut> outs(dirs.size());
  parallel_for(dirs.size(), [&](size_t i) {
    RayOut& o = outs[i];
    o.vol.assign(radii.size(), 0.0);
    Ray ray = jacobian_ray(spec, frame, dirs[i].dir, I, R, opt.integrator, true, radii);
    double cut = ray.s_end();
    if (ray.termination() == Termination::left_chart) o.chart = true;
    if (ray.termination() == Termination::step_failure) o.failed = true;
    if (opt.truncate_conjugate) {
      if (auto sz = first_phi_zero(ray, I, 1e-7, 1e-10)) {
        if (*sz < cut) {
          cut = *sz;
          o.conj = true;
          o.chart = o.failed = false;
        }
      }
    }
    const double vol_cut = cut == ray.s_end() ? ray.node(ray.size() - 1).volume : ray.at(cut).volume;
    size_t node = 0;
    for (size_t k = 0; k < radii.size(); ++k) {
      if (radii[k] > cut) {
        o.vol[k] = vol_cut;
        continue;
      }
      while (node < ray.size() && ray.traj.s[node] < radii[k]) ++node;
      RayState st = ray.node(node);
      o.vol[k] = st.volume;
      if (opt.ricci_check) {
        RiemannAt Rm = riemann_at(spec, st.x);
        const double ric = st.v.dot(Rm.ricci * st.v);
        const double gvv = st.v.dot(spec.metric(st.x) * st.v);
        ++o.ricci;
        if (ric < -n * opt.K2 * std::abs(gvv) - 1e-9 * std::max(1.0, std::abs(ric))) ++o.ricci_bad;
      }
    }
  });
  double reached = 0.0;
  for (size_t i = 0; i < dirs.size(); ++i) {
    const RayOut& o = outs[i];
    for (size_t k = 0; k < radii.size(); ++k) prof.volume[k] += dirs[i].weight * o.vol[k];
    prof.chart_truncated += o.chart;
    prof.conjugate_truncated += o.conj;
    prof.failed += o.failed;
    prof.ricci_samples += o.ricci;
    prof.ricci_violations += o.ricci_bad;
    if (!o.chart && !o.failed) reached += dirs[i].weight;
  }
  prof.coverage = prof.solid_angle > 0.0 ? reached / prof.solid_angle : 0.0;
  return prof;
}

double future_cone_volume(const MetricSpec& spec, const Observer& obs, const ConeSpec& cone, double r,
                          const VolumeOptions& opt, VolumeProfile* details) {
  auto dirs = cone_directions(cone, spec.dim());
  VolumeProfile prof = volume_profile(spec, complete_frame(spec, obs), dirs, {r}, opt);
  if (details) *details = prof;
  return prof.volume[0];
}

double model_volume(double K2, double r, int n, double solid) {
  if (K2 < 0.0) throw SpecError("model curvature K2 must be nonnegative");
  if (!(r >= 0.0)) throw SpecError("radius must be nonnegative");
  if (K2 == 0.0 || r == 0.0) return solid * std::pow(r, n + 1) / (n + 1);
  const double k = std::sqrt(K2);
  auto f = [k, n](double s) { return std::pow(std::sinh(k * s) / k, n); };
  double err = 0.0;
  const double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, r, 15, 1e-15, &err);
  return solid * I;
}

std::string VolumeCurve::csv() const {
  std::ostringstream os;
  os << "r,vol_FC,vol_K2,ratio\n";
  for (size_t k = 0; k < radii.size(); ++k)
    os << format_number(radii[k]) << "," << format_number(volume[k]) << "," << format_number(model[k]) << ","
       << format_number(ratio[k]) << "\n";
  return os.str();
}

VolumeCurve comparison_ratio_curve(const MetricSpec& spec, const Observer& obs, const ConeSpec& cone,
                                   const std::vector<double>& radii, double K2, double tolerance,
                                   const VolumeOptions& opt) {
  const int N = spec.dim();
  VolumeOptions vo = opt;
  vo.ricci_check = true;
  vo.K2 = K2;
  auto dirs = cone_directions(cone, N);
  VolumeCurve vc;
  vc.K2 = K2;
  vc.tolerance = tolerance;
  vc.radii = radii;
  vc.profile = volume_profile(spec, complete_frame(spec, obs), dirs, radii, vo);
  vc.volume = vc.profile.volume;
  for (size_t k = 0; k < radii.size(); ++k) {
    vc.model.push_back(model_volume(K2, radii[k], N - 1, vc.profile.solid_angle));
    vc.ratio.push_back(vc.volume[k] / vc.model[k]);
    if (k > 0 && vc.ratio[k] > vc.ratio[k - 1] * (1.0 + tolerance)) ++vc.violations;
  }
  return vc;
}

CorollaryBound corollary_volume_bound(const MetricSpec& spec, const Observer& obs, const ConeSpec& cone, double r0,
                                      double v0, double c_sigma, double c_n) {
  if (!(r0 > 0.0)) throw SpecError("r0 must be positive");
  const int N = spec.dim();
  CorollaryBound cb;
  auto dirs = cone_directions(cone, N);
  double widest = cone.half_angle;
  if (!cone.directions.empty()) {
    widest = 0.0;
    for (const auto& d : dirs) widest = std::max(widest, std::acos(std::min(1.0, std::abs(d.dir[0]) / d.dir.norm())));
  }
  cb.gap = std::max(0.0, kPi / 4 - widest);
  cb.c_sigma = c_sigma >= 0.0 ? c_sigma : c_n * cb.gap / (kPi / 4);
  ConeSpec explicit_cone = cone;
  explicit_cone.directions = dirs;
  cb.volume = future_cone_volume(spec, obs, explicit_cone, r0);
  cb.vacuous = cb.volume < v0;
  cb.bound = cb.vacuous ? 0.0 : cb.c_sigma * v0 / std::pow(r0, N) * r0;
  return cb;
}

}  // namespace lorentz
