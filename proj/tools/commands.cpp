#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "lorentz/expr.hpp"
#include "lorentz/parallel.hpp"

namespace lorentz::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v) { return expr::format_number(v); }

std::string join(const Vec& v, char sep = ' ') {
  std::string s;
  for (int i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + num(v[i]);
  return s;
}

std::string to_plotdata(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    for (char& c : line)
      if (c == ',') c = ' ';
    out << (first ? "# " : "") << line << "\n";
    first = false;
  }
  return out.str();
}

Vec to_vec(const std::vector<double>& v) {
  Vec x(static_cast<int>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) x[static_cast<int>(i)] = v[i];
  return x;
}

std::string bool_text(bool b) { return b ? "yes" : "no"; }

}  // namespace

void ReportBundle::add_table(const std::string& stem, const std::string& csv) { tables_.emplace_back(stem, csv); }

void ReportBundle::set_summary(const std::string& header, const std::string& row) {
  summary_header_ = header;
  summary_row_ = row;
}

std::vector<std::string> ReportBundle::write(const std::string& spec_name) const {
  fs::create_directories(cfg_.out);
  const bool plot = cfg_.format == "plotdata";
  const std::string ext = plot ? ".dat" : ".csv";
  std::vector<std::string> files;
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream f(fs::path(cfg_.out) / name, std::ios::binary);
    if (!f) throw Error("cannot write '" + (fs::path(cfg_.out) / name).string() + "'");
    f << text;
    files.push_back(name);
  };
  for (const auto& [stem, csv] : tables_) put(stem + ext, plot ? to_plotdata(csv) : csv);
  std::string summary = "command,spec," + summary_header_ + "\n" + cfg_.command + "," + spec_name + "," + summary_row_ + "\n";
  put("summary.csv", summary);

  std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  std::ostringstream rep;
  rep << "lorentz " << cfg_.command << "\n";
  rep << "generated " << stamp << "\n";
  rep << "spec      " << (cfg_.spec_path.empty() ? std::string("(none)") : cfg_.spec_path) << " (" << spec_name << ")\n";
  rep << "seed      " << cfg_.seed << "\n";
  rep << "threads   " << thread_count() << "\n\n";
  rep << report_;
  put("report.txt", rep.str());

  files.push_back("manifest.txt");
  std::string manifest;
  for (const auto& f : files) {
    if (f != "manifest.txt" && !fs::exists(fs::path(cfg_.out) / f)) throw Error("missing output file " + f);
    manifest += f + "\n";
  }
  std::ofstream m(fs::path(cfg_.out) / "manifest.txt", std::ios::binary);
  m << manifest;
  return files;
}

MetricSpec load_spec(const RunConfig& cfg) {
  if (cfg.spec_path.empty()) throw SpecError("--spec is required");
  const std::string prefix = "builtin:";
  if (cfg.spec_path.rfind(prefix, 0) != 0) return load_metric_spec(cfg.spec_path);
  // builtin:NAME or builtin:NAME:key=value,key=value (dim and a are recognised keys)
  std::string rest = cfg.spec_path.substr(prefix.size());
  std::string name = rest.substr(0, rest.find(':'));
  std::map<std::string, double> params;
  int dim = 4;
  std::string a_expr;
  if (rest.find(':') != std::string::npos) {
    std::stringstream ss(rest.substr(rest.find(':') + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto eq = item.find('=');
      if (eq == std::string::npos) throw SpecError("builtin parameter '" + item + "' is not key=value");
      std::string key = item.substr(0, eq), value = item.substr(eq + 1);
      if (key == "a") {
        a_expr = value;
        continue;
      }
      double v;
      try {
        v = std::stod(value);
      } catch (const std::exception&) {
        throw SpecError("builtin parameter '" + key + "' is not a number");
      }
      if (key == "dim")
        dim = static_cast<int>(v);
      else
        params[key] = v;
    }
  }
  return builtin::make(name, params, dim, a_expr);
}

Observer observer(const MetricSpec& spec, const RunConfig& cfg) {
  const int N = spec.dim();
  Vec p;
  if (!cfg.point.empty()) {
    if (static_cast<int>(cfg.point.size()) != N)
      throw SpecError("--point needs " + std::to_string(N) + " coordinates");
    p = to_vec(cfg.point);
    if (!spec.domain().contains(p)) throw SpecError("--point lies outside the chart");
  } else {
    p = Vec::Zero(N);
    if (!spec.domain().contains(p)) {
      auto probes = probe_points(spec.domain());
      if (probes.empty()) throw SpecError("no default point inside the chart; pass --point");
      p = probes.front();
    }
  }
  if (cfg.T.empty()) return foliation_observer(spec, p);
  if (static_cast<int>(cfg.T.size()) != N) throw SpecError("--T needs " + std::to_string(N) + " components");
  return make_observer(spec, p, to_vec(cfg.T));
}

IntegratorOptions integrator(const RunConfig& cfg) {
  IntegratorOptions o;
  o.tol = cfg.tol;
  return o;
}

int cmd_describe(const RunConfig& cfg) {
  MetricSpec spec = load_spec(cfg);
  const int N = spec.dim();
  std::vector<Vec> points;
  if (!cfg.point.empty())
    points.push_back(observer(spec, cfg).p);
  else
    points = probe_points(spec.domain());
  ReportBundle out(cfg);
  std::ostringstream tab, pts;
  tab << "point,quantity,index,value,fd_value\n";
  pts << "point,x,lapse,riem_norm_T,symmetry_residual\n";
  double max_dgamma = 0.0, max_driem = 0.0, max_sym = 0.0;
  for (size_t k = 0; k < points.size(); ++k) {
    const Vec& x = points[k];
    MetricAt m = metric_at(spec, x);
    ChristoffelAt G = christoffel_at(spec, x), Gf = christoffel_fd(spec, x);
    RiemannAt R = riemann_at(spec, x), Rf = riemann_fd(spec, x);
    for (int a = 0; a < N; ++a)
      for (int b = a; b < N; ++b)
        tab << k << ",g," << a << b << "," << num(m.g(a, b)) << "," << num(m.g(a, b)) << "\n";
    for (int c = 0; c < N; ++c)
      for (int a = 0; a < N; ++a)
        for (int b = a; b < N; ++b) {
          tab << k << ",Gamma," << c << a << b << "," << num(G.gamma(c, a, b)) << "," << num(Gf.gamma(c, a, b)) << "\n";
          max_dgamma = std::max(max_dgamma, std::abs(G.gamma(c, a, b) - Gf.gamma(c, a, b)) /
                                                 std::max(1.0, std::abs(G.gamma(c, a, b))));
        }
    for (int a = 0; a < N; ++a)
      for (int b = a + 1; b < N; ++b)
        for (int c = 0; c < N; ++c)
          for (int d = c + 1; d < N; ++d) {
            if (a * N + b > c * N + d) continue;
            tab << k << ",R," << a << b << c << d << "," << num(R.riem(a, b, c, d)) << "," << num(Rf.riem(a, b, c, d))
                << "\n";
            max_driem = std::max(max_driem, std::abs(R.riem(a, b, c, d) - Rf.riem(a, b, c, d)) /
                                               std::max(1.0, std::abs(R.riem(a, b, c, d))));
          }
    const double sym = riemann_symmetry_residual(R);
    max_sym = std::max(max_sym, sym);
    // 1/sqrt(-g^00) is the lapse of the t slices for general specs too
    const double lapse = 1.0 / std::sqrt(-Mat(m.g.inverse())(0, 0));
    pts << k << "," << join(x, ';') << "," << num(lapse) << "," << num(riemann_norm_T(spec, x)) << ","
        << num(sym) << "\n";
  }
  out.add_table("describe", tab.str());
  out.add_table("points", pts.str());
  out.set_summary("dim,points,max_gamma_fd_rel_diff,max_riemann_fd_rel_diff,max_symmetry_residual",
                  std::to_string(N) + "," + std::to_string(points.size()) + "," + num(max_dgamma) + "," +
                      num(max_driem) + "," + num(max_sym));
  out.report("model             " + spec.name());
  out.report("dimension         " + std::to_string(N));
  out.report("probe points      " + std::to_string(points.size()));
  out.report("Gamma vs fd (rel) " + num(max_dgamma));
  out.report("R vs fd (rel)     " + num(max_driem));
  out.report("symmetry residual " + num(max_sym));
  out.report("");
  out.report(spec.to_document());
  out.write(spec.name());
  std::cout << "describe: " << points.size() << " points, R vs fd relative difference " << num(max_driem) << "\n";
  return kOk;
}

int cmd_geodesic(const RunConfig& cfg) {
  MetricSpec spec = load_spec(cfg);
  const int N = spec.dim();
  Observer obs = observer(spec, cfg);
  OrthoFrame fr = complete_frame(spec, obs);
  Vec w = cfg.direction.empty() ? Vec(Vec::Unit(N, 0)) : to_vec(cfg.direction);
  if (w.size() != N) throw SpecError("--direction needs " + std::to_string(N) + " frame components");
  if (!(cfg.smax > 0.0)) throw SpecError("--smax must be positive");
  GeodesicSolution geo = integrate_geodesic(spec, obs.p, fr.E * w, cfg.smax, cfg.tol);
  TransportedFrame tf = transport_frame(spec, geo, fr.E);
  const double gvv0 = geo.v0.dot(spec.metric(obs.p) * geo.v0);
  std::ostringstream tab;
  tab << "s";
  for (int a = 0; a < N; ++a) tab << ",x" << a;
  for (int a = 0; a < N; ++a) tab << ",v" << a;
  tab << ",g(v;v),norm_drift,eta_residual\n";
  double drift = 0.0, eta = 0.0;
  for (size_t i = 0; i < geo.samples.size(); ++i) {
    const auto& smp = geo.samples[i];
    Mat g = spec.metric(smp.x);
    const double gvv = smp.v.dot(g * smp.v);
    const double e = eta_residual(tf.E[i], g);
    drift = std::max(drift, std::abs(gvv - gvv0));
    eta = std::max(eta, e);
    tab << num(smp.s) << "," << join(smp.x, ',') << "," << join(smp.v, ',') << "," << num(gvv) << ","
        << num(gvv - gvv0) << "," << num(e) << "\n";
  }
  ReportBundle out(cfg);
  out.add_table("geodesic", tab.str());
  const double s_end = geo.samples.back().s;
  out.set_summary("samples,s_end,termination,max_norm_drift,max_eta_residual",
                  std::to_string(geo.samples.size()) + "," + num(s_end) + "," + to_string(geo.termination) + "," +
                      num(drift) + "," + num(eta));
  out.report("start point       " + join(obs.p));
  out.report("direction (frame) " + join(w));
  out.report("g(v, v)           " + num(gvv0));
  out.report("samples           " + std::to_string(geo.samples.size()));
  out.report("parameter reached " + num(s_end) + " of " + num(cfg.smax));
  out.report("termination       " + to_string(geo.termination));
  out.report("max norm drift    " + num(drift));
  out.report("max eta residual  " + num(eta));
  out.write(spec.name());
  std::cout << "geodesic: s_end = " << num(s_end) << " (" << to_string(geo.termination) << "), drift " << num(drift)
            << "\n";
  return geo.termination == Termination::step_failure ? kAnalysisFailure : kOk;
}

int cmd_radius(const RunConfig& cfg) {
  MetricSpec spec = load_spec(cfg);
  Observer obs = observer(spec, cfg);
  const double rmax = cfg.rmax > 0.0 ? cfg.rmax : 5.0;
  RadiusOptions opt;
  opt.conjugate.n_dirs = cfg.dirs;
  opt.conjugate.integrator = integrator(cfg);
  opt.loops.grid_density = cfg.grid;
  opt.loops.integrator = integrator(cfg);
  opt.eps = cfg.eps;
  opt.r0 = cfg.r0;
  RadiusReport rep = injectivity_radius(spec, obs, rmax, opt);
  ReportBundle out(cfg);
  out.add_table("radius", csv_header(rep) + "\n" + csv_row(rep, spec.name()) + "\n");
  std::string h = csv_header(rep), r = csv_row(rep, spec.name());
  out.set_summary(h.substr(h.find(',') + 1), r.substr(r.find(',') + 1));
  out.report("observer p        " + join(obs.p));
  out.report("observer T        " + join(obs.T));
  out.report(report_text(rep));
  out.write(spec.name());
  std::cout << "radius: inj estimate " << num(rep.inj_estimate) << ", bound violations " << rep.bound_violations
            << "\n";
  return rep.bound_violations > 0 ? kAnalysisFailure : kOk;
}

int cmd_nullcone(const RunConfig& cfg) {
  MetricSpec spec = load_spec(cfg);
  Observer obs = observer(spec, cfg);
  const double rmax = cfg.rmax > 0.0 ? cfg.rmax : 5.0;
  Localization loc = localize_null_cone(spec, obs, cfg.t_range, cfg.dirs, cfg.graph_levels);
  ConeGraph graph = cone_graph(spec, obs, cfg.graph_radius, cfg.graph_dirs, cfg.graph_levels);
  RadiusOptions opt;
  opt.conjugate.n_dirs = cfg.dirs;
  opt.conjugate.integrator = integrator(cfg);
  opt.loops.grid_density = cfg.grid;
  opt.loops.integrator = integrator(cfg);
  RadiusReport rep = null_injectivity_radius(spec, obs, rmax, opt);

  std::ostringstream lt;
  const int N = spec.dim();
  for (int a = 0; a < N; ++a) lt << (a ? "," : "") << "w" << a;
  lt << ",dt,rho,inside\n";
  for (const auto& h : loc.hits) lt << join(h.direction, ',') << "," << num(h.dt) << "," << num(h.rho) << "," << h.inside << "\n";
  ReportBundle out(cfg);
  out.add_table("localization", lt.str());
  out.add_table("graph", graph.csv());
  out.add_table("null_radius", csv_header(rep) + "\n" + csv_row(rep, spec.name()) + "\n");
  out.set_summary("c1,C1,localization_violations,incomplete_rays,lipschitz,annulus_violations,null_inj_estimate,"
                  "null_bound,bound_violations",
                  num(loc.bounds.c1) + "," + num(loc.bounds.C1) + "," + std::to_string(loc.violations) + "," +
                      std::to_string(loc.incomplete) + "," + num(graph.lipschitz) + "," +
                      std::to_string(graph.annulus_violations) + "," + num(rep.inj_estimate) + "," +
                      (rep.thm_null_bound ? num(*rep.thm_null_bound) : std::string("")) + "," +
                      std::to_string(rep.bound_violations));
  out.report("light-speed bounds c1 = " + num(loc.bounds.c1) + ", C1 = " + num(loc.bounds.C1));
  out.report("display constants  C0 = " + num(loc.bounds.C0_display) + ", C1 = " + num(loc.bounds.C1_display));
  out.report("localization       " + std::to_string(loc.rays) + " rays, " + std::to_string(loc.hits.size()) +
             " slice hits, " + std::to_string(loc.violations) + " outside [c1 dt, C1 dt], " +
             std::to_string(loc.incomplete) + " incomplete");
  out.report("graph              Lipschitz " + num(graph.lipschitz) + ", excluded " + std::to_string(graph.excluded) +
             ", annulus violations " + std::to_string(graph.annulus_violations));
  out.report("");
  out.report(report_text(rep));
  out.write(spec.name());
  std::cout << "nullcone: Lipschitz " << num(graph.lipschitz) << ", null inj estimate " << num(rep.inj_estimate)
            << "\n";
  const bool bad = loc.violations > 0 || graph.annulus_violations > 0 || rep.bound_violations > 0;
  return bad ? kAnalysisFailure : kOk;
}

namespace {

// Sharp Ricci lower bound at p over the cone directions: max(0, -Ric(V,V) / (n |g(V,V)|)).
double matched_K2(const MetricSpec& spec, const Observer& obs, const std::vector<WeightedDirection>& dirs) {
  OrthoFrame fr = complete_frame(spec, obs);
  RiemannAt R = riemann_at(spec, obs.p);
  Mat g = spec.metric(obs.p);
  const int n = spec.spatial_dim();
  double K2 = 0.0;
  for (const auto& d : dirs) {
    Vec V = fr.E * d.dir;
    const double gvv = std::abs(V.dot(g * V));
    if (gvv > 0.0) K2 = std::max(K2, -V.dot(R.ricci * V) / (n * gvv));
  }
  return K2;
}

std::vector<WeightedDirection> monte_carlo_cap(const ConeSpec& cone, int N, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double area = cap_area(N, cone.half_angle);
  std::vector<WeightedDirection> dirs;
  while (static_cast<int>(dirs.size()) < samples) {
    Vec w(N);
    for (int a = 0; a < N; ++a) w[a] = normal(rng);
    w.normalize();
    if (w[0] < std::cos(cone.half_angle)) continue;
    if (cone.orientation == Orientation::past) w[0] = -w[0];
    dirs.push_back({w, area / samples});
  }
  return dirs;
}

}  // namespace

int cmd_volume(const RunConfig& cfg) {
  MetricSpec spec = load_spec(cfg);
  const int N = spec.dim();
  Observer obs = observer(spec, cfg);
  ConeSpec cone;
  if (cfg.orientation != "future" && cfg.orientation != "past") throw SpecError("--orientation must be future or past");
  cone.orientation = cfg.orientation == "past" ? Orientation::past : Orientation::future;
  cone.half_angle = cfg.half_angle;
  cone.n_azimuth = cfg.n_azimuth;
  cone.panels = cfg.panels;
  std::vector<double> radii = cfg.radii;
  if (radii.empty()) {
    const double rmax = cfg.rmax > 0.0 ? cfg.rmax : 1.0;
    if (cfg.count < 1) throw SpecError("--count must be positive");
    for (int k = 1; k <= cfg.count; ++k) radii.push_back(rmax * k / cfg.count);
  }
  auto dirs = cone_directions(cone, N);
  const double K2 = cfg.K2 >= 0.0 ? cfg.K2 : matched_K2(spec, obs, dirs);
  VolumeOptions vo;
  vo.integrator = integrator(cfg);
  VolumeCurve vc = comparison_ratio_curve(spec, obs, cone, radii, K2, 1e-6, vo);

  // Refinement: doubled azimuth lattice and polar panels at the largest radius.
  ConeSpec fine = cone;
  fine.n_azimuth *= 2;
  fine.panels *= 2;
  const double v_fine = future_cone_volume(spec, obs, fine, radii.back(), vo);
  const double refine_change = std::abs(v_fine - vc.volume.back()) / std::max(std::abs(v_fine), 1e-300);

  std::string csv = vc.csv();
  std::vector<double> mc;
  if (cfg.mc > 0) {
    VolumeProfile p = volume_profile(spec, complete_frame(spec, obs), monte_carlo_cap(cone, N, cfg.mc, cfg.seed),
                                     radii, vo);
    mc = p.volume;
    std::ostringstream os;
    os << "r [gT length],vol_FC,vol_K2,ratio,vol_FC_mc\n";
    for (size_t k = 0; k < radii.size(); ++k)
      os << num(vc.radii[k]) << "," << num(vc.volume[k]) << "," << num(vc.model[k]) << "," << num(vc.ratio[k]) << ","
         << num(mc[k]) << "\n";
    csv = os.str();
  }
  ReportBundle out(cfg);
  out.add_table("volume", csv);
  out.set_summary("K2,radii,solid_angle,coverage,ratio_first,ratio_last,violations,ricci_violations,refine_change",
                  num(K2) + "," + std::to_string(radii.size()) + "," + num(vc.profile.solid_angle) + "," +
                      num(vc.profile.coverage) + "," + num(vc.ratio.front()) + "," + num(vc.ratio.back()) + "," +
                      std::to_string(vc.violations) + "," + std::to_string(vc.profile.ricci_violations) + "," +
                      num(refine_change));
  out.report("cone              " + cfg.orientation + ", half-angle " + num(cone.half_angle) + ", " +
             std::to_string(dirs.size()) + " directions, solid angle " + num(vc.profile.solid_angle));
  out.report("model curvature   K2 = " + num(K2) + (cfg.K2 >= 0.0 ? "" : " (matched to Ric at p)"));
  out.report("coverage          " + num(vc.profile.coverage) + " (chart-truncated rays " +
             std::to_string(vc.profile.chart_truncated) + ", conjugate-truncated " +
             std::to_string(vc.profile.conjugate_truncated) + ")");
  out.report("Ricci hypothesis  " + std::to_string(vc.profile.ricci_violations) + " violations in " +
             std::to_string(vc.profile.ricci_samples) + " samples");
  out.report("ratio monotone    " + bool_text(vc.violations == 0) + " (" + std::to_string(vc.violations) +
             " increases above 1e-6)");
  out.report("refinement        relative change " + num(refine_change) + " at r = " + num(radii.back()));
  if (!mc.empty())
    out.report("Monte Carlo       " + std::to_string(cfg.mc) + " directions, seed " + std::to_string(cfg.seed) +
               ", volume at r_max " + num(mc.back()));
  out.write(spec.name());
  std::cout << "volume: ratio " << num(vc.ratio.front()) << " -> " << num(vc.ratio.back()) << ", violations "
            << vc.violations << "\n";
  return vc.violations > 0 ? kAnalysisFailure : kOk;
}

int cmd_verify(const RunConfig& cfg) {
  if (!cfg.inject_fault.empty()) {
    if (cfg.inject_fault != "curvature-sign") throw SpecError("unknown fault '" + cfg.inject_fault + "'");
    debug::set_flip_curvature_sign(true);
  }
  auto t0 = std::chrono::steady_clock::now();
  std::vector<InvariantResult> rows = run_invariant_suite();
  debug::set_flip_curvature_sign(false);
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream tab;
  tab << "invariant,value,tolerance,status\n";
  int failed = 0, gating = 0;
  ReportBundle out(cfg);
  for (const auto& r : rows) {
    const std::string status = !r.gating ? "info" : r.passed ? "pass" : "fail";
    if (r.gating) ++gating;
    if (r.gating && !r.passed) ++failed;
    tab << r.name << "," << num(r.value) << "," << num(r.tolerance) << "," << status << "\n";
    std::ostringstream line;
    line << std::left;
    line.width(36);
    line << r.name;
    line << status << "  " << r.detail << "  (" << num(std::round(r.seconds * 100) / 100) << " s)";
    out.report(line.str());
    if (r.gating && !r.passed) std::cout << "FAILED " << r.name << ": " << r.detail << "\n";
  }
  out.report("");
  out.report(std::to_string(gating - failed) + "/" + std::to_string(gating) + " invariants passed in " +
             num(std::round(total * 10) / 10) + " s" + (cfg.inject_fault.empty() ? "" : ", fault " + cfg.inject_fault));
  out.add_table("verify", tab.str());
  out.set_summary("invariants,failed,fault", std::to_string(gating) + "," + std::to_string(failed) + "," +
                                                 (cfg.inject_fault.empty() ? "none" : cfg.inject_fault));
  out.write("builtins");
  std::cout << "verify: " << gating - failed << "/" << gating << " passed\n";
  return failed > 0 ? kAnalysisFailure : kOk;
}

}  // namespace lorentz::cli
