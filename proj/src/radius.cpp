#include "lorentz/radius.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "lorentz/cone.hpp"
#include "lorentz/expr.hpp"
#include "lorentz/parallel.hpp"

namespace lorentz {

using DynMat = Eigen::MatrixXd;
using DynVec = Eigen::VectorXd;

void Diagnostics::add(const std::string& key, const std::string& value) { items.emplace_back(key, value); }
void Diagnostics::add(const std::string& key, double value) { items.emplace_back(key, expr::format_number(value)); }
std::string Diagnostics::get(const std::string& key) const {
  for (const auto& kv : items)
    if (kv.first == key) return kv.second;
  return "";
}

// ================================================================ loops

namespace {

// Maps search unknowns u to initial velocities y (frame components at p).
struct LoopParam {
  int N = 0;
  bool null = false;
  int m() const { return null ? N - 1 : N; }
  Vec y(const Vec& u) const {
    if (!null) return u;
    Vec out(N);
    out[0] = -u.norm();
    out.tail(N - 1) = u;
    return out / std::sqrt(2.0);
  }
  DynMat dy(const Vec& u) const {
    if (!null) return DynMat::Identity(N, N);
    DynMat D = DynMat::Zero(N, N - 1);
    const double nu = u.norm();
    for (int j = 0; j < N - 1; ++j) {
      D(0, j) = nu > 0.0 ? -u[j] / nu : 0.0;
      D(j + 1, j) = 1.0;
    }
    return D / std::sqrt(2.0);
  }
};

struct PointEval {
  bool ok = false;
  Vec x;
  DynMat D;  // N x m, d x / d u
};

struct LoopContext {
  const MetricSpec& spec;
  OrthoFrame frame;
  Mat Einv;  // gT-orthonormal components at p
  LoopParam param;
  IntegratorOptions opt;

  PointEval eval(const Vec& u, bool jac) const {
    PointEval pe;
    Vec y = param.y(u);
    if (!jac) {
      ExpResult e = exp_map(spec, frame, y, opt);
      pe.ok = e.ok;
      pe.x = e.x;
      return pe;
    }
    const int N = param.N;
    Ray ray = jacobian_ray(spec, frame, y, Mat::Identity(N, N), 1.0, opt);
    if (ray.termination() != Termination::reached_smax) return pe;
    RayState st = ray.node(ray.size() - 1);
    pe.ok = true;
    pe.x = st.x;
    DynMat EA = (st.E * st.A);
    pe.D = EA * param.dy(u);
    return pe;
  }
  // Residual exp(u1) - exp(u2) in gT-orthonormal components at p.
  Vec gap(const Vec& x1, const Vec& x2) const { return Einv * spec.domain().displacement(x2, x1); }
};

struct PairState {
  Vec u1, u2;
  PointEval e1, e2;
  Vec F;
  double fn = kInf;
  double length() const { return u1.norm() + u2.norm(); }
};

bool evaluate_pair(const LoopContext& ctx, PairState& s) {
  s.e1 = ctx.eval(s.u1, true);
  s.e2 = ctx.eval(s.u2, true);
  if (!s.e1.ok || !s.e2.ok) {
    s.fn = kInf;
    return false;
  }
  s.F = ctx.gap(s.e1.x, s.e2.x);
  s.fn = s.F.norm();
  return true;
}

DynMat pair_jacobian(const LoopContext& ctx, const PairState& s) {
  const int N = ctx.param.N, m = ctx.param.m();
  DynMat J(N, 2 * m);
  DynMat Ei = ctx.Einv;
  J.leftCols(m) = Ei * s.e1.D;
  J.rightCols(m) = -(Ei * s.e2.D);
  return J;
}

void split(const DynVec& U, int m, Vec& u1, Vec& u2) {
  u1 = U.head(m);
  u2 = U.tail(m);
}

// Damped minimum-norm Newton onto exp(u1) = exp(u2).
bool newton_pair(const LoopContext& ctx, PairState& s, double tol, int max_iter) {
  if (!std::isfinite(s.fn) && !evaluate_pair(ctx, s)) return false;
  const int m = ctx.param.m();
  for (int it = 0; it < max_iter; ++it) {
    if (s.fn < tol) return true;
    DynMat J = pair_jacobian(ctx, s);
    DynVec step = J.completeOrthogonalDecomposition().solve(DynVec(-s.F));
    if (!step.allFinite()) return false;
    DynVec U(2 * m);
    U << s.u1, s.u2;
    double lambda = 1.0;
    bool moved = false;
    for (int k = 0; k < 30; ++k, lambda *= 0.5) {
      PairState t;
      split(U + lambda * step, m, t.u1, t.u2);
      if (evaluate_pair(ctx, t) && t.fn < s.fn) {
        s = std::move(t);
        moved = true;
        break;
      }
    }
    if (!moved) return s.fn < tol;
  }
  return s.fn < tol;
}

struct RefineOutcome {
  bool converged = false;
  PairState state;
};

// Newton onto the meeting set, then projected-gradient descent of |u1| + |u2| along it.
RefineOutcome refine_pair(const LoopContext& ctx, const Vec& u1, const Vec& u2, double tol) {
  RefineOutcome out;
  PairState s;
  s.u1 = u1;
  s.u2 = u2;
  if (!newton_pair(ctx, s, tol, 40)) return out;
  const int m = ctx.param.m();
  double alpha = 0.25 * std::min(s.u1.norm(), s.u2.norm());
  const double alpha_min = 1e-12 * std::max(1.0, s.length());
  for (int it = 0; it < 400 && alpha > alpha_min; ++it) {
    const double n1 = s.u1.norm(), n2 = s.u2.norm();
    if (n1 == 0.0 || n2 == 0.0) break;
    DynVec g(2 * m);
    g << s.u1 / n1, s.u2 / n2;
    DynMat J = pair_jacobian(ctx, s);
    DynVec Pg = g - J.completeOrthogonalDecomposition().solve(DynVec(J * g));
    const double pn = Pg.norm();
    if (pn < 1e-9) break;
    DynVec U(2 * m);
    U << s.u1, s.u2;
    bool accepted = false;
    while (alpha > alpha_min) {
      PairState t;
      split(U - alpha * Pg, m, t.u1, t.u2);
      if (newton_pair(ctx, t, tol, 10) && t.length() < s.length() - 1e-4 * alpha * pn * pn) {
        s = std::move(t);
        accepted = true;
        alpha *= 2.0;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
  }
  out.converged = s.fn < tol;
  out.state = std::move(s);
  return out;
}

using CellKey = std::array<long, kMaxDim>;

LoopSearch run_loop_search(const MetricSpec& spec, const Observer& obs, double r, const LoopOptions& opt,
                           bool null) {
  const int N = spec.dim();
  LoopContext ctx{spec, complete_frame(spec, obs), Mat(), LoopParam{N, null}, opt.integrator};
  ctx.Einv = frame_inverse(ctx.frame.E, metric_at(spec, obs.p).g);
  const int m = ctx.param.m();
  const int k = std::max(opt.grid_density, 2);
  const double h = r / k;
  const double delta = h;

  LoopSearch res;
  res.radius = r;
  res.cell = delta;
  res.null_rays = null;

  // Lattice points of the ball of radius r in the unknowns.
  std::vector<Vec> lattice;
  std::vector<int> idx(m, -k);
  while (true) {
    Vec u(m);
    for (int a = 0; a < m; ++a) u[a] = h * idx[a];
    const double nu = u.norm();
    if (nu > 0.0 && nu <= r * (1.0 + 1e-12)) lattice.push_back(u);
    int a = 0;
    while (a < m && ++idx[a] > k) idx[a++] = -k;
    if (a == m) break;
  }
  res.grid_points = static_cast<int>(lattice.size());

  LoopContext scan = ctx;
  scan.opt = opt.scan;
  std::vector<Vec> images(lattice.size());
  std::vector<char> ok(lattice.size(), 0);
  parallel_for(lattice.size(), [&](size_t i) {
    PointEval pe = scan.eval(lattice[i], false);
    ok[i] = pe.ok;
    if (pe.ok) images[i] = pe.x;
  });

  // Spatial hash of gT-orthonormal image coordinates, with ghost copies across periodic faces.
  const ChartDomain& dom = spec.domain();
  Eigen::JacobiSVD<Mat> svd(ctx.frame.E);
  const double chart_margin = delta * svd.singularValues()[0];
  std::map<CellKey, std::vector<int>> cells;
  auto key_of = [&](const Vec& hcoord) {
    CellKey key{};
    for (int a = 0; a < N; ++a) key[a] = static_cast<long>(std::floor(hcoord[a] / delta));
    return key;
  };
  for (size_t i = 0; i < lattice.size(); ++i) {
    if (!ok[i]) {
      ++res.failed_points;
      continue;
    }
    Vec z = dom.displacement(obs.p, images[i]);
    std::vector<Vec> copies{z};
    for (int a = 1; a < N; ++a) {
      if (!dom.periodic(a)) continue;
      const double L = dom.period[a];
      const size_t count = copies.size();
      for (size_t c = 0; c < count; ++c) {
        if (copies[c][a] > 0.5 * L - chart_margin) {
          Vec g = copies[c];
          g[a] -= L;
          copies.push_back(g);
        } else if (copies[c][a] < -0.5 * L + chart_margin) {
          Vec g = copies[c];
          g[a] += L;
          copies.push_back(g);
        }
      }
    }
    for (const Vec& c : copies) cells[key_of(ctx.Einv * c)].push_back(static_cast<int>(i));
  }

  const double separation = 4.0 * delta * std::exp(opt.c2);
  std::set<std::pair<int, int>> pairs;
  int offsets = 1;
  for (int a = 0; a < N; ++a) offsets *= 3;
  for (const auto& [key, members] : cells) {
    for (int o = 0; o < offsets; ++o) {
      CellKey nk = key;
      int rem = o;
      for (int a = 0; a < N; ++a) {
        nk[a] += rem % 3 - 1;
        rem /= 3;
      }
      auto it = cells.find(nk);
      if (it == cells.end()) continue;
      for (int i : members)
        for (int j : it->second) {
          if (j <= i) continue;
          if ((ctx.param.y(lattice[i]) - ctx.param.y(lattice[j])).norm() <= separation) continue;
          if (ctx.gap(images[i], images[j]).norm() >= delta) continue;
          pairs.emplace(i, j);
        }
    }
  }
  res.candidates = static_cast<int>(pairs.size());

  std::vector<std::pair<double, std::pair<int, int>>> scored;
  for (const auto& pr : pairs)
    scored.push_back({lattice[pr.first].norm() + lattice[pr.second].norm(), pr});
  std::sort(scored.begin(), scored.end());

  std::vector<std::pair<Vec, Vec>> starts;
  for (const auto& sc : scored) {
    if (static_cast<int>(starts.size()) >= opt.refine) break;
    const Vec& a = lattice[sc.second.first];
    const Vec& b = lattice[sc.second.second];
    bool seen = false;
    for (const auto& st : starts) {
      if (((st.first - a).norm() < 2 * delta && (st.second - b).norm() < 2 * delta) ||
          ((st.first - b).norm() < 2 * delta && (st.second - a).norm() < 2 * delta))
        seen = true;
    }
    if (!seen) starts.emplace_back(a, b);
  }
  res.refined = static_cast<int>(starts.size());

  const double tol = opt.tol * std::max(1.0, r);
  std::vector<RefineOutcome> outcomes(starts.size());
  parallel_for(starts.size(), [&](size_t i) { outcomes[i] = refine_pair(ctx, starts[i].first, starts[i].second, tol); });
  for (const auto& oc : outcomes) {
    if (!oc.converged) {
      ++res.diverged;
      continue;
    }
    const PairState& s = oc.state;
    if ((ctx.param.y(s.u1) - ctx.param.y(s.u2)).norm() < delta) {
      ++res.collapsed;
      continue;
    }
    if (std::max(s.u1.norm(), s.u2.norm()) > r * (1.0 + 1e-9)) continue;
    LoopPair lp{s.u1, s.u2, s.length(), s.fn};
    res.confirmed.push_back(lp);
    if (!res.shortest || lp.length < *res.shortest) res.shortest = lp.length;
  }
  std::sort(res.confirmed.begin(), res.confirmed.end(),
            [](const LoopPair& a, const LoopPair& b) { return a.length < b.length; });
  return res;
}

}  // namespace

LoopSearch detect_short_loops(const MetricSpec& spec, const Observer& obs, double r, const LoopOptions& opt) {
  if (!(r > 0.0)) throw SpecError("loop search radius must be positive");
  return run_loop_search(spec, obs, r, opt, false);
}

LoopSearch detect_null_loops(const MetricSpec& spec, const Observer& obs, double r, const LoopOptions& opt) {
  if (!(r > 0.0)) throw SpecError("loop search radius must be positive");
  return run_loop_search(spec, obs, r, opt, true);
}

// ================================================================ theorem constants

double i1_surrogate(const AssumptionBounds& b, int spatial_dim, const BoundConstants& constants) {
  if (constants.i1 > 0.0) return constants.i1;
  const double vol_factor = std::min(1.0, b.v0 / unit_ball_volume(spatial_dim));
  const double curv_factor = b.K2 > 0.0 ? std::min(1.0, 1.0 / std::sqrt(b.K2)) : 1.0;
  return vol_factor * curv_factor * constants.kappa;
}

FoliatedBound theorem_foliated_bound(const AssumptionBounds& b, int spatial_dim, double eps,
                                     const BoundConstants& constants) {
  FoliatedBound fb;
  BoundConstants& c = fb.chain;
  c = constants;
  if (!(eps > 0.0)) {
    fb.failed_link = "eps";
    return fb;
  }
  c.i1 = i1_surrogate(b, spatial_dim, constants);
  if (!(c.i1 > 0.0)) {
    fb.failed_link = "i1";
    return fb;
  }
  c.K = std::exp(b.K0 + eps) * b.K1;
  c.i2 = c.K > 0.0 ? std::min(c.i1, std::exp(-eps) / (2.0 * c.K)) : c.i1;
  const double margin = std::exp(-eps) - c.K * c.i2;
  if (!(margin > 0.0)) {
    fb.failed_link = "i2";
    return fb;
  }
  c.c1 = std::max({eps, -std::log(margin), std::log(std::exp(eps) + c.K * c.i2)});
  c.c2 = std::max(c.c1, 2.0 * b.K0);

  const double K2 = b.K2, K3 = b.K3;
  c.r2 = c.i2 * std::exp(-c.c2) / 2.0;
  fb.r2_limit = "definition radius";
  auto cap = [&](double limit, const char* name) {
    if (limit < c.r2) {
      c.r2 = limit;
      fb.r2_limit = name;
    }
  };
  if (K3 > 0.0) cap(1.0 / (2.0 * K3 * std::exp(c.c2)), "geodesic norm");
  cap(1.0 / (2.0 + 2.0 * K3), "Jacobi growth");
  if (K2 > 0.0) {
    // (2 K2 / K3)(e^{4 K3 r2} - 1) <= 1/2, with the K3 -> 0 limit 8 K2 r2 <= 1/2.
    cap(K3 > 0.0 ? std::log1p(K3 / (4.0 * K2)) / (4.0 * K3) : 1.0 / (16.0 * K2), "Jacobi derivative");
  }
  // Keep delta = (8 K3 + 4 K2 F) F <= 1/8 with F = (2 + 2 K3) r2.
  {
    double Fmax;
    if (K2 > 0.0)
      Fmax = (-8.0 * K3 + std::sqrt(64.0 * K3 * K3 + 2.0 * K2)) / (8.0 * K2);
    else
      Fmax = K3 > 0.0 ? 1.0 / (64.0 * K3) : kInf;
    cap(Fmax / (2.0 + 2.0 * K3), "sandwich");
  }
  if (!(c.r2 > 0.0)) {
    fb.failed_link = "r2";
    return fb;
  }
  const double F = (2.0 + 2.0 * K3) * c.r2;
  const double delta = (8.0 * K3 + 4.0 * K2 * F) * F;
  if (!(delta < 0.25)) {
    fb.failed_link = "c3";
    return fb;
  }
  c.c3 = std::log(std::max(4.0 + delta, 1.0 / (0.25 - delta)));
  c.c4 = c.c3 + std::log(2.0);
  c.c5 = c.c4 + std::log(std::exp(c.c3) + K3 * (2.0 + 2.0 * K3) * (2.0 + 2.0 * K3) * c.r2);
  c.r3 = c.r2 * std::exp(-c.c2) / 4.0;
  fb.i0 = c.r3;
  fb.ok = fb.i0 > 0.0;
  if (!fb.ok) fb.failed_link = "r3";
  return fb;
}

MainBound theorem_main_bound(const MetricSpec& spec, const Observer& obs, double r0, const BoundConstants& constants,
                             const MainBoundOptions& opt) {
  if (!(r0 > 0.0)) throw SpecError("r0 must be positive");
  const int N = spec.dim();
  MainBound mb;
  mb.r0 = r0;
  mb.c_n = constants.c_n;
  OrthoFrame frame = complete_frame(spec, obs);
  std::vector<WeightedDirection> dirs = cap_quadrature(N, kPi, opt.n_azimuth, opt.panels);
  VolumeOptions vo;
  vo.integrator = opt.integrator;
  VolumeProfile prof = volume_profile(spec, frame, dirs, {mb.c_n * r0}, vo);
  mb.volume = prof.volume[0];
  mb.coverage = prof.coverage;
  mb.rays = prof.rays;
  mb.bound = mb.c_n * mb.volume / std::pow(r0, N) * r0;

  // Curvature hypothesis sup |Riem|_{T_gamma} <= 1/r0^2 along sample rays.
  std::vector<Vec> cdirs = sphere_lattice(N, opt.curvature_rays);
  std::vector<double> stops;
  for (int i = 0; i <= 8; ++i) stops.push_back(r0 * i / 8.0);
  std::vector<double> worst(cdirs.size(), 0.0);
  std::vector<int> count(cdirs.size(), 0), bad(cdirs.size(), 0);
  parallel_for(cdirs.size(), [&](size_t i) {
    RaySetup setup;
    setup.p = frame.p;
    setup.v = frame.E * cdirs[i];
    setup.E = frame.E;
    Ray ray = integrate_ray(spec, setup, r0, opt.integrator, stops);
    for (size_t k = 0; k < ray.size(); ++k) {
      if (std::find(stops.begin(), stops.end(), ray.traj.s[k]) == stops.end()) continue;
      RayState st = ray.node(k);
      RiemannAt R = riemann_at(spec, st.x);
      double nrm = tensor_norm_frame(Tensor::riemann(R.riem), st.E, frame_inverse(st.E, spec.metric(st.x)));
      worst[i] = std::max(worst[i], nrm);
      ++count[i];
      if (nrm * r0 * r0 > 1.0) ++bad[i];
    }
  });
  for (size_t i = 0; i < cdirs.size(); ++i) {
    mb.max_curvature = std::max(mb.max_curvature, worst[i]);
    mb.curvature_samples += count[i];
    mb.curvature_violations += bad[i];
  }
  return mb;
}

// ================================================================ injectivity radius

RadiusReport injectivity_radius(const MetricSpec& spec, const Observer& obs, double r_max, const RadiusOptions& opt) {
  if (!(r_max > 0.0)) throw SpecError("r_max must be positive");
  RadiusReport rep;
  rep.r_max = r_max;
  Diagnostics& d = rep.diagnostics;

  ConjugateSearch conj = conjugate_radius(spec, obs, r_max, opt.conjugate);
  rep.conj_radius = conj.min_s;
  rep.defined_radius = conj.searched;
  d.add("conjugate.directions", static_cast<double>(conj.rows.size()));
  d.add("conjugate.direction_set", to_string(opt.conjugate.directions));
  d.add("conjugate.zero_tol", opt.conjugate.zero_tol);
  d.add("conjugate.incomplete_rays", static_cast<double>(conj.failures));
  d.add("integrator.tol", opt.conjugate.integrator.tol);

  double est = std::min(r_max, rep.defined_radius);
  if (rep.conj_radius) est = std::min(est, *rep.conj_radius);
  if (opt.loop_search) {
    try {
      LoopSearch ls = detect_short_loops(spec, obs, std::min(r_max, rep.defined_radius), opt.loops);
      rep.shortest_loop = ls.shortest;
      d.add("loops.grid_density", static_cast<double>(opt.loops.grid_density));
      d.add("loops.grid_points", static_cast<double>(ls.grid_points));
      d.add("loops.cell", ls.cell);
      d.add("loops.failed_points", static_cast<double>(ls.failed_points));
      d.add("loops.candidates", static_cast<double>(ls.candidates));
      d.add("loops.refined", static_cast<double>(ls.refined));
      d.add("loops.diverged", static_cast<double>(ls.diverged));
      d.add("loops.collapsed", static_cast<double>(ls.collapsed));
      if (ls.diverged > 0 && !ls.shortest) d.add("loops.warning", "grid too coarse: confirmation solves diverged");
    } catch (const Error& e) {
      d.add("loops.error", e.what());
    }
  }
  if (rep.shortest_loop) est = std::min(est, 0.5 * *rep.shortest_loop);
  rep.inj_estimate = est;

  if (opt.foliated_bound && spec.foliated()) {
    try {
      AssumptionBounds b = measure_bounds(spec, obs.p, std::min(1.0, r_max));
      FoliatedBound fb = theorem_foliated_bound(b, spec.spatial_dim(), opt.eps, opt.constants);
      d.add("bounds.K0", b.K0);
      d.add("bounds.K1", b.K1);
      d.add("bounds.K2", b.K2);
      d.add("bounds.K3", b.K3);
      d.add("bounds.v0", b.v0);
      d.add("chain.i1", fb.chain.i1);
      d.add("chain.i2", fb.chain.i2);
      d.add("chain.c1", fb.chain.c1);
      d.add("chain.c2", fb.chain.c2);
      d.add("chain.c3", fb.chain.c3);
      d.add("chain.c4", fb.chain.c4);
      d.add("chain.c5", fb.chain.c5);
      d.add("chain.r2", fb.chain.r2);
      d.add("chain.r2_limit", fb.r2_limit);
      d.add("chain.r3", fb.chain.r3);
      if (fb.ok)
        rep.thm_foliated_bound = fb.i0;
      else
        d.add("chain.failed_link", fb.failed_link);
    } catch (const Error& e) {
      d.add("chain.error", e.what());
    }
  }

  if (opt.main_bound) {
    try {
      double r0 = opt.r0;
      if (!(r0 > 0.0)) {
        Mat g = metric_at(spec, obs.p).g;
        double K2p = tensor_norm_T(Tensor::riemann(riemann_at(spec, obs.p).riem), g, obs.T);
        r0 = K2p > 0.0 ? std::min(r_max, 1.0 / std::sqrt(K2p)) : r_max;
      }
      MainBound mb = theorem_main_bound(spec, obs, r0, opt.constants, opt.main);
      rep.thm_main_bound = mb.bound;
      d.add("main.c_n", mb.c_n);
      d.add("main.r0", mb.r0);
      d.add("main.volume", mb.volume);
      d.add("main.volume_convention", "exp-image with multiplicity, rays cut at first conjugate point");
      d.add("main.coverage", mb.coverage);
      d.add("main.curvature_max", mb.max_curvature);
      d.add("main.curvature_violations", static_cast<double>(mb.curvature_violations));
    } catch (const Error& e) {
      d.add("main.error", e.what());
    }
  }

  const double slack = 1e-12 * std::max(1.0, est);
  if (rep.thm_foliated_bound && *rep.thm_foliated_bound > est + slack) ++rep.bound_violations;
  if (rep.thm_main_bound && *rep.thm_main_bound > est + slack) ++rep.bound_violations;
  d.add("bound_violations", static_cast<double>(rep.bound_violations));
  return rep;
}

namespace {

std::string opt_text(const std::optional<double>& v) {
  return v ? expr::format_number(*v) : std::string("none");
}

}  // namespace

std::string report_text(const RadiusReport& r) {
  std::ostringstream os;
  os << (r.null_variant ? "null injectivity radius" : "injectivity radius") << "\n";
  os << "  r_max            " << expr::format_number(r.r_max) << "\n";
  os << "  defined radius   " << expr::format_number(r.defined_radius) << "\n";
  os << "  conjugate radius " << opt_text(r.conj_radius) << "\n";
  os << "  shortest loop    " << opt_text(r.shortest_loop) << "\n";
  os << "  inj estimate     " << expr::format_number(r.inj_estimate) << "\n";
  if (r.null_variant) {
    os << "  c1^6 r0 bound    " << opt_text(r.thm_null_bound) << "\n";
  } else {
    os << "  foliated bound   " << opt_text(r.thm_foliated_bound) << "\n";
    os << "  main bound       " << opt_text(r.thm_main_bound) << "\n";
  }
  os << "  bound <= estimate " << (r.bound_violations == 0 ? "yes" : "NO") << "\n";
  os << "diagnostics\n";
  for (const auto& kv : r.diagnostics.items) os << "  " << kv.first << " = " << kv.second << "\n";
  return os.str();
}

std::string csv_header(const RadiusReport&) {
  return "label,r_max,defined_radius,conj_radius,shortest_loop,inj_estimate,thm_foliated_bound,thm_main_bound,"
         "thm_null_bound,bound_violations";
}

std::string csv_row(const RadiusReport& r, const std::string& label) {
  std::ostringstream os;
  os << label << "," << expr::format_number(r.r_max) << "," << expr::format_number(r.defined_radius) << ","
     << opt_text(r.conj_radius) << "," << opt_text(r.shortest_loop) << "," << expr::format_number(r.inj_estimate)
     << "," << opt_text(r.thm_foliated_bound) << "," << opt_text(r.thm_main_bound) << ","
     << opt_text(r.thm_null_bound) << "," << r.bound_violations;
  return os.str();
}

// ================================================================ synchronous chart

BoundaryHit solve_boundary(const MetricSpec& spec, const OrthoFrame& frame_q, const Vec& x, const Vec& w_guess,
                           const IntegratorOptions& opt) {
  const int N = spec.dim();
  const ChartDomain& dom = spec.domain();
  BoundaryHit hit;
  Vec w = w_guess;
  if (w.size() != N) w = frame_inverse(frame_q.E, spec.metric(frame_q.p)) * dom.displacement(frame_q.p, x);
  const double tol = 1e-13 * std::max(1.0, x.lpNorm<Eigen::Infinity>());
  double prev = kInf;
  Vec prev_w = w, step = Vec::Zero(N);
  for (int it = 0; it < 60; ++it) {
    hit.iterations = it + 1;
    Ray ray = jacobian_ray(spec, frame_q, w, Mat::Identity(N, N), 1.0, opt);
    double fn = kInf;
    RayState st;
    if (ray.termination() == Termination::reached_smax) {
      st = ray.node(ray.size() - 1);
      fn = dom.displacement(x, st.x).norm();
    }
    if (!(fn < prev)) {
      // Backtrack along the previous Newton step.
      if (it == 0 || step.norm() < 1e-15 * std::max(1.0, w.norm())) return hit;
      step *= 0.5;
      w = prev_w - step;
      continue;
    }
    hit.w = w;
    hit.x = st.x;
    hit.V = st.v;
    hit.EA = st.E * st.A;
    hit.EB = st.E * st.B;
    hit.Einv = frame_inverse(st.E, spec.metric(st.x));
    if (fn < tol) {
      hit.ok = true;
      return hit;
    }
    prev = fn;
    prev_w = w;
    step = hit.EA.partialPivLu().solve(Vec(dom.displacement(x, st.x)));
    if (!step.allFinite()) return hit;
    w = w - step;
  }
  hit.ok = prev < 1e3 * tol;
  return hit;
}

ChartPoint chart_point(const MetricSpec& spec, const OrthoFrame& frame_q, const Vec& x, const Vec& w_guess,
                       const IntegratorOptions& opt) {
  ChartPoint cp;
  cp.x = x;
  BoundaryHit hit = solve_boundary(spec, frame_q, x, w_guess, opt);
  if (!hit.ok) return cp;
  Mat g = spec.metric(x);
  const Vec& V = hit.V;
  const double gvv = V.dot(g * V);
  if (!(gvv < 0.0)) return cp;
  cp.w = hit.w;
  cp.tau = std::sqrt(-gvv);
  Vec Vflat = g * V;
  cp.dtau = -Vflat / cp.tau;
  // grad V = E B (E A)^{-1}; Hess tau = -g grad V / tau - V_flat V_flat^T / tau^3.
  Mat gradV = hit.EB * hit.EA.inverse();
  Mat H = -(g * gradV) / cp.tau - Vflat * Vflat.transpose() / (cp.tau * cp.tau * cp.tau);
  cp.hess = 0.5 * (H + H.transpose());
  cp.gN = g + 2.0 * cp.dtau * cp.dtau.transpose();
  cp.residual = std::abs(cp.dtau.dot(g.inverse() * cp.dtau) + 1.0);
  cp.valid = true;
  return cp;
}

namespace {

double tau_at(const MetricSpec& spec, const OrthoFrame& fq, const Vec& x, const Vec& guess,
              const IntegratorOptions& opt, bool& ok) {
  BoundaryHit hit = solve_boundary(spec, fq, x, guess, opt);
  if (!hit.ok) {
    ok = false;
    return 0.0;
  }
  Mat g = spec.metric(x);
  double gvv = hit.V.dot(g * hit.V);
  if (!(gvv < 0.0)) {
    ok = false;
    return 0.0;
  }
  return std::sqrt(-gvv);
}

}  // namespace

SynchronousChart build_synchronous_chart(const MetricSpec& spec, const Observer& obs, double r0,
                                         const ChartOptions& opt) {
  if (!(r0 > 0.0)) throw SpecError("r0 must be positive");
  const int N = spec.dim();
  SynchronousChart ch;
  ch.p = obs.p;
  ch.r0 = r0;
  ch.per_axis = std::max(1, opt.per_axis);
  ch.half_width = opt.half_width > 0.0 ? opt.half_width : r0 / 8.0;

  OrthoFrame fp = complete_frame(spec, obs);
  RaySetup setup;
  setup.p = obs.p;
  setup.v = -obs.T;
  setup.E = fp.E;
  Ray back = integrate_ray(spec, setup, 0.5 * r0, opt.integrator);
  if (back.termination() != Termination::reached_smax)
    throw AnalysisError("past T-geodesic leaves the chart before r0/2");
  RayState st = back.node(back.size() - 1);
  ch.q = st.x;
  // The transported E_0 is -gamma', the future unit tangent at q.
  ch.frame_q = OrthoFrame{st.x, st.E};

  Vec w_p = Vec::Zero(N);
  w_p[0] = 0.5 * r0;
  ChartPoint center = chart_point(spec, ch.frame_q, obs.p, w_p, opt.integrator);
  if (!center.valid) throw AnalysisError("boundary solve from q to p failed");
  ch.tau_p = center.tau;
  BoundaryHit hp = solve_boundary(spec, ch.frame_q, obs.p, center.w, opt.integrator);
  Mat dw_dx = hp.EA.inverse();

  std::vector<Vec> grid;
  long total = 1;
  for (int a = 0; a < N; ++a) total *= ch.per_axis;
  for (long id = 0; id < total; ++id) {
    Vec x = obs.p;
    long rem = id;
    for (int a = 0; a < N; ++a) {
      int k = static_cast<int>(rem % ch.per_axis);
      rem /= ch.per_axis;
      if (ch.per_axis > 1) x[a] += ch.half_width * (2.0 * k / (ch.per_axis - 1) - 1.0);
    }
    grid.push_back(x);
  }
  ch.points.resize(grid.size());
  const double hfd = 1e-3 * r0;
  parallel_for(grid.size(), [&](size_t i) {
    const Vec& x = grid[i];
    Vec guess = center.w + dw_dx * spec.domain().displacement(obs.p, x);
    ChartPoint cp = chart_point(spec, ch.frame_q, x, guess, opt.integrator);
    if (cp.valid && opt.fd_residual) {
      Vec d(N);
      bool ok = true;
      for (int a = 0; a < N && ok; ++a) {
        double t[4];
        const double off[4] = {2.0, 1.0, -1.0, -2.0};
        for (int k = 0; k < 4; ++k) {
          Vec y = x;
          y[a] += off[k] * hfd;
          t[k] = tau_at(spec, ch.frame_q, y, cp.w + dw_dx.col(a) * off[k] * hfd, opt.integrator, ok);
        }
        d[a] = (-t[0] + 8.0 * t[1] - 8.0 * t[2] + t[3]) / (12.0 * hfd);
      }
      if (ok) {
        cp.dtau_fd = d;
        cp.residual = std::abs(d.dot(spec.metric(x).inverse() * d) + 1.0);
      } else {
        cp.valid = false;
      }
    }
    ch.points[i] = cp;
  });
  int good = 0;
  for (const auto& cp : ch.points) {
    if (!cp.valid) continue;
    ++ch.valid;
    ch.max_residual = std::max(ch.max_residual, cp.residual);
    if (cp.residual < 1e-6) ++good;
  }
  ch.residual_ok_fraction = ch.valid > 0 ? static_cast<double>(good) / ch.valid : 0.0;
  return ch;
}

// ================================================================ convexity

namespace {

// Christoffel symbols of gN = g + 2 dtau dtau at a chart point.
Array3 christoffel_N(const MetricSpec& spec, const ChartPoint& cp) {
  const int N = spec.dim();
  MetricJet jet;
  spec.jet(cp.x, false, jet);
  Mat ginv = jet.g.inverse();
  Array3 G;
  christoffel_from_jet(jet, ginv, G);
  // Coordinate derivatives of dtau: d_c dtau_a = Hess_ca + Gamma^e_ca dtau_e.
  Mat ddt(N, N);
  for (int c = 0; c < N; ++c)
    for (int a = 0; a < N; ++a) {
      double acc = cp.hess(c, a);
      for (int e = 0; e < N; ++e) acc += G(e, c, a) * cp.dtau[e];
      ddt(c, a) = acc;
    }
  MetricJet jn;
  jn.g = cp.gN;
  jn.dg = Array3(N);
  for (int m = 0; m < N; ++m)
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b)
        jn.dg(m, a, b) = jet.dg(m, a, b) + 2.0 * (ddt(m, a) * cp.dtau[b] + cp.dtau[a] * ddt(m, b));
  Array3 GN;
  christoffel_from_jet(jn, cp.gN.inverse(), GN);
  return GN;
}

// 2 - 2 x cot x, with its series near 0.
double cot_term(double x) {
  if (x < 1e-4) return (2.0 / 3.0) * x * x + (2.0 / 45.0) * x * x * x * x;
  return 2.0 - 2.0 * x / std::tan(x);
}

}  // namespace

std::string ConvexityReport::table_csv() const {
  std::ostringstream os;
  const int N = rows.empty() ? 0 : static_cast<int>(rows.front().z.size());
  for (int a = 0; a < N; ++a) os << "z" << a << ",";
  os << "min_eig,max_eig\n";
  for (const auto& r : rows) {
    for (int a = 0; a < N; ++a) os << expr::format_number(r.z[a]) << ",";
    os << expr::format_number(r.min_eig) << "," << expr::format_number(r.max_eig) << "\n";
  }
  return os.str();
}

ConvexityReport convexity_check(const MetricSpec& spec, const Observer& obs, const SynchronousChart& chart,
                                double eps, int per_axis) {
  if (!(eps > 0.0)) throw SpecError("eps must be positive");
  const int N = spec.dim();
  ConvexityReport rep;
  rep.eps = eps;
  IntegratorOptions io;

  Vec wp = Vec::Zero(N);
  wp[0] = 0.5 * chart.r0;
  ChartPoint c0 = chart_point(spec, chart.frame_q, obs.p, wp, io);
  if (!c0.valid) throw AnalysisError("synchronous chart is not valid at p");
  const Mat g0 = spec.metric(obs.p);
  const Vec Nvec = -(g0.inverse() * c0.dtau);  // future unit normal, equal to gamma'(1)/tau
  Array3 GN = christoffel_N(spec, c0);
  ChristoffelAt Gg = christoffel_at(spec, obs.p);
  Array3 diff(N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      for (int c = 0; c < N; ++c) diff(a, b, c) = GN(a, b, c) - Gg.gamma(a, b, c);
  rep.gamma_gap = tensor_norm_T(Tensor::christoffel(diff), g0, Nvec);

  // d_c Gamma_N by central differences of independent chart points, then Riem_N.
  BoundaryHit hp = solve_boundary(spec, chart.frame_q, obs.p, c0.w, io);
  Mat dw_dx = hp.EA.inverse();
  const double hK = 1e-3 * chart.r0;
  std::vector<Array3> dGN(N, Array3(N));
  for (int c = 0; c < N; ++c) {
    Array3 side[2];
    for (int k = 0; k < 2; ++k) {
      const double sgn = k == 0 ? 1.0 : -1.0;
      Vec x = obs.p;
      x[c] += sgn * hK;
      ChartPoint cp = chart_point(spec, chart.frame_q, x, Vec(c0.w + dw_dx.col(c) * sgn * hK), io);
      if (!cp.valid) throw AnalysisError("chart point near p failed");
      side[k] = christoffel_N(spec, cp);
    }
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b)
        for (int d = 0; d < N; ++d) dGN[c](a, b, d) = (side[0](a, b, d) - side[1](a, b, d)) / (2.0 * hK);
  }
  Array4 RupN(N);
  for (int z = 0; z < N; ++z)
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b)
        for (int d = 0; d < N; ++d) {
          double v = dGN[a](z, b, d) - dGN[b](z, a, d);
          for (int h = 0; h < N; ++h) v += GN(z, a, h) * GN(h, b, d) - GN(z, b, h) * GN(h, a, d);
          RupN(z, a, b, d) = v;
        }
  rep.curvature_N = tensor_norm_T(Tensor::riemann(lower_riemann(RupN, c0.gN)), g0, Nvec);

  // Ball radius: predicted band 2 rho |dGamma| + (2 - 2 sqrt K rho cot(sqrt K rho)) equal to eps/2.
  const double sK = std::sqrt(rep.curvature_N);
  auto band = [&](double rho) { return 2.0 * rho * rep.gamma_gap + cot_term(sK * rho); };
  double hi = chart.half_width;
  if (sK > 0.0) hi = std::min(hi, 1.0 / sK);
  if (band(hi) <= 0.5 * eps) {
    rep.radius = hi;
  } else {
    boost::uintmax_t iters = 200;
    auto r = boost::math::tools::toms748_solve([&](double rho) { return band(rho) - 0.5 * eps; }, 0.0, hi,
                                               boost::math::tools::eps_tolerance<double>(40), iters);
    rep.radius = 0.5 * (r.first + r.second);
  }
  const double rho = rep.radius;

  // gN-normal coordinates zeta in a gN-orthonormal basis F at p; x(z) is the third-order geodesic expansion.
  const Mat F = complete_frame(g0, Nvec);
  std::vector<double> Tsym(static_cast<size_t>(N * N * N * N), 0.0);
  auto T4 = [&](int a, int i, int j, int k) -> double& {
    return Tsym[static_cast<size_t>(((a * N + i) * N + j) * N + k)];
  };
  {
    std::vector<double> Traw(Tsym.size(), 0.0);
    auto R4 = [&](int a, int i, int j, int k) -> double& {
      return Traw[static_cast<size_t>(((a * N + i) * N + j) * N + k)];
    };
    for (int a = 0; a < N; ++a)
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
          for (int k = 0; k < N; ++k) {
            double v = -dGN[i](a, j, k);
            for (int b = 0; b < N; ++b) v += 2.0 * GN(a, b, k) * GN(b, i, j);
            R4(a, i, j, k) = v;
          }
    const int perm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int a = 0; a < N; ++a)
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
          for (int k = 0; k < N; ++k) {
            const int ix[3] = {i, j, k};
            double v = 0.0;
            for (const auto& p : perm) v += R4(a, ix[p[0]], ix[p[1]], ix[p[2]]);
            T4(a, i, j, k) = v / 6.0;
          }
  }

  const int K = std::max(per_axis, 2);
  std::vector<Vec> zetas;
  long total = 1;
  for (int a = 0; a < N; ++a) total *= K;
  for (long id = 0; id < total; ++id) {
    Vec zeta(N);
    long rem = id;
    for (int a = 0; a < N; ++a) {
      int k = static_cast<int>(rem % K);
      rem /= K;
      zeta[a] = rho * (2.0 * k / (K - 1) - 1.0);
    }
    if (zeta.norm() <= rho * (1.0 + 1e-12)) zetas.push_back(zeta);
  }
  const double hz = rho / (2.0 * K);
  auto u_of = [](const Vec& z) { return z.squaredNorm(); };

  std::vector<ConvexityRow> rows(zetas.size());
  std::vector<char> valid(zetas.size(), 0);
  parallel_for(zetas.size(), [&](size_t idx) {
    const Vec& zeta = zetas[idx];
    Vec z = F * zeta;
    Vec dx = z;
    Mat Jz = Mat::Identity(N, N);
    std::vector<Mat> Hz(N, Mat::Zero(N, N));  // Hz[a](m, n) = d^2 x^a / dz^m dz^n
    for (int a = 0; a < N; ++a)
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
          dx[a] -= 0.5 * GN(a, i, j) * z[i] * z[j];
          Jz(a, i) -= GN(a, i, j) * z[j];
          Hz[a](i, j) -= GN(a, i, j);
          for (int k = 0; k < N; ++k) {
            dx[a] += T4(a, i, j, k) * z[i] * z[j] * z[k] / 6.0;
            Jz(a, i) += 0.5 * T4(a, i, j, k) * z[j] * z[k];
            Hz[a](i, j) += T4(a, i, j, k) * z[k];
          }
        }
    Vec x = obs.p + dx;
    ChartPoint cp = chart_point(spec, chart.frame_q, x, Vec(c0.w + dw_dx * dx), io);
    if (!cp.valid) return;
    Mat X = Jz * F;
    Mat Xinv = X.inverse();
    ChristoffelAt Gx = christoffel_at(spec, x);
    // Gamma_g in zeta coordinates.
    Array3 Gz(N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        Vec second(N);
        for (int c = 0; c < N; ++c) {
          double v = F.col(i).dot(Hz[c] * F.col(j));
          for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b) v += Gx.gamma(c, a, b) * X(a, i) * X(b, j);
          second[c] = v;
        }
        Vec tr = Xinv * second;
        for (int k = 0; k < N; ++k) Gz(k, i, j) = tr[k];
      }
    Mat H(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        Vec ei = Vec::Unit(N, i) * hz, ej = Vec::Unit(N, j) * hz;
        double fd;
        if (i == j)
          fd = (u_of(zeta + ei) - 2.0 * u_of(zeta) + u_of(zeta - ei)) / (hz * hz);
        else
          fd = (u_of(zeta + ei + ej) - u_of(zeta + ei - ej) - u_of(zeta - ei + ej) + u_of(zeta - ei - ej)) /
               (4.0 * hz * hz);
        double corr = 0.0;
        for (int k = 0; k < N; ++k) corr += Gz(k, i, j) * 2.0 * zeta[k];
        H(i, j) = fd - corr;
      }
    H = 0.5 * (H + H.transpose());
    Mat GNz = X.transpose() * cp.gN * X;
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(H, GNz);
    rows[idx] = ConvexityRow{zeta, es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
    valid[idx] = 1;
  });
  rep.min_eig = kInf;
  rep.max_eig = -kInf;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (!valid[i]) continue;
    ++rep.evaluated;
    rep.rows.push_back(rows[i]);
    rep.min_eig = std::min(rep.min_eig, rows[i].min_eig);
    rep.max_eig = std::max(rep.max_eig, rows[i].max_eig);
    if (rows[i].min_eig >= 2.0 - eps && rows[i].max_eig <= 2.0 + eps) ++rep.in_band;
  }
  rep.coverage = zetas.empty() ? 0.0 : static_cast<double>(rep.evaluated) / zetas.size();

  // Hessian comparison for tau at the chart points.
  rep.tau_band_lo_ratio = kInf;
  rep.tau_band_hi_ratio = 0.0;
  std::vector<std::pair<const ChartPoint*, Vec>> eigs;
  for (const auto& cp : chart.points) {
    if (!cp.valid) continue;
    Mat g = spec.metric(cp.x);
    Vec n = -(g.inverse() * cp.dtau);
    rep.curvature_g = std::max(rep.curvature_g, tensor_norm_T(Tensor::riemann(riemann_at(spec, cp.x).riem), g, n));
    Mat E = complete_frame(g, n);
    Mat S = -(E.transpose() * cp.hess * E).bottomRightCorner(N - 1, N - 1);
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    eigs.emplace_back(&cp, es.eigenvalues());
  }
  const double sk = std::sqrt(rep.curvature_g);
  for (const auto& [cp, ev] : eigs) {
    const double t = cp->tau;
    const double lo = sk > 0.0 ? sk / std::tan(sk * t) : 1.0 / t;
    const double hi_c = sk > 0.0 ? sk / std::tanh(sk * t) : 1.0 / t;
    for (int i = 0; i < ev.size(); ++i) {
      const double lam = ev[i];
      rep.tau_flat_deviation = std::max(rep.tau_flat_deviation, std::abs(lam * t - 1.0));
      if (lo > 0.0) rep.tau_band_lo_ratio = std::min(rep.tau_band_lo_ratio, lam / lo);
      rep.tau_band_hi_ratio = std::max(rep.tau_band_hi_ratio, lam / hi_c);
      if (lam < lo * (1.0 - 1e-6) - 1e-12 || lam > hi_c * (1.0 + 1e-6) + 1e-12) ++rep.tau_band_violations;
    }
  }
  return rep;
}

}  // namespace lorentz
