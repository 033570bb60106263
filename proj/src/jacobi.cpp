#include "lorentz/jacobi.hpp"

#include <cmath>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "lorentz/parallel.hpp"

namespace lorentz {

JacobiSolution integrate_jacobi(const MetricSpec& spec, const GeodesicSolution& geo, const Mat& frame0,
                                const Vec& J0, const Vec& dJ0) {
  const int N = spec.dim();
  if (J0.size() != N || dJ0.size() != N) throw SpecError("Jacobi initial data has the wrong dimension");
  RaySetup setup;
  setup.p = geo.p;
  setup.v = geo.v0;
  setup.E = frame0;
  setup.A0 = J0;
  setup.B0 = dJ0;
  std::vector<double> params;
  for (const auto& smp : geo.samples) params.push_back(smp.s);
  Ray ray = integrate_ray(spec, setup, params.back(), geo.options, params);
  JacobiSolution js;
  js.termination = ray.termination();
  for (double s : params) {
    if (s > ray.s_end()) break;
    size_t k = ray.traj.node_before(s);
    RayState st = ray.traj.s[k] == s ? ray.node(k) : ray.at(s);
    js.s.push_back(s);
    js.a.push_back(st.A.col(0));
    js.da.push_back(st.B.col(0));
    js.F.push_back(st.A.col(0).norm());
  }
  return js;
}

Ray jacobian_ray(const MetricSpec& spec, const OrthoFrame& frame, const Vec& w, const Mat& P, double s_max,
                 const IntegratorOptions& opt, bool volume, std::vector<double> stops) {
  const int N = spec.dim();
  RaySetup setup;
  setup.p = frame.p;
  setup.v = frame.E * w;
  setup.E = frame.E;
  setup.A0 = Mat::Zero(N, P.cols());
  setup.B0 = P;
  setup.volume = volume;
  return integrate_ray(spec, setup, s_max, opt, std::move(stops));
}

double phi_of(const RayState& st, const Mat& P) {
  const int q = static_cast<int>(P.cols());
  if (q == 0 || st.s == 0.0) return 1.0;
  Mat M = P.transpose() * st.A;
  return M.determinant() / std::pow(st.s, q);
}

Mat null_screen(const Vec& w) {
  const int N = static_cast<int>(w.size());
  Vec u = w.tail(N - 1);
  u /= u.norm();
  Mat S(N, N - 2);
  int filled = 0;
  for (int k = 1; k < N && filled < N - 2; ++k) {
    Vec e = Vec::Zero(N - 1);
    e[k - 1] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      e -= e.dot(u) * u;
      for (int j = 0; j < filled; ++j) e -= e.dot(S.col(j).tail(N - 1)) * S.col(j).tail(N - 1);
    }
    if (e.norm() < 1e-8) continue;
    Vec col = Vec::Zero(N);
    col.tail(N - 1) = e / e.norm();
    S.col(filled++) = col;
  }
  return S;
}

double exp_jacobian(const MetricSpec& spec, const OrthoFrame& frame, const Vec& w, double s,
                    const IntegratorOptions& opt) {
  if (s == 0.0) return 1.0;
  const int N = spec.dim();
  Ray ray = jacobian_ray(spec, frame, w, Mat::Identity(N, N), s, opt);
  if (ray.termination() != Termination::reached_smax)
    throw ChartError("ray left the chart before parameter s (" + to_string(ray.termination()) + ")");
  return phi_of(ray.node(ray.size() - 1), Mat::Identity(N, N));
}

double exp_jacobian(const MetricSpec& spec, const Observer& obs, const Vec& w, double s,
                    const IntegratorOptions& opt) {
  return exp_jacobian(spec, complete_frame(spec, obs), w, s, opt);
}

std::optional<double> first_phi_zero(const Ray& ray, const Mat& P, double zero_tol, double root_tol,
                                     bool* touching) {
  if (touching) *touching = false;
  if (P.cols() == 0) return std::nullopt;
  const size_t n = ray.size();
  std::vector<double> phi(n);
  for (size_t i = 0; i < n; ++i) phi[i] = phi_of(ray.node(i), P);
  auto phi_at = [&](double s) { return phi_of(ray.at(s), P); };
  auto tol = [root_tol](double a, double b) { return std::abs(b - a) <= root_tol * std::max(1.0, std::abs(a)); };
  double peak = 1.0;
  for (size_t i = 1; i < n; ++i) {
    const double s0 = ray.traj.s[i - 1], s1 = ray.traj.s[i];
    peak = std::max(peak, std::abs(phi[i]));
    if (phi[i] == 0.0) return s1;
    if ((phi[i - 1] > 0.0) != (phi[i] > 0.0)) {
      boost::uintmax_t iters = 200;
      auto r = boost::math::tools::toms748_solve(phi_at, s0, s1, phi[i - 1], phi[i], tol, iters);
      return 0.5 * (r.first + r.second);
    }
    // Touching zero: |phi| has a local minimum at node i that dips to zero.
    // Only dips well below the running peak are refined.
    if (i + 1 < n && std::abs(phi[i]) < 0.05 * peak && std::abs(phi[i]) < std::abs(phi[i - 1]) &&
        std::abs(phi[i]) <= std::abs(phi[i + 1])) {
      const double s2 = ray.traj.s[i + 1];
      boost::uintmax_t iters = 200;
      auto m = boost::math::tools::brent_find_minima([&](double s) { return std::abs(phi_at(s)); }, s0, s2,
                                                      std::numeric_limits<double>::digits / 2, iters);
      if (m.second < zero_tol) {
        if (touching) *touching = true;
        return m.first;
      }
    }
  }
  return std::nullopt;
}

namespace {

ConjugateSearch run_search(const MetricSpec& spec, const Observer& obs, double r_max, const ConjugateOptions& opt,
                           bool null) {
  const int N = spec.dim();
  OrthoFrame frame = complete_frame(spec, obs);
  std::vector<Vec> dirs = direction_set(null ? DirectionSet::null_past : opt.directions, N, opt.n_dirs);
  ConjugateSearch res;
  res.r_max = r_max;
  res.null_cone = null;
  res.rows.resize(dirs.size());
  parallel_for(dirs.size(), [&](size_t i) {
    ConjugateRow& row = res.rows[i];
    row.direction = dirs[i];
    Mat P = null ? null_screen(dirs[i]) : Mat(Mat::Identity(N, N));
    Ray ray = jacobian_ray(spec, frame, dirs[i], P, r_max, opt.integrator);
    row.termination = ray.termination();
    row.searched = ray.s_end();
    row.s_star = first_phi_zero(ray, P, opt.zero_tol, opt.root_tol, &row.touching);
  });
  res.searched = r_max;
  for (const auto& row : res.rows) {
    if (row.s_star && (!res.min_s || *row.s_star < *res.min_s)) res.min_s = row.s_star;
    if (!row.s_star && row.termination != Termination::reached_smax) ++res.failures;
    res.searched = std::min(res.searched, row.s_star ? r_max : row.searched);
  }
  return res;
}

}  // namespace

ConjugateSearch conjugate_radius(const MetricSpec& spec, const Observer& obs, double r_max,
                                 const ConjugateOptions& opt) {
  return run_search(spec, obs, r_max, opt, false);
}

ConjugateSearch null_conjugate_radius(const MetricSpec& spec, const Observer& obs, double r_max,
                                      const ConjugateOptions& opt) {
  return run_search(spec, obs, r_max, opt, true);
}

}  // namespace lorentz
