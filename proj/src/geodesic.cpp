#include "lorentz/geodesic.hpp"

#include <algorithm>
#include <cmath>

namespace lorentz {

namespace {

struct Layout {
  int N, k, m;
  bool vol;
  size_t x() const { return 0; }
  size_t v() const { return N; }
  size_t E() const { return 2 * N; }
  size_t A() const { return 2 * N + N * k; }
  size_t B() const { return A() + N * m; }
  size_t V() const { return B() + N * m; }
  size_t size() const { return V() + (vol ? 1 : 0); }
};

Layout layout_of(const Ray& r) { return {r.dim, r.transported, r.jacobi, r.has_volume}; }

void put(State& y, size_t off, const Mat& M) {
  for (int c = 0; c < M.cols(); ++c)
    for (int r = 0; r < M.rows(); ++r) y[off + static_cast<size_t>(c * M.rows() + r)] = M(r, c);
}

Mat get(const State& y, size_t off, int rows, int cols) {
  Mat M(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) M(r, c) = y[off + static_cast<size_t>(c * rows + r)];
  return M;
}

}  // namespace

RayState Ray::unpack(const State& y, double s) const {
  Layout L = layout_of(*this);
  RayState st;
  st.s = s;
  st.x = get(y, L.x(), dim, 1);
  st.v = get(y, L.v(), dim, 1);
  if (transported > 0) st.E = get(y, L.E(), dim, transported);
  if (jacobi > 0) {
    st.A = get(y, L.A(), dim, jacobi);
    st.B = get(y, L.B(), dim, jacobi);
  }
  if (has_volume) st.volume = y[L.V()];
  return st;
}

RayState Ray::node(size_t i) const { return unpack(traj.y[i], traj.s[i]); }

RayState Ray::at(double s) const { return unpack(traj.at(s), s); }

Ray integrate_ray(const MetricSpec& spec, const RaySetup& setup, double s_max, const IntegratorOptions& opt,
                  std::vector<double> stops) {
  const int N = spec.dim();
  Ray ray;
  ray.dim = N;
  ray.transported = static_cast<int>(setup.E.cols());
  ray.jacobi = static_cast<int>(setup.A0.cols());
  ray.has_volume = setup.volume;
  if (setup.p.size() != N || setup.v.size() != N) throw SpecError("ray initial data has the wrong dimension");
  if (ray.jacobi > 0 && ray.transported != N)
    throw SpecError("Jacobi fields in frame components need a full transported frame");
  if (setup.volume && ray.jacobi != N) throw SpecError("volume integrand needs N Jacobi fields");
  if (ray.transported > 0 && setup.E.rows() != N) throw SpecError("transported vectors have the wrong dimension");
  if (ray.jacobi > 0 && (setup.A0.rows() != N || setup.B0.rows() != N || setup.B0.cols() != ray.jacobi))
    throw SpecError("Jacobi initial data has the wrong shape");
  Layout L = layout_of(ray);

  State y0(L.size(), 0.0);
  put(y0, L.x(), setup.p);
  put(y0, L.v(), setup.v);
  if (L.k > 0) put(y0, L.E(), setup.E);
  if (L.m > 0) {
    put(y0, L.A(), setup.A0);
    put(y0, L.B(), setup.B0);
  }
  const bool curvature = L.m > 0;
  // The trajectory keeps its rhs for dense queries, so the closure owns a copy of the MetricSpec.
  auto owned = std::make_shared<const MetricSpec>(spec);

  OdeRhs rhs = [owned, L, curvature](const State& y, State& dy, double s) {
    const MetricSpec& spec = *owned;
    const int N = L.N;
    Vec x = get(y, L.x(), N, 1);
    Vec v = get(y, L.v(), N, 1);
    LocalGeometry geo;
    evaluate_geometry(spec, x, curvature, geo);
    auto gam = [&geo, N](const Vec& a, const Vec& b) {
      Vec out(N);
      for (int c = 0; c < N; ++c) {
        double acc = 0.0;
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < N; ++j) acc += geo.gamma(c, i, j) * a[i] * b[j];
        out[c] = acc;
      }
      return out;
    };
    for (int a = 0; a < N; ++a) dy[L.x() + a] = v[a];
    Vec acc = -gam(v, v);
    for (int a = 0; a < N; ++a) dy[L.v() + a] = acc[a];
    if (L.k > 0) {
      Mat E = get(y, L.E(), N, L.k);
      Mat dE(N, L.k);
      for (int c = 0; c < L.k; ++c) dE.col(c) = -gam(v, E.col(c));
      put(dy, L.E(), dE);
      if (L.m > 0) {
        // Jacobi equation in frame components: a'' = -E^{-1} R(E a, v) v.
        Mat M(N, N);
        for (int z = 0; z < N; ++z)
          for (int a = 0; a < N; ++a) {
            double t = 0.0;
            for (int b = 0; b < N; ++b)
              for (int d = 0; d < N; ++d) t += geo.riem_up(z, a, b, d) * v[b] * v[d];
            M(z, a) = t;
          }
        Mat Einv = frame_inverse(E, geo.g);
        Mat Q = Einv * M * E;
        Mat A = get(y, L.A(), N, L.m);
        Mat B = get(y, L.B(), N, L.m);
        put(dy, L.A(), B);
        put(dy, L.B(), Mat(-Q * A));
        if (L.vol) dy[L.V()] = s > 0.0 ? A.determinant() / s : 0.0;
      }
    }
  };
  OdeInside inside = [owned, L](const State& y) { return owned->domain().contains(get(y, L.x(), L.N, 1)); };
  ray.traj = integrate_ode(rhs, y0, s_max, opt, inside, std::move(stops));
  return ray;
}

namespace {

GeodesicSolution solution_from_ray(const Ray& ray, const Vec& p, const Vec& v0, const IntegratorOptions& opt) {
  GeodesicSolution geo;
  geo.p = p;
  geo.v0 = v0;
  geo.options = opt;
  geo.termination = ray.termination();
  for (size_t i = 0; i < ray.size(); ++i) {
    RayState st = ray.node(i);
    geo.samples.push_back({st.s, st.x, st.v});
    if (i > 0) geo.max_step = std::max(geo.max_step, st.s - geo.samples[i - 1].s);
  }
  return geo;
}

std::vector<double> sample_params(const GeodesicSolution& geo) {
  std::vector<double> s;
  for (const auto& smp : geo.samples) s.push_back(smp.s);
  return s;
}

// Integrates transported columns jointly with geo's initial data; returns E at every sample of geo.
std::vector<Mat> transport_columns(const MetricSpec& spec, const GeodesicSolution& geo, const Mat& cols) {
  RaySetup setup;
  setup.p = geo.p;
  setup.v = geo.v0;
  setup.E = cols;
  std::vector<double> params = sample_params(geo);
  Ray ray = integrate_ray(spec, setup, params.back(), geo.options, params);
  std::vector<Mat> out;
  out.reserve(params.size());
  for (double s : params) {
    size_t k = ray.traj.node_before(s);
    if (ray.traj.s[k] == s)
      out.push_back(ray.node(k).E);
    else
      out.push_back(ray.at(std::min(s, ray.s_end())).E);
  }
  return out;
}

}  // namespace

GeodesicSolution integrate_geodesic(const MetricSpec& spec, const Vec& p, const Vec& v0, double s_max, double tol,
                                    IntegratorOptions options, std::vector<double> stops) {
  if (!spec.domain().contains(p)) throw ChartError("geodesic start point is outside the chart domain");
  if (!v0.allFinite()) throw SpecError("initial velocity is not finite");
  if (tol > 0.0) options.tol = tol;
  RaySetup setup;
  setup.p = p;
  setup.v = v0;
  Ray ray = integrate_ray(spec, setup, s_max, options, std::move(stops));
  return solution_from_ray(ray, p, v0, options);
}

double norm_drift(const MetricSpec& spec, const GeodesicSolution& geo) {
  const auto& s0 = geo.samples.front();
  double n0 = s0.v.dot(spec.metric(s0.x) * s0.v);
  double worst = 0.0;
  for (const auto& smp : geo.samples) worst = std::max(worst, std::abs(smp.v.dot(spec.metric(smp.x) * smp.v) - n0));
  return worst;
}

std::vector<Vec> parallel_transport(const MetricSpec& spec, const GeodesicSolution& geo, const Vec& V0) {
  Mat cols = V0;
  std::vector<Vec> out;
  for (const Mat& E : transport_columns(spec, geo, cols)) out.push_back(E.col(0));
  return out;
}

TransportedFrame transport_frame(const MetricSpec& spec, const GeodesicSolution& geo, const Mat& frame0) {
  TransportedFrame tf;
  tf.s = sample_params(geo);
  tf.E = transport_columns(spec, geo, frame0);
  return tf;
}

ExpResult exp_map(const MetricSpec& spec, const OrthoFrame& frame, const Vec& y, const IntegratorOptions& opt) {
  ExpResult r;
  Vec v0 = frame.E * y;
  if (y.squaredNorm() == 0.0) {
    r.ok = true;
    r.x = frame.p;
    r.v = v0;
    return r;
  }
  RaySetup setup;
  setup.p = frame.p;
  setup.v = v0;
  Ray ray = integrate_ray(spec, setup, 1.0, opt);
  r.termination = ray.termination();
  RayState last = ray.node(ray.size() - 1);
  r.x = last.x;
  r.v = last.v;
  r.ok = r.termination == Termination::reached_smax;
  return r;
}

ExpResult exp_map(const MetricSpec& spec, const Observer& obs, const Vec& y, const IntegratorOptions& opt) {
  return exp_map(spec, complete_frame(spec, obs), y, opt);
}

NormProfile radial_norm_profile(const MetricSpec& spec, const Observer& obs, const Vec& direction, double s_max,
                                double K3, int samples) {
  OrthoFrame fr = complete_frame(spec, obs);
  std::vector<double> stops;
  for (int i = 1; i <= samples; ++i) stops.push_back(s_max * i / samples);
  RaySetup setup;
  setup.p = obs.p;
  setup.v = fr.E * direction;
  setup.E = fr.E;
  IntegratorOptions opt;
  Ray ray = integrate_ray(spec, setup, s_max, opt, stops);
  NormProfile prof;
  prof.termination = ray.termination();
  const bool fol = spec.foliated();
  double K0 = 0.0, K1 = 0.0;
  std::vector<double> wanted = {0.0};
  wanted.insert(wanted.end(), stops.begin(), stops.end());
  const double c0 = direction.norm();
  for (size_t i = 0; i < ray.size(); ++i) {
    double s = ray.traj.s[i];
    if (std::find(wanted.begin(), wanted.end(), s) == wanted.end()) continue;
    RayState st = ray.node(i);
    Mat g = spec.metric(st.x);
    NormProfileRow row;
    row.s = s;
    row.norm_transported = frame_inverse(st.E, g).operator*(st.v).norm();
    prof.max_transport_drift = std::max(prof.max_transport_drift, std::abs(row.norm_transported - c0));
    if (fol) {
      Observer o = foliation_observer(spec, st.x);
      row.norm_foliation = std::sqrt(reference_metric(g, o.T).operator*(st.v).dot(st.v));
      K0 = std::max(K0, std::abs(std::log(spec.lapse(st.x))));
      K1 = std::max(K1, lie_derivative_norm(spec, st.x));
    } else {
      row.norm_foliation = std::nan("");
    }
    prof.rows.push_back(row);
  }
  prof.K3 = K3 >= 0.0 ? K3 : std::exp(2.0 * K0) * K1 * K1;
  if (fol)
    for (size_t i = 1; i < prof.rows.size(); ++i) {
      const auto& a = prof.rows[i - 1];
      const auto& b = prof.rows[i];
      double rate = std::abs(1.0 / b.norm_foliation - 1.0 / a.norm_foliation) / (b.s - a.s);
      prof.max_rate = std::max(prof.max_rate, rate);
      if (rate > prof.K3) ++prof.band_violations;
    }
  return prof;
}

}  // namespace lorentz
