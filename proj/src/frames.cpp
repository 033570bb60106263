#include "lorentz/frames.hpp"

#include <cmath>

namespace lorentz {

namespace {

double gdot(const Mat& g, const Vec& a, const Vec& b) { return a.dot(g * b); }

Mat inverse_of(const Mat& g) {
  Eigen::FullPivLU<Mat> lu(g);
  if (!lu.isInvertible()) throw ChartError("metric is degenerate");
  return lu.inverse();
}

}  // namespace

Observer make_observer(const MetricSpec& spec, const Vec& p, const Vec& T) {
  if (T.size() != spec.dim()) throw SpecError("observer vector has the wrong dimension");
  Mat g = metric_at(spec, p).g;
  double n2 = gdot(g, T, T);
  if (!(n2 < 0.0)) throw SpecError("observer vector T is not timelike at p");
  Vec Tn = T / std::sqrt(-n2);
  // Future orientation: same time-cone as the foliation normal, i.e. dt(T) > 0.
  if (!(Tn[0] > 0.0)) throw SpecError("observer vector T is not future oriented (T^0 <= 0)");
  return {p, Tn};
}

Observer foliation_observer(const MetricSpec& spec, const Vec& p) {
  Mat ginv = inverse_of(metric_at(spec, p).g);
  double g00 = ginv(0, 0);
  if (!(g00 < 0.0)) throw SpecError("t = const slices are not spacelike at p");
  Vec T = -ginv.col(0) / std::sqrt(-g00);
  return {p, T};
}

Mat complete_frame(const Mat& g, const Vec& T) {
  const int N = g.rows();
  Mat E(N, N);
  E.col(0) = T;
  int filled = 1;
  for (int k = 0; k < N && filled < N; ++k) {
    Vec v = Vec::Unit(N, k);
    for (int pass = 0; pass < 2; ++pass)
      for (int b = 0; b < filled; ++b) {
        double sign = b == 0 ? -1.0 : 1.0;
        v -= sign * gdot(g, v, E.col(b)) * E.col(b);
      }
    double n2 = gdot(g, v, v);
    // Residual measured in the coordinate norm relative to the seed vector.
    if (!(n2 > 0.0) || v.norm() < 1e-8) continue;
    E.col(filled++) = v / std::sqrt(n2);
  }
  if (filled < N) throw ChartError("frame completion failed: metric is degenerate");
  return E;
}

OrthoFrame complete_frame(const MetricSpec& spec, const Observer& obs) {
  Mat g = metric_at(spec, obs.p).g;
  double n2 = gdot(g, obs.T, obs.T);
  if (!(n2 < 0.0)) throw SpecError("observer vector T is not timelike at p");
  return {obs.p, complete_frame(g, obs.T / std::sqrt(-n2))};
}

Mat frame_inverse(const Mat& E, const Mat& g) { return eta(g.rows()) * E.transpose() * g; }

double eta_residual(const Mat& E, const Mat& g) {
  return (E.transpose() * g * E - eta(g.rows())).cwiseAbs().maxCoeff();
}

Mat reference_metric(const Mat& g, const Vec& T) {
  Vec Tf = g * T;
  return g + 2.0 * Tf * Tf.transpose();
}

ReferenceMetricAt reference_metric_at(const MetricSpec& spec, const Observer& obs) {
  Mat g = metric_at(spec, obs.p).g;
  return {obs.p, reference_metric(g, obs.T)};
}

// ---------------------------------------------------------------- tensors

Tensor::Tensor(int d, std::vector<bool> cov) : dim(d), covariant(std::move(cov)) {
  size_t size = 1;
  for (size_t i = 0; i < covariant.size(); ++i) size *= static_cast<size_t>(dim);
  data.assign(size, 0.0);
}

Tensor Tensor::vector(const Vec& v) {
  Tensor t(static_cast<int>(v.size()), {false});
  for (int a = 0; a < v.size(); ++a) t.data[a] = v[a];
  return t;
}

Tensor Tensor::covector(const Vec& w) {
  Tensor t(static_cast<int>(w.size()), {true});
  for (int a = 0; a < w.size(); ++a) t.data[a] = w[a];
  return t;
}

Tensor Tensor::bilinear(const Mat& m) {
  const int N = m.rows();
  Tensor t(N, {true, true});
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) t.data[a * N + b] = m(a, b);
  return t;
}

Tensor Tensor::christoffel(const Array3& gamma) {
  const int N = gamma.dim();
  Tensor t(N, {false, true, true});
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      for (int c = 0; c < N; ++c) t.data[(a * N + b) * N + c] = gamma(a, b, c);
  return t;
}

Tensor Tensor::riemann(const Array4& riem) {
  const int N = riem.dim();
  Tensor t(N, {true, true, true, true});
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      for (int c = 0; c < N; ++c)
        for (int d = 0; d < N; ++d) t.data[((a * N + b) * N + c) * N + d] = riem(a, b, c, d);
  return t;
}

double tensor_norm_frame(const Tensor& t, const Mat& E, const Mat& Einv) {
  const int N = t.dim;
  if (E.rows() != N) throw SpecError("tensor dimension does not match the frame");
  std::vector<double> cur = t.data, next(cur.size());
  const size_t total = cur.size();
  // Transform one slot at a time: contravariant slots by E^{-1}, covariant slots by E^T.
  size_t stride = total;
  for (int slot = 0; slot < t.rank(); ++slot) {
    stride /= static_cast<size_t>(N);
    const size_t block = stride * static_cast<size_t>(N);
    for (size_t base = 0; base < total; base += block)
      for (size_t inner = 0; inner < stride; ++inner)
        for (int alpha = 0; alpha < N; ++alpha) {
          double s = 0.0;
          for (int a = 0; a < N; ++a) {
            double m = t.covariant[slot] ? E(a, alpha) : Einv(alpha, a);
            s += m * cur[base + static_cast<size_t>(a) * stride + inner];
          }
          next[base + static_cast<size_t>(alpha) * stride + inner] = s;
        }
    std::swap(cur, next);
  }
  double s = 0.0;
  for (double v : cur) s += v * v;
  return std::sqrt(s);
}

double tensor_norm_T(const Tensor& t, const Mat& g, const Vec& T) {
  if (g.rows() != t.dim) throw SpecError("tensor dimension does not match the metric");
  Mat E = complete_frame(g, T / std::sqrt(-gdot(g, T, T)));
  return tensor_norm_frame(t, E, frame_inverse(E, g));
}

double tensor_norm_T(const Tensor& t, const Observer& obs, const MetricSpec& spec) {
  return tensor_norm_T(t, metric_at(spec, obs.p).g, obs.T);
}

// ---------------------------------------------------------------- bounds

double unit_ball_volume(int k) { return std::pow(kPi, 0.5 * k) / std::tgamma(0.5 * k + 1.0); }
double unit_sphere_area(int k) { return k * unit_ball_volume(k); }

double lie_derivative_norm(const MetricSpec& spec, const Vec& x) {
  Mat L = lie_derivative_T(spec, x);
  const int N = spec.dim();
  const int n = N - 1;
  Mat h = spec.metric(x).bottomRightCorner(n, n);
  Mat hinv = h.inverse();
  Vec L0 = L.col(0).tail(n);
  Mat Ls = L.bottomRightCorner(n, n);
  double s = 2.0 * L0.dot(hinv * L0) + (hinv * Ls * hinv * Ls).trace();
  return std::sqrt(std::max(s, 0.0));
}

double riemann_norm_T(const MetricSpec& spec, const Vec& x) {
  auto R = riemann_at(spec, x);
  Observer obs = foliation_observer(spec, x);
  return tensor_norm_T(Tensor::riemann(R.riem), spec.metric(x), obs.T);
}

double slice_ball_volume_estimate(const MetricSpec& spec, const Vec& p) {
  const int n = spec.spatial_dim();
  Mat h = metric_at(spec, p).g.bottomRightCorner(n, n);
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  // The coordinate ball of radius 1/sqrt(lambda_max) lies inside the unit g-ball.
  double rho = 1.0 / std::sqrt(es.eigenvalues().maxCoeff());
  const ChartDomain& d = spec.domain();
  for (int a = 1; a < spec.dim(); ++a)
    if (d.periodic(a)) rho = std::min(rho, 0.5 * d.period[a]);
  return unit_ball_volume(n) * std::pow(rho, n) * std::sqrt(h.determinant());
}

std::vector<Vec> halton_probes(const MetricSpec& spec, const Vec& p, double radius, int count) {
  static const int primes[] = {2, 3, 5, 7, 11, 13};
  const int N = spec.dim();
  std::vector<Vec> out;
  out.push_back(p);
  for (int i = 1; static_cast<int>(out.size()) < count && i < 50 * count; ++i) {
    Vec x(N);
    for (int a = 0; a < N; ++a) {
      double f = 1.0, r = 0.0;
      for (int k = i; k > 0; k /= primes[a]) {
        f /= primes[a];
        r += f * (k % primes[a]);
      }
      x[a] = p[a] + radius * (2.0 * r - 1.0);
    }
    if (spec.domain().contains(x)) out.push_back(x);
  }
  return out;
}

AssumptionBounds measure_bounds(const MetricSpec& spec, const Vec& p, double radius, int per_axis) {
  if (!spec.foliated()) throw SpecError("foliation bounds need a spec in foliated form");
  const int N = spec.dim();
  AssumptionBounds b;
  b.r0 = radius;
  per_axis = std::max(per_axis, 1);
  long total = 1;
  for (int a = 0; a < N; ++a) total *= per_axis;
  for (long idx = 0; idx < total; ++idx) {
    Vec x = p;
    long rem = idx;
    for (int a = 0; a < N; ++a) {
      int k = static_cast<int>(rem % per_axis);
      rem /= per_axis;
      if (per_axis > 1) x[a] += radius * (2.0 * k / (per_axis - 1) - 1.0);
    }
    if (!spec.domain().contains(x)) continue;
    ++b.samples;
    b.K0 = std::max(b.K0, std::abs(std::log(spec.lapse(x))));
    b.K1 = std::max(b.K1, lie_derivative_norm(spec, x));
    b.K2 = std::max(b.K2, riemann_norm_T(spec, x));
  }
  if (b.samples == 0) throw ChartError("no sample point of the bound region lies in the chart");
  b.K3 = std::exp(2.0 * b.K0) * b.K1 * b.K1;
  b.v0 = slice_ball_volume_estimate(spec, p);
  return b;
}

ConnectionGapReport connection_gap(const MetricSpec& spec, const std::vector<Vec>& probes) {
  if (!spec.foliated()) throw SpecError("connection gap needs a spec in foliated form");
  ConnectionGapReport rep;
  auto gT_field = [&spec](const Vec& y) {
    Mat g = spec.metric(y);
    Mat ginv = g.inverse();
    Vec dt = Vec::Unit(g.rows(), 0);
    return Mat(g + 2.0 * dt * dt.transpose() / (-ginv(0, 0)));
  };
  for (const Vec& x : probes) {
    ConnectionGapRow row;
    row.point = x;
    auto G = christoffel_at(spec, x);
    MetricJet jt;
    finite_difference_jet(gT_field, x, false, jt);
    Array3 GT;
    christoffel_from_jet(jt, jt.g.inverse(), GT);
    const int N = spec.dim();
    Array3 diff(N);
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b)
        for (int c = 0; c < N; ++c) diff(a, b, c) = GT(a, b, c) - G.gamma(a, b, c);
    Observer obs = foliation_observer(spec, x);
    Mat g = spec.metric(x);
    row.lhs = tensor_norm_T(Tensor::christoffel(diff), g, obs.T);
    row.lapse = spec.lapse(x);
    row.lie_norm = lie_derivative_norm(spec, x);
    row.rhs_lie = row.lapse * row.lapse * row.lie_norm * row.lie_norm;
    rep.K0 = std::max(rep.K0, std::abs(std::log(row.lapse)));
    rep.K1 = std::max(rep.K1, row.lie_norm);
    rep.max_lhs = std::max(rep.max_lhs, row.lhs);
    rep.rows.push_back(row);
  }
  rep.bound = std::exp(2.0 * rep.K0) * rep.K1 * rep.K1;
  // The left side comes from a finite-difference jet of g_T; 1e-8 absorbs its noise.
  for (const auto& r : rep.rows)
    if (r.lhs > rep.bound + 1e-8) ++rep.violations;
  return rep;
}

}  // namespace lorentz
