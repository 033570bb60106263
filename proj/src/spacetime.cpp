#include "lorentz/spacetime.hpp"

#include <atomic>
#include <sstream>

#include "model.hpp"

namespace lorentz {

namespace debug {
namespace {
std::atomic<bool> g_flip{false};
}
void set_flip_curvature_sign(bool on) { g_flip = on; }
bool flip_curvature_sign() { return g_flip; }
}  // namespace debug

namespace {

void require_in_chart(const MetricSpec& spec, const Vec& p) {
  if (p.size() != spec.dim()) {
    throw ChartError("point has " + std::to_string(p.size()) + " coordinates, spacetime dimension is " +
                     std::to_string(spec.dim()));
  }
  if (!spec.domain().contains(p)) {
    std::ostringstream os;
    os << "point (";
    for (int a = 0; a < p.size(); ++a) os << (a ? ", " : "") << p[a];
    os << ") is outside the chart domain";
    throw ChartError(os.str());
  }
}

Mat inverse_checked(const Mat& g) {
  Eigen::FullPivLU<Mat> lu(g);
  if (!lu.isInvertible()) throw ChartError("metric is degenerate");
  Mat inv = lu.inverse();
  if (!inv.allFinite()) throw ChartError("metric inverse is not finite");
  return inv;
}

// Restriction of a jet to the spatial block (indices 1..n, spatial derivatives only).
MetricJet spatial_jet(const MetricJet& jet) {
  const int N = jet.g.rows();
  const int n = N - 1;
  MetricJet s;
  s.g = jet.g.bottomRightCorner(n, n);
  s.dg = Array3(n);
  s.ddg = Array4(n);
  s.has_second = jet.has_second;
  for (int m = 0; m < n; ++m)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        s.dg(m, a, b) = jet.dg(m + 1, a + 1, b + 1);
        for (int k = 0; k < n; ++k) s.ddg(m, k, a, b) = jet.ddg(m + 1, k + 1, a + 1, b + 1);
      }
  return s;
}

void raise_first(const Array4& riem, const Mat& ginv, Array4& up) {
  const int N = ginv.rows();
  up = Array4(N);
  for (int z = 0; z < N; ++z)
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b)
        for (int d = 0; d < N; ++d) {
          double s = 0.0;
          for (int c = 0; c < N; ++c) s += ginv(z, c) * riem(a, b, c, d);
          up(z, a, b, d) = s;
        }
}

void maybe_flip(Array4& r) {
  if (!debug::flip_curvature_sign()) return;
  const int N = r.dim();
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      for (int c = 0; c < N; ++c)
        for (int d = 0; d < N; ++d) r(a, b, c, d) = -r(a, b, c, d);
}

}  // namespace

void christoffel_from_jet(const MetricJet& jet, const Mat& ginv, Array3& gamma) {
  const int N = jet.g.rows();
  gamma = Array3(N);
  for (int a = 0; a < N; ++a)
    for (int b = a; b < N; ++b) {
      double low[kMaxDim];
      for (int d = 0; d < N; ++d) low[d] = 0.5 * (jet.dg(a, d, b) + jet.dg(b, d, a) - jet.dg(d, a, b));
      for (int c = 0; c < N; ++c) {
        double s = 0.0;
        for (int d = 0; d < N; ++d) s += ginv(c, d) * low[d];
        gamma(c, a, b) = s;
        gamma(c, b, a) = s;
      }
    }
}

void riemann_up_from_jet(const MetricJet& jet, const Mat& ginv, const Array3& gamma, Array4& riem_up) {
  const int N = jet.g.rows();
  // dgam(e, c, a, b) = ∂_e Γ^c_ab.
  Array4 dgam(N);
  for (int e = 0; e < N; ++e) {
    Mat dginv(N, N);
    for (int c = 0; c < N; ++c)
      for (int d = 0; d < N; ++d) {
        double s = 0.0;
        for (int p = 0; p < N; ++p)
          for (int q = 0; q < N; ++q) s += ginv(c, p) * jet.dg(e, p, q) * ginv(q, d);
        dginv(c, d) = -s;
      }
    for (int a = 0; a < N; ++a)
      for (int b = a; b < N; ++b)
        for (int c = 0; c < N; ++c) {
          double s = 0.0;
          for (int d = 0; d < N; ++d) {
            double S = jet.dg(a, d, b) + jet.dg(b, d, a) - jet.dg(d, a, b);
            double dS = jet.ddg(e, a, d, b) + jet.ddg(e, b, d, a) - jet.ddg(e, d, a, b);
            s += 0.5 * (dginv(c, d) * S + ginv(c, d) * dS);
          }
          dgam(e, c, a, b) = s;
          dgam(e, c, b, a) = s;
        }
  }
  riem_up = Array4(N);
  for (int z = 0; z < N; ++z)
    for (int a = 0; a < N; ++a)
      for (int b = a + 1; b < N; ++b)
        for (int d = 0; d < N; ++d) {
          double s = dgam(a, z, b, d) - dgam(b, z, a, d);
          for (int h = 0; h < N; ++h) s += gamma(z, a, h) * gamma(h, b, d) - gamma(z, b, h) * gamma(h, a, d);
          riem_up(z, a, b, d) = s;
          riem_up(z, b, a, d) = -s;
        }
}

void foliated_christoffel_from_jet(const MetricJet& jet, Array3& gamma) {
  const int N = jet.g.rows();
  const int n = N - 1;
  const double f = jet.g(0, 0);
  Mat hinv = inverse_checked(jet.g.bottomRightCorner(n, n));
  MetricJet sj = spatial_jet(jet);
  Array3 gs;
  christoffel_from_jet(sj, hinv, gs);
  gamma = Array3(N);
  gamma(0, 0, 0) = jet.dg(0, 0, 0) / (2.0 * f);
  for (int i = 1; i < N; ++i) {
    double v = jet.dg(i, 0, 0) / (2.0 * f);
    gamma(0, 0, i) = v;
    gamma(0, i, 0) = v;
    for (int j = 1; j < N; ++j) gamma(0, i, j) = -jet.dg(0, i, j) / (2.0 * f);
  }
  for (int k = 1; k < N; ++k) {
    double s = 0.0;
    for (int l = 1; l < N; ++l) s += hinv(k - 1, l - 1) * jet.dg(l, 0, 0);
    gamma(k, 0, 0) = -0.5 * s;
    for (int i = 1; i < N; ++i) {
      double t = 0.0;
      for (int l = 1; l < N; ++l) t += hinv(k - 1, l - 1) * jet.dg(0, l, i);
      gamma(k, i, 0) = 0.5 * t;
      gamma(k, 0, i) = 0.5 * t;
      for (int j = 1; j < N; ++j) gamma(k, i, j) = gs(k - 1, i - 1, j - 1);
    }
  }
}

void foliated_riemann_lower_from_jet(const MetricJet& jet, Array4& riem) {
  const int N = jet.g.rows();
  const int n = N - 1;
  const double f = jet.g(0, 0);
  const Mat h = jet.g.bottomRightCorner(n, n);
  const Mat hinv = inverse_checked(h);
  MetricJet sj = spatial_jet(jet);
  Array3 gs;
  christoffel_from_jet(sj, hinv, gs);
  Array4 rs_up;
  riemann_up_from_jet(sj, hinv, gs, rs_up);
  Array4 rs = lower_riemann(rs_up, h);

  // 0-based spatial indices below; jet indices are shifted by one.
  auto gdot = [&](int i, int j) { return jet.dg(0, i + 1, j + 1); };
  auto df = [&](int i) { return jet.dg(i + 1, 0, 0); };
  const double fdot = jet.dg(0, 0, 0);

  riem = Array4(N);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          riem(i + 1, j + 1, k + 1, l + 1) =
              rs(i, j, k, l) - (gdot(i, k) * gdot(j, l) - gdot(i, l) * gdot(j, k)) / (4.0 * f);

  // ∇_l ġ_ij with the spatial connection.
  auto nabla_gdot = [&](int l, int i, int j) {
    double s = jet.ddg(l + 1, 0, i + 1, j + 1);
    for (int k = 0; k < n; ++k) s -= gs(k, l, i) * gdot(k, j) + gs(k, l, j) * gdot(i, k);
    return s;
  };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l) {
        double v = 0.5 * (nabla_gdot(l, i, j) - nabla_gdot(i, l, j)) +
                   (df(i) * gdot(j, l) - df(l) * gdot(i, j)) / (4.0 * f);
        riem(0, j + 1, i + 1, l + 1) = v;
        riem(j + 1, 0, i + 1, l + 1) = -v;
        riem(i + 1, l + 1, 0, j + 1) = v;
        riem(i + 1, l + 1, j + 1, 0) = -v;
      }

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double hess_f = jet.ddg(i + 1, j + 1, 0, 0);
      for (int k = 0; k < n; ++k) hess_f -= gs(k, i, j) * df(k);
      double quad = 0.0;
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) quad += hinv(p, q) * gdot(i, p) * gdot(j, q);
      double v = -0.5 * (hess_f + jet.ddg(0, 0, i + 1, j + 1)) + 0.25 * quad +
                 (fdot * gdot(i, j) + df(i) * df(j)) / (4.0 * f);
      riem(i + 1, 0, j + 1, 0) = v;
      riem(0, i + 1, j + 1, 0) = -v;
      riem(i + 1, 0, 0, j + 1) = -v;
      riem(0, i + 1, 0, j + 1) = v;
    }
}

Array4 lower_riemann(const Array4& riem_up, const Mat& g) {
  const int N = g.rows();
  Array4 r(N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      for (int c = 0; c < N; ++c)
        for (int d = 0; d < N; ++d) {
          double s = 0.0;
          for (int z = 0; z < N; ++z) s += g(c, z) * riem_up(z, a, b, d);
          r(a, b, c, d) = s;
        }
  return r;
}

Mat ricci_from_lower(const Array4& riem, const Mat& ginv) {
  const int N = ginv.rows();
  Mat ric = Mat::Zero(N, N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) {
      double s = 0.0;
      for (int c = 0; c < N; ++c)
        for (int d = 0; d < N; ++d) s += ginv(c, d) * riem(a, c, b, d);
      ric(a, b) = s;
    }
  return ric;
}

void evaluate_geometry(const MetricSpec& spec, const Vec& x, bool curvature, LocalGeometry& out) {
  MetricJet jet;
  spec.jet(x, curvature, jet);
  if (!jet.g.allFinite()) throw ChartError("metric is not finite");
  out.g = jet.g;
  out.ginv = inverse_checked(jet.g);
  if (spec.kind() == SpecKind::Foliated) {
    foliated_christoffel_from_jet(jet, out.gamma);
    if (curvature) {
      Array4 low;
      foliated_riemann_lower_from_jet(jet, low);
      raise_first(low, out.ginv, out.riem_up);
    }
  } else {
    christoffel_from_jet(jet, out.ginv, out.gamma);
    if (curvature) riemann_up_from_jet(jet, out.ginv, out.gamma, out.riem_up);
  }
  if (curvature) maybe_flip(out.riem_up);
}

MetricAt metric_at(const MetricSpec& spec, const Vec& p) {
  require_in_chart(spec, p);
  Mat g = spec.metric(p);
  if (!g.allFinite()) throw ChartError("metric is not finite");
  return {p, g};
}

ChristoffelAt christoffel_at(const MetricSpec& spec, const Vec& p) {
  require_in_chart(spec, p);
  LocalGeometry geo;
  evaluate_geometry(spec, p, false, geo);
  return {p, geo.gamma};
}

RiemannAt riemann_at(const MetricSpec& spec, const Vec& p) {
  require_in_chart(spec, p);
  LocalGeometry geo;
  evaluate_geometry(spec, p, true, geo);
  RiemannAt r;
  r.point = p;
  r.riem = lower_riemann(geo.riem_up, geo.g);
  r.ricci = ricci_from_lower(r.riem, geo.ginv);
  return r;
}

ChristoffelAt christoffel_fd(const MetricSpec& spec, const Vec& p) {
  require_in_chart(spec, p);
  MetricJet jet;
  spec.jet_fd(p, false, jet);
  ChristoffelAt r{p, Array3(spec.dim())};
  christoffel_from_jet(jet, inverse_checked(jet.g), r.gamma);
  return r;
}

RiemannAt riemann_fd(const MetricSpec& spec, const Vec& p) {
  require_in_chart(spec, p);
  MetricJet jet;
  spec.jet_fd(p, true, jet);
  Mat ginv = inverse_checked(jet.g);
  Array3 gamma;
  christoffel_from_jet(jet, ginv, gamma);
  Array4 up;
  riemann_up_from_jet(jet, ginv, gamma, up);
  maybe_flip(up);
  RiemannAt r;
  r.point = p;
  r.riem = lower_riemann(up, jet.g);
  r.ricci = ricci_from_lower(r.riem, ginv);
  return r;
}

Mat lie_derivative_T(const MetricSpec& spec, const Vec& p) {
  if (!spec.foliated()) throw SpecError("L_T g needs a spec in foliated form");
  require_in_chart(spec, p);
  MetricJet jet;
  spec.jet(p, false, jet);
  const int N = spec.dim();
  const double f = jet.g(0, 0);
  const double n = std::sqrt(-f);
  Mat L = Mat::Zero(N, N);
  for (int i = 1; i < N; ++i) {
    double v = jet.dg(i, 0, 0) / (2.0 * f);
    L(0, i) = v;
    L(i, 0) = v;
    for (int j = 1; j < N; ++j) L(i, j) = jet.dg(0, i, j) / n;
  }
  return L;
}

double riemann_symmetry_residual(const RiemannAt& r) {
  const int N = r.riem.dim();
  double scale = 1.0, worst = 0.0;
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      for (int c = 0; c < N; ++c)
        for (int d = 0; d < N; ++d) {
          const double v = r.riem(a, b, c, d);
          scale = std::max(scale, std::abs(v));
          worst = std::max({worst, std::abs(v + r.riem(b, a, c, d)), std::abs(v + r.riem(a, b, d, c)),
                            std::abs(v - r.riem(c, d, a, b)),
                            std::abs(v + r.riem(b, c, a, d) + r.riem(c, a, b, d))});
        }
  return worst / scale;
}

}  // namespace lorentz
