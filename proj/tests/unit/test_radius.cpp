#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "lorentz/radius.hpp"

using namespace lorentz;

namespace {

// Shortest nonzero translation of the cubic period lattice, by enumeration.
double lattice_min(double L, int n) {
  double best = kInf;
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 5;
  for (int code = 1; code < total; ++code) {
    double s = 0.0;
    for (int c = code, i = 0; i < n; ++i, c /= 5) {
      double k = c % 5 - 2;
      s += k * k * L * L;
    }
    if (s > 0.0) best = std::min(best, std::sqrt(s));
  }
  return best;
}

// Fixed-step RK4 geodesic shooting, used as an oracle for tau.
struct Shot {
  Vec x, v;
};

Shot rk4_geodesic(const MetricSpec& spec, const Vec& q, const Vec& v0, int steps) {
  const int N = spec.dim();
  auto rhs = [&](const Vec& x, const Vec& v, Vec& dx, Vec& dv) {
    Array3 G = christoffel_at(spec, x).gamma;
    dx = v;
    dv = Vec::Zero(N);
    for (int c = 0; c < N; ++c)
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) dv[c] -= G(c, a, b) * v[a] * v[b];
  };
  Vec x = q, v = v0;
  const double h = 1.0 / steps;
  Vec k1x, k1v, k2x, k2v, k3x, k3v, k4x, k4v;
  for (int i = 0; i < steps; ++i) {
    rhs(x, v, k1x, k1v);
    rhs(x + 0.5 * h * k1x, v + 0.5 * h * k1v, k2x, k2v);
    rhs(x + 0.5 * h * k2x, v + 0.5 * h * k2v, k3x, k3v);
    rhs(x + h * k3x, v + h * k3v, k4x, k4v);
    x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
    v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  return {x, v};
}

double tau_oracle(const MetricSpec& spec, const Vec& q, const Vec& x) {
  const int N = spec.dim();
  Vec v = x - q;
  for (int it = 0; it < 30; ++it) {
    Vec r = rk4_geodesic(spec, q, v, 200).x - x;
    if (r.norm() < 1e-13) break;
    Mat J(N, N);
    for (int j = 0; j < N; ++j) {
      Vec dv = Vec::Zero(N);
      dv[j] = 1e-6;
      J.col(j) = (rk4_geodesic(spec, q, v + dv, 200).x - rk4_geodesic(spec, q, v - dv, 200).x) / 2e-6;
    }
    v -= J.lu().solve(r);
  }
  Mat g = metric_at(spec, q).g;
  return std::sqrt(-v.dot(g * v));
}

}  // namespace

TEST(Loops, TorusShortestLoop) {
  auto spec = builtin::flat_spatial_torus(2.0, 4);
  auto obs = foliation_observer(spec, Vec::Zero(4));
  auto ls = detect_short_loops(spec, obs, 3.0);
  ASSERT_TRUE(ls.shortest.has_value());
  EXPECT_NEAR(*ls.shortest / lattice_min(2.0, 3), 1.0, 0.02);
  for (const auto& pr : ls.confirmed) EXPECT_LT(pr.residual, 1e-8);
}

TEST(Loops, MinkowskiHasNone) {
  auto spec = builtin::minkowski(4);
  auto obs = foliation_observer(spec, Vec::Zero(4));
  auto ls = detect_short_loops(spec, obs, 10.0);
  EXPECT_FALSE(ls.shortest.has_value());
  EXPECT_EQ(ls.failed_points, 0);
}

TEST(Loops, RefinementConsistent) {
  auto spec = builtin::flat_spatial_torus(1.5, 3);
  auto obs = foliation_observer(spec, Vec::Zero(3));
  LoopOptions coarse, fine;
  fine.grid_density = 12;
  auto a = detect_short_loops(spec, obs, 2.0, coarse);
  auto b = detect_short_loops(spec, obs, 2.0, fine);
  ASSERT_TRUE(a.shortest && b.shortest);
  EXPECT_NEAR(*a.shortest, *b.shortest, 1e-6);
  EXPECT_NEAR(*b.shortest, lattice_min(1.5, 2), 0.02 * 1.5);
}

TEST(Loops, NullLoopOnTorus) {
  // Two past null rays of equal length s meet when their spatial parts differ by a lattice vector,
  // so the shortest null loop has length sqrt 2 times the shortest translation.
  auto spec = builtin::flat_spatial_torus(2.0, 3);
  auto obs = foliation_observer(spec, Vec::Zero(3));
  auto ls = detect_null_loops(spec, obs, 3.0);
  ASSERT_TRUE(ls.shortest.has_value());
  EXPECT_NEAR(*ls.shortest / (std::sqrt(2.0) * lattice_min(2.0, 2)), 1.0, 0.02);
}

TEST(Injectivity, TorusHalfLoop) {
  auto spec = builtin::flat_spatial_torus(2.0, 4);
  auto obs = foliation_observer(spec, Vec::Zero(4));
  auto rep = injectivity_radius(spec, obs, 3.0);
  EXPECT_NEAR(rep.inj_estimate, 0.5 * lattice_min(2.0, 3), 0.02);
  EXPECT_FALSE(rep.conj_radius.has_value());
  EXPECT_EQ(rep.bound_violations, 0);
  ASSERT_TRUE(rep.thm_foliated_bound && rep.thm_main_bound);
  EXPECT_LE(*rep.thm_foliated_bound, rep.inj_estimate);
  EXPECT_LE(*rep.thm_main_bound, rep.inj_estimate);
}

TEST(Injectivity, MinkowskiReachesRmax) {
  auto spec = builtin::minkowski(3);
  auto obs = foliation_observer(spec, Vec::Zero(3));
  auto rep = injectivity_radius(spec, obs, 4.0);
  EXPECT_DOUBLE_EQ(rep.inj_estimate, 4.0);
  EXPECT_EQ(rep.bound_violations, 0);
  EXPECT_FALSE(rep.diagnostics.get("loops.grid_points").empty());
}

TEST(Injectivity, ScaleEquivariant) {
  auto base = builtin::flat_spatial_torus(2.0, 3);
  auto obs = foliation_observer(base, Vec::Zero(3));
  RadiusOptions opt;
  opt.foliated_bound = false;
  opt.main_bound = false;
  double ref = injectivity_radius(base, obs, 3.0, opt).inj_estimate;
  for (double lam : {0.5, 2.0}) {
    auto spec = base.scaled(lam);
    auto o = foliation_observer(spec, Vec::Zero(3));
    double r = injectivity_radius(spec, o, 3.0 * lam, opt).inj_estimate;
    EXPECT_NEAR(r / (lam * ref), 1.0, 0.01) << lam;
  }
}

TEST(FoliatedChain, HandCalculation) {
  AssumptionBounds b;
  b.K0 = 0.0;
  b.K1 = 0.1;
  b.K2 = 0.2;
  b.K3 = 0.01;
  BoundConstants c;
  c.i1 = 0.5;
  auto fb = theorem_foliated_bound(b, 3, 0.1, c);
  ASSERT_TRUE(fb.ok) << fb.failed_link;
  // Frozen from an independent evaluation of the chain (sandwich cap found by bisection).
  EXPECT_NEAR(fb.chain.K, 0.11051709180756478, 1e-14);
  EXPECT_NEAR(fb.chain.i2, 0.5, 1e-14);
  EXPECT_NEAR(fb.chain.c1, 0.16301449682135927, 1e-13);
  EXPECT_NEAR(fb.chain.c2, 0.16301449682135927, 1e-13);
  EXPECT_NEAR(fb.chain.r2, 0.17249229517956965, 1e-12);
  EXPECT_EQ(fb.r2_limit, "sandwich");
  EXPECT_NEAR(fb.chain.c3, 2.0794415416798357, 1e-9);
  EXPECT_NEAR(fb.chain.c4, 2.772588722239781, 1e-9);
  EXPECT_NEAR(fb.chain.c5, 4.852909674076693, 1e-9);
  EXPECT_NEAR(fb.i0, 0.036636452397537336, 1e-12);
}

TEST(FoliatedChain, MonotoneInBounds) {
  BoundConstants c;
  c.i1 = 0.5;
  double prev = kInf;
  for (double K1 : {0.0, 0.05, 0.1, 0.3, 1.0, 3.0}) {
    AssumptionBounds b;
    b.K1 = K1;
    b.K3 = K1 * K1;
    b.K2 = 0.5;
    auto fb = theorem_foliated_bound(b, 3, 0.1, c);
    ASSERT_TRUE(fb.ok) << K1;
    EXPECT_LE(fb.i0, prev * (1 + 1e-12)) << K1;
    EXPECT_NEAR(fb.i0, fb.chain.r2 * std::exp(-fb.chain.c2) / 4, 1e-15);
    EXPECT_GT(fb.chain.c5, fb.chain.c4);
    prev = fb.i0;
  }
  prev = kInf;
  for (double K0 : {0.0, 0.2, 0.5, 1.0}) {
    AssumptionBounds b;
    b.K0 = K0;
    b.K2 = 0.1;
    auto fb = theorem_foliated_bound(b, 3, 0.1, c);
    ASSERT_TRUE(fb.ok);
    EXPECT_LE(fb.i0, prev * (1 + 1e-12));
    prev = fb.i0;
  }
}

TEST(FoliatedChain, RejectsNonPositiveEps) {
  AssumptionBounds b;
  auto fb = theorem_foliated_bound(b, 3, 0.0);
  EXPECT_FALSE(fb.ok);
  EXPECT_EQ(fb.failed_link, "eps");
}

TEST(MainBound, MinkowskiUnitBall) {
  auto spec = builtin::minkowski(4);
  auto obs = foliation_observer(spec, Vec::Zero(4));
  BoundConstants c;
  c.c_n = 1.0;
  auto mb = theorem_main_bound(spec, obs, 1.0, c);
  EXPECT_NEAR(mb.bound / (kPi * kPi / 2), 1.0, 1e-9);
  EXPECT_EQ(mb.curvature_violations, 0);
}

TEST(MainBound, ScaleInvariantRatio) {
  auto base = builtin::desitter_slicing(1.0, 4);
  auto obs = foliation_observer(base, Vec::Zero(4));
  double ref = theorem_main_bound(base, obs, 0.8).bound / 0.8;
  for (double lam : {0.5, 2.0}) {
    auto spec = base.scaled(lam);
    auto o = foliation_observer(spec, Vec::Zero(4));
    EXPECT_NEAR(theorem_main_bound(spec, o, 0.8 * lam).bound / (0.8 * lam) / ref, 1.0, 1e-6) << lam;
  }
}

TEST(SynchronousChart, MinkowskiClosedForm) {
  auto spec = builtin::minkowski(4);
  auto obs = foliation_observer(spec, Vec::Zero(4));
  auto ch = build_synchronous_chart(spec, obs, 1.0);
  EXPECT_NEAR(ch.tau_p, 0.5, 1e-12);
  EXPECT_EQ(ch.valid, static_cast<int>(ch.points.size()));
  EXPECT_LT(ch.max_residual, 1e-8);
  for (const auto& pt : ch.points) {
    Vec d = pt.x - ch.q;
    double tau = std::sqrt(d[0] * d[0] - d.tail(3).squaredNorm());
    EXPECT_NEAR(pt.tau, tau, 1e-10);
    // gN is Riemannian: g + 2 dtau dtau with dtau timelike unit.
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Mat>(pt.gN).eigenvalues().minCoeff(), 0.0);
  }
}

TEST(SynchronousChart, DeSitterAgainstShooting) {
  auto spec = builtin::desitter_slicing(1.0, 4);
  auto obs = foliation_observer(spec, Vec::Zero(4));
  auto ch = build_synchronous_chart(spec, obs, 0.4);
  EXPECT_EQ(ch.valid, static_cast<int>(ch.points.size()));
  for (size_t i = 0; i < ch.points.size(); i += 7) {
    const auto& pt = ch.points[i];
    EXPECT_NEAR(pt.tau, tau_oracle(spec, ch.q, pt.x), 1e-4);
  }
  EXPECT_GT(ch.residual_ok_fraction, 0.99);
}

TEST(Convexity, MinkowskiEigenvalues) {
  auto spec = builtin::minkowski(4);
  auto obs = foliation_observer(spec, Vec::Zero(4));
  auto ch = build_synchronous_chart(spec, obs, 1.0);
  auto cv = convexity_check(spec, obs, ch, 1e-6);
  ASSERT_GT(cv.evaluated, 0);
  EXPECT_NEAR(cv.min_eig, 2.0, 1e-6);
  EXPECT_NEAR(cv.max_eig, 2.0, 1e-6);
  EXPECT_EQ(cv.in_band, cv.evaluated);
  EXPECT_LT(cv.tau_flat_deviation, 1e-6);
  EXPECT_EQ(cv.tau_band_violations, 0);
}

TEST(Convexity, DeSitterWithinBand) {
  auto spec = builtin::desitter_slicing(1.0, 4);
  auto obs = foliation_observer(spec, Vec::Zero(4));
  auto ch = build_synchronous_chart(spec, obs, 0.2);
  auto cv = convexity_check(spec, obs, ch, 1e-3);
  ASSERT_GT(cv.evaluated, 0);
  EXPECT_GE(cv.min_eig, 2.0 - 1e-3);
  EXPECT_LE(cv.max_eig, 2.0 + 1e-3);
  EXPECT_EQ(cv.in_band, cv.evaluated);
  EXPECT_EQ(cv.tau_band_violations, 0);
}

TEST(Report, CsvAndText) {
  auto spec = builtin::minkowski(3);
  auto obs = foliation_observer(spec, Vec::Zero(3));
  RadiusOptions opt;
  opt.loop_search = false;
  auto rep = injectivity_radius(spec, obs, 2.0, opt);
  std::string h = csv_header(rep), row = csv_row(rep, "mink");
  EXPECT_EQ(std::count(h.begin(), h.end(), ','), std::count(row.begin(), row.end(), ','));
  EXPECT_NE(report_text(rep).find("inj estimate"), std::string::npos);
}
