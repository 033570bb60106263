#include <gtest/gtest.h>

#include <cmath>

#include "lorentz/geodesic.hpp"

using namespace lorentz;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<int>(v.size()));
  int i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

}  // namespace

TEST(Geodesic, MinkowskiStraightLine) {
  auto spec = builtin::minkowski(4);
  Vec p = vec({0.1, 1, 2, 3}), v = vec({1.5, 0.3, -0.2, 0.7});
  auto geo = integrate_geodesic(spec, p, v, 3.0);
  EXPECT_EQ(geo.termination, Termination::reached_smax);
  for (const auto& smp : geo.samples) EXPECT_LT((smp.x - (p + smp.s * v)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Geodesic, PhotonSphereOrbit) {
  // Circular null orbit at r = 3M: v^2 = 1, v^t = sqrt(3) from g_tt = -1/3; one revolution is s = 6 pi.
  auto spec = builtin::schwarzschild(1.0);
  auto geo = integrate_geodesic(spec, vec({0, 3, 0, 0}), vec({std::sqrt(3.0), 0, 1, 0}), 6 * kPi);
  ASSERT_EQ(geo.termination, Termination::reached_smax);
  double worst = 0.0;
  for (const auto& smp : geo.samples) worst = std::max(worst, std::abs(smp.x.tail(3).norm() - 3.0));
  EXPECT_LT(worst, 1e-6);
  EXPECT_LT((geo.samples.back().x.tail(3) - vec({3, 0, 0})).norm(), 1e-5);
}

TEST(Geodesic, DeSitterPastTimelikeLine) {
  auto spec = builtin::desitter_slicing(1.0, 4);
  auto geo = integrate_geodesic(spec, Vec::Zero(4), vec({-1, 0, 0, 0}), 2.0);
  for (const auto& smp : geo.samples) EXPECT_NEAR(smp.x[0], -smp.s, 1e-10);
}

TEST(Geodesic, SchwarzschildConservation) {
  auto spec = builtin::schwarzschild(1.0);
  Vec p = vec({0, 8, 0, 0});
  Vec v = vec({1.2, -0.3, 0.4, 0.1});
  auto geo = integrate_geodesic(spec, p, v, 1.0);
  EXPECT_LT(norm_drift(spec, geo), 1e-8);
  auto obs = make_observer(spec, p, vec({1, 0.1, 0, 0}));
  auto fr = complete_frame(spec, obs);
  auto tf = transport_frame(spec, geo, fr.E);
  for (size_t i = 0; i < tf.s.size(); ++i)
    EXPECT_LT(eta_residual(tf.E[i], spec.metric(geo.samples[i].x)), 1e-8);
  // Self-transport of the velocity.
  auto V = parallel_transport(spec, geo, v);
  for (size_t i = 0; i < V.size(); ++i) EXPECT_LT((V[i] - geo.samples[i].v).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Geodesic, LeavesChart) {
  auto spec = builtin::schwarzschild(1.0);
  auto geo = integrate_geodesic(spec, vec({0, 6, 0, 0}), vec({1, -1, 0, 0}), 10.0);
  EXPECT_EQ(geo.termination, Termination::left_chart);
  EXPECT_NEAR(geo.samples.back().x.tail(3).norm(), 2.5, 1e-6);
}

TEST(Geodesic, ExpMap) {
  auto flat = builtin::minkowski(4);
  auto obs = make_observer(flat, vec({0, 1, 1, 1}), vec({std::cosh(0.3), std::sinh(0.3), 0, 0}));
  auto fr = complete_frame(flat, obs);
  Vec y = vec({0.5, -0.2, 1.0, 0.3});
  auto r = exp_map(flat, fr, y);
  ASSERT_TRUE(r.ok);
  EXPECT_LT((r.x - (obs.p + fr.E * y)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((exp_map(flat, fr, Vec::Zero(4)).x - obs.p).norm(), 1e-15);

  auto torus = builtin::flat_spatial_torus(2.0, 4);
  auto tobs = make_observer(torus, Vec::Zero(4), vec({1, 0, 0, 0}));
  auto e = exp_map(torus, tobs, vec({0, 2, 0, 0}));
  EXPECT_LT(torus.domain().displacement(tobs.p, e.x).norm(), 1e-12);
}

TEST(Geodesic, ExpMapHomogeneity) {
  auto spec = builtin::schwarzschild(1.0);
  auto obs = foliation_observer(spec, vec({0, 7, 1, 0}));
  auto fr = complete_frame(spec, obs);
  Vec y = vec({0.4, 0.8, -0.5, 0.3});
  auto geo = integrate_geodesic(spec, obs.p, fr.E * y, 1.0, -1.0, {}, {0.5});
  auto half = exp_map(spec, fr, 0.5 * y);
  for (const auto& smp : geo.samples)
    if (smp.s == 0.5) EXPECT_LT((smp.x - half.x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Geodesic, NormProfiles) {
  auto flat = builtin::minkowski(4);
  auto obs = foliation_observer(flat, Vec::Zero(4));
  auto prof = radial_norm_profile(flat, obs, vec({0, 1, 0, 0}), 2.0);
  for (const auto& r : prof.rows) {
    EXPECT_NEAR(r.norm_transported, 1.0, 1e-12);
    EXPECT_NEAR(r.norm_foliation, 1.0, 1e-12);
  }
  auto ds = builtin::desitter_slicing(1.0, 4);
  auto dobs = foliation_observer(ds, Vec::Zero(4));
  Vec dir = vec({0.3, 0.9, 0.3, 0.0});
  dir.normalize();
  auto dp = radial_norm_profile(ds, dobs, dir, 1.0);
  EXPECT_LT(dp.max_transport_drift, 1e-8);
  EXPECT_EQ(dp.band_violations, 0);
}
