#include <gtest/gtest.h>

#include <cmath>

#include "lorentz/jacobi.hpp"

using namespace lorentz;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<int>(v.size()));
  int i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

}  // namespace

TEST(Jacobi, MinkowskiLinearGrowth) {
  auto spec = builtin::minkowski(4);
  auto obs = foliation_observer(spec, Vec::Zero(4));
  auto fr = complete_frame(spec, obs);
  auto geo = integrate_geodesic(spec, obs.p, fr.E * vec({1, 0, 0, 0}), 3.0);
  auto js = integrate_jacobi(spec, geo, fr.E, Vec::Zero(4), vec({0, 0.6, 0.8, 0}));
  for (size_t i = 0; i < js.s.size(); ++i) EXPECT_NEAR(js.F[i], js.s[i], 1e-12);
  for (double s : {0.5, 1.0, 2.5}) EXPECT_NEAR(exp_jacobian(spec, fr, vec({0.6, 0, 0.8, 0}), s), 1.0, 1e-12);
}

TEST(Jacobi, DeSitterSinh) {
  auto spec = builtin::desitter_slicing(1.0, 4);
  auto obs = foliation_observer(spec, Vec::Zero(4));
  auto fr = complete_frame(spec, obs);
  auto geo = integrate_geodesic(spec, obs.p, fr.E.col(0), 2.0, -1.0, {}, {0.5, 1.0, 1.5});
  auto js = integrate_jacobi(spec, geo, fr.E, Vec::Zero(4), vec({0, 0, 1, 0}));
  for (size_t i = 1; i < js.s.size(); ++i) EXPECT_NEAR(js.F[i] / std::sinh(js.s[i]), 1.0, 1e-6) << js.s[i];
  for (double s : {0.25, 1.0, 2.0})
    EXPECT_NEAR(exp_jacobian(spec, fr, vec({1, 0, 0, 0}), s) / std::pow(std::sinh(s) / s, 3), 1.0, 1e-6);
}

TEST(Jacobi, TangentialField) {
  auto spec = builtin::schwarzschild(1.0);
  auto obs = foliation_observer(spec, vec({0, 6, 0, 0}));
  auto fr = complete_frame(spec, obs);
  Vec w = vec({0.5, 0.5, 0.7, 0.1});
  auto geo = integrate_geodesic(spec, obs.p, fr.E * w, 1.0);
  auto js = integrate_jacobi(spec, geo, fr.E, Vec::Zero(4), w);
  for (size_t i = 0; i < js.s.size(); ++i) EXPECT_LT((js.a[i] - js.s[i] * w).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Jacobi, Linearity) {
  auto spec = builtin::schwarzschild(1.0);
  auto obs = foliation_observer(spec, vec({0, 6, 1, 0}));
  auto fr = complete_frame(spec, obs);
  auto geo = integrate_geodesic(spec, obs.p, fr.E * vec({1, 0.3, 0.2, 0}), 1.0, -1.0, {}, {0.5});
  Vec a0 = vec({0, 1, 0, 0}), b0 = vec({0, 0, 1, 0.5}), c0 = vec({0.1, 0, 0.2, 0}), d0 = vec({0, 0.3, 0, 1});
  auto j1 = integrate_jacobi(spec, geo, fr.E, a0, b0);
  auto j2 = integrate_jacobi(spec, geo, fr.E, c0, d0);
  auto j3 = integrate_jacobi(spec, geo, fr.E, 2.0 * a0 - 3.0 * c0, 2.0 * b0 - 3.0 * d0);
  for (size_t i = 0; i < j1.s.size(); ++i)
    EXPECT_LT((j3.a[i] - (2.0 * j1.a[i] - 3.0 * j2.a[i])).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Jacobi, SphereConjugateRadius) {
  ConjugateOptions opt;
  opt.directions = DirectionSet::spatial;
  opt.n_dirs = 12;
  for (double K : {1.0, 4.0}) {
    auto spec = builtin::static_sphere(K, 4);
    // Off the stereographic origin, so that antipodal points stay at finite coordinates.
    auto obs = foliation_observer(spec, vec({0, 0.5 / std::sqrt(K), 0.3 / std::sqrt(K), 0}));
    auto res = conjugate_radius(spec, obs, 5.0, opt);
    ASSERT_TRUE(res.min_s.has_value());
    EXPECT_NEAR(*res.min_s, kPi / std::sqrt(K), 1e-3);
    for (const auto& row : res.rows) EXPECT_TRUE(row.s_star.has_value());
  }
}

TEST(Jacobi, MinkowskiHasNoConjugatePoints) {
  auto spec = builtin::minkowski(4);
  auto obs = foliation_observer(spec, Vec::Zero(4));
  ConjugateOptions opt;
  opt.n_dirs = 32;
  auto res = conjugate_radius(spec, obs, 10.0, opt);
  EXPECT_FALSE(res.min_s.has_value());
  EXPECT_EQ(res.failures, 0);
  auto nres = null_conjugate_radius(spec, obs, 10.0, opt);
  EXPECT_FALSE(nres.min_s.has_value());
}

TEST(Jacobi, ConjugateInvariantUnderRescaling) {
  // Direction w and 2w: the first zero in affine parameter halves, the geometric length is unchanged.
  auto spec = builtin::static_sphere(1.0, 4);
  auto obs = foliation_observer(spec, vec({0, 0.5, 0.3, 0}));
  auto fr = complete_frame(spec, obs);
  Vec w = vec({0.2, 0.9, 0.3, 0.1});
  w.normalize();
  Mat I = Mat::Identity(4, 4);
  auto r1 = jacobian_ray(spec, fr, w, I, 6.0, {});
  auto r2 = jacobian_ray(spec, fr, 2.0 * w, I, 3.0, {});
  auto z1 = first_phi_zero(r1, I, 1e-7, 1e-12);
  auto z2 = first_phi_zero(r2, I, 1e-7, 1e-12);
  ASSERT_TRUE(z1 && z2);
  EXPECT_NEAR(*z1, 2.0 * *z2, 1e-6);
}

TEST(Jacobi, NullScreenNormalization) {
  auto spec = builtin::schwarzschild(1.0);
  auto obs = foliation_observer(spec, vec({0, 10, 0, 0}));
  auto fr = complete_frame(spec, obs);
  for (const Vec& w : direction_set(DirectionSet::null_past, 4, 6)) {
    Mat S = null_screen(w);
    auto ray = jacobian_ray(spec, fr, w, S, 1e-3, {});
    EXPECT_NEAR(phi_of(ray.node(ray.size() - 1), S), 1.0, 1e-6);
  }
}

TEST(Jacobi, SchwarzschildNullConjugatePoints) {
  auto spec = builtin::schwarzschild(1.0);
  auto obs = foliation_observer(spec, vec({0, 10, 0, 0}));
  ConjugateOptions opt;
  opt.n_dirs = 24;
  auto res = null_conjugate_radius(spec, obs, 80.0, opt);
  ASSERT_TRUE(res.min_s.has_value());
  // Dense rescan of the direction achieving the minimum with ten times smaller steps.
  auto fr = complete_frame(spec, obs);
  for (const auto& row : res.rows) {
    if (!row.s_star || *row.s_star != *res.min_s) continue;
    IntegratorOptions fine;
    fine.h_max = 0.01;
    Mat S = null_screen(row.direction);
    auto ray = jacobian_ray(spec, fr, row.direction, S, 80.0, fine);
    auto z = first_phi_zero(ray, S, 1e-7, 1e-12);
    ASSERT_TRUE(z.has_value());
    EXPECT_NEAR(*z, *row.s_star, 1e-6);
  }
}
