#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lorentz/frames.hpp"

using namespace lorentz;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<int>(v.size()));
  int i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

}  // namespace

TEST(Frames, MinkowskiStandardBasis) {
  auto spec = builtin::minkowski(4);
  auto obs = make_observer(spec, Vec::Zero(4), vec({1, 0, 0, 0}));
  auto fr = complete_frame(spec, obs);
  EXPECT_LT((fr.E - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-15);
  auto gT = reference_metric_at(spec, obs).gT;
  EXPECT_LT((gT - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Frames, BoostedObserver) {
  auto spec = builtin::minkowski(4);
  double a = 0.8;
  auto obs = make_observer(spec, Vec::Zero(4), vec({std::cosh(a), std::sinh(a), 0, 0}));
  auto fr = complete_frame(spec, obs);
  EXPECT_LT(eta_residual(fr.E, spec.metric(obs.p)), 1e-12);
  Mat gT = reference_metric_at(spec, obs).gT;
  Eigen::SelfAdjointEigenSolver<Mat> es(gT);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  EXPECT_NEAR(gT.determinant(), 1.0, 1e-12);
}

TEST(Frames, SchwarzschildStaticObserver) {
  auto spec = builtin::schwarzschild(1.0);
  Vec p = vec({0, 6, 0, 0});
  auto obs = make_observer(spec, p, vec({1.0 / std::sqrt(1 - 2.0 / 6), 0, 0, 0}));
  EXPECT_NEAR(obs.T.dot(spec.metric(p) * obs.T), -1.0, 1e-12);
  auto fr = complete_frame(spec, obs);
  EXPECT_LT(eta_residual(fr.E, spec.metric(p)), 1e-12);
  EXPECT_NEAR(fr.E(1, 1), std::sqrt(1 - 2.0 / 6), 1e-12);
}

TEST(Frames, RejectsBadObservers) {
  auto spec = builtin::minkowski(3);
  EXPECT_THROW(make_observer(spec, Vec::Zero(3), vec({1, 2, 0})), SpecError);
  EXPECT_THROW(make_observer(spec, Vec::Zero(3), vec({-1, 0, 0})), SpecError);
}

TEST(Frames, ReferenceMetricIdentities) {
  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  for (const auto& spec : {builtin::schwarzschild(1.0), builtin::desitter_slicing(1.0, 4), builtin::flrw()}) {
    Vec p = vec({0.3, 5, 1, -2});
    Mat g = spec.metric(p);
    auto obs = make_observer(spec, p, vec({1.3, 0.2, -0.1, 0.05}).cwiseProduct(vec({1, 0.1, 0.1, 0.1})) + vec({0, 0, 0, 0}));
    Mat gT = reference_metric_at(spec, obs).gT;
    EXPECT_NEAR(obs.T.dot(gT * obs.T), 1.0, 1e-12);
    Eigen::LLT<Mat> llt(gT);
    EXPECT_EQ(llt.info(), Eigen::Success);
    EXPECT_NEAR(std::abs(g.determinant()) / gT.determinant(), 1.0, 1e-10);
    for (int i = 0; i < 100; ++i) {
      Vec V(4), W(4);
      for (int a = 0; a < 4; ++a) {
        V[a] = nd(rng);
        W[a] = nd(rng);
      }
      double closed = V.dot(g * W) + 2.0 * obs.T.dot(g * V) * obs.T.dot(g * W);
      EXPECT_NEAR(V.dot(gT * W), closed, 1e-10);
    }
    // Frame sum agrees with the closed form.
    auto fr = complete_frame(spec, obs);
    Mat Einv = frame_inverse(fr.E, g);
    EXPECT_LT((Einv.transpose() * Einv - gT).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Frames, FoliatedReferenceMetric) {
  auto spec = builtin::schwarzschild(1.0);
  Vec p = vec({0, 4, 1, 0});
  auto obs = foliation_observer(spec, p);
  Mat g = spec.metric(p);
  Mat gT = reference_metric_at(spec, obs).gT;
  Mat expect = g;
  expect(0, 0) = -g(0, 0);
  EXPECT_LT((gT - expect).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Frames, TensorNorms) {
  auto spec = builtin::minkowski(4);
  auto obs = make_observer(spec, Vec::Zero(4), vec({1, 0, 0, 0}));
  EXPECT_NEAR(tensor_norm_T(Tensor::vector(obs.T), obs, spec), 1.0, 1e-15);
  EXPECT_NEAR(tensor_norm_T(Tensor::vector(vec({1, 1, 0, 0})), obs, spec), std::sqrt(2.0), 1e-15);
  // Boosted observer: a null vector V = T + E_1 still has |V|_T^2 = 2.
  auto boosted = make_observer(spec, Vec::Zero(4), vec({std::cosh(0.5), 0, std::sinh(0.5), 0}));
  auto fr = complete_frame(spec, boosted);
  Vec V = fr.E.col(0) + fr.E.col(1);
  EXPECT_NEAR(tensor_norm_T(Tensor::vector(V), boosted, spec), std::sqrt(2.0), 1e-12);

  std::mt19937 rng(3);
  std::uniform_int_distribution<int> pick(0, 63);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor t(4, {false, true, true});
    EXPECT_EQ(tensor_norm_T(t, boosted, spec), 0.0);
    t.data[static_cast<size_t>(pick(rng))] = 1e-3;
    EXPECT_GT(tensor_norm_T(t, boosted, spec), 0.0);
  }
}

TEST(Frames, RiemannNormDeSitterOracle) {
  // Constant curvature K = 1: in an orthonormal frame R_abcd = eta_ac eta_bd - eta_ad eta_bc,
  // so |Riem|^2 = 2 * N (N - 1) entries of magnitude one.
  auto spec = builtin::desitter_slicing(1.0, 4);
  Vec p = vec({0, 0, 0, 0});
  EXPECT_NEAR(riemann_norm_T(spec, p), std::sqrt(24.0), 1e-10);
}

TEST(Frames, LieDerivativeNormAndBounds) {
  auto spec = builtin::desitter_slicing(1.0, 4);
  // L_ij = 2 g_ij: |L|^2 = 4 * 3.
  EXPECT_NEAR(lie_derivative_norm(spec, vec({0.2, 0, 0, 0})), std::sqrt(12.0), 1e-12);
  auto b = measure_bounds(builtin::minkowski(4), Vec::Zero(4), 0.5);
  EXPECT_EQ(b.K0, 0.0);
  EXPECT_EQ(b.K1, 0.0);
  EXPECT_EQ(b.K2, 0.0);
  EXPECT_NEAR(b.v0, unit_ball_volume(3), 1e-14);
}

TEST(Frames, ConnectionGapFlat) {
  auto spec = builtin::minkowski(4);
  auto rep = connection_gap(spec, halton_probes(spec, Vec::Zero(4), 1.0, 10));
  EXPECT_LT(rep.max_lhs, 1e-12);
  EXPECT_EQ(rep.violations, 0);
  auto st = builtin::static_sphere(1.0, 4);
  auto rs = connection_gap(st, halton_probes(st, Vec::Zero(4), 0.5, 10));
  EXPECT_LT(rs.max_lhs, 1e-8);
}
