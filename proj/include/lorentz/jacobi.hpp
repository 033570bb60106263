#pragma once

#include <optional>
#include <vector>

#include "lorentz/directions.hpp"
#include "lorentz/geodesic.hpp"

namespace lorentz {

// Jacobi field in frame components a(s) (J = E a) along a geodesic; F = |J|_{T_gamma} = |a|.
struct JacobiSolution {
  std::vector<double> s;
  std::vector<Vec> a;
  std::vector<Vec> da;
  std::vector<double> F;
  Termination termination = Termination::reached_smax;
};

// J0, dJ0 are frame components with respect to frame0 (a g-orthonormal frame at geo.p).
JacobiSolution integrate_jacobi(const MetricSpec& spec, const GeodesicSolution& geo, const Mat& frame0,
                                const Vec& J0, const Vec& dJ0);

// Ray from frame.p with velocity E w carrying Jacobi fields A(0) = 0, A'(0) = columns of P.
// P = identity gives the full exponential-map Jacobian; a screen basis gives the null version.
Ray jacobian_ray(const MetricSpec& spec, const OrthoFrame& frame, const Vec& w, const Mat& P, double s_max,
                 const IntegratorOptions& opt, bool volume = false, std::vector<double> stops = {});
// phi(s) = det(P^T A(s)) / s^q with q = columns of P; 1 at s = 0.
double phi_of(const RayState& st, const Mat& P);
// Orthonormal basis (N x (N-2)) of the complement of span{e_0, w} in frame components.
Mat null_screen(const Vec& w);

// phi(s) along direction w (unit frame components) at parameter s.
double exp_jacobian(const MetricSpec& spec, const OrthoFrame& frame, const Vec& w, double s,
                    const IntegratorOptions& opt = {});
double exp_jacobian(const MetricSpec& spec, const Observer& obs, const Vec& w, double s,
                    const IntegratorOptions& opt = {});

struct ConjugateOptions {
  DirectionSet directions = DirectionSet::all;
  int n_dirs = 64;
  double zero_tol = 1e-7;   // |phi| below this at a local minimum counts as a (touching) zero
  double root_tol = 1e-10;  // bracketing tolerance on s
  IntegratorOptions integrator;
};

struct ConjugateRow {
  Vec direction;
  std::optional<double> s_star;
  double searched = 0.0;  // parameter range actually covered
  Termination termination = Termination::reached_smax;
  bool touching = false;  // zero found as a local minimum of |phi| rather than a sign change
};

struct ConjugateSearch {
  std::vector<ConjugateRow> rows;
  std::optional<double> min_s;
  double r_max = 0.0;
  double searched = 0.0;  // min over rows of the covered range
  int failures = 0;        // rows that stopped before r_max without a zero
  bool null_cone = false;
};

// First zero of phi on (0, s_end] of a Jacobian ray, if any.
std::optional<double> first_phi_zero(const Ray& ray, const Mat& P, double zero_tol, double root_tol,
                                     bool* touching = nullptr);

ConjugateSearch conjugate_radius(const MetricSpec& spec, const Observer& obs, double r_max,
                                 const ConjugateOptions& opt = {});
// Directions are always the past null set; opt.directions is ignored.
ConjugateSearch null_conjugate_radius(const MetricSpec& spec, const Observer& obs, double r_max,
                                      const ConjugateOptions& opt = {});

}  // namespace lorentz
