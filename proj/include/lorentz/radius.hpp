#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lorentz/jacobi.hpp"

namespace lorentz {

// Ordered key/value notes attached to reports (grid sizes, tolerances, counts, failures).
struct Diagnostics {
  std::vector<std::pair<std::string, std::string>> items;
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  std::string get(const std::string& key) const;  // "" if absent
};

// ---- geodesic loops --------------------------------------------------------------------

struct LoopOptions {
  int grid_density = 8;  // lattice points per search radius along each axis
  double c2 = 0.0;       // candidate pairs need |y_i - y_j| > 4 delta e^{c2}
  int refine = 12;       // best-scored candidates sent to the shooting solve
  double tol = 1e-10;    // residual of exp(y_i) = exp(y_j), relative to max(1, r)
  IntegratorOptions scan{1e-9, 1e-2, 1.0};
  IntegratorOptions integrator;
};

struct LoopPair {
  Vec y1;  // frame components at p (for null searches: the spatial parameter u, y = (-|u|, u)/sqrt 2)
  Vec y2;
  double length = 0.0;    // |y1|_T + |y2|_T
  double residual = 0.0;  // |exp(y1) - exp(y2)|_T at the end of the solve
};

struct LoopSearch {
  std::optional<double> shortest;
  std::vector<LoopPair> confirmed;
  double radius = 0.0;
  double cell = 0.0;  // hash cell size delta
  int grid_points = 0;
  int failed_points = 0;  // lattice points whose geodesic left the chart
  int candidates = 0;
  int refined = 0;
  int diverged = 0;   // shooting solves that did not converge
  int collapsed = 0;  // solves that ended on a single geodesic
  bool null_rays = false;
};

// Distinct geodesics from p meeting again inside exp(B_T(0, r)).
LoopSearch detect_short_loops(const MetricSpec& spec, const Observer& obs, double r, const LoopOptions& opt = {});
// Same for past null geodesics; r bounds the gT-length of each ray.
LoopSearch detect_null_loops(const MetricSpec& spec, const Observer& obs, double r, const LoopOptions& opt = {});

// ---- theorem constants -------------------------------------------------------------------

struct BoundConstants {
  double c_n = 0.125;  // main-bound constant, same for every dimension
  double kappa = 0.25;  // i1 surrogate factor
  double i1 = 0.0;      // > 0 overrides the surrogate
  // Chain values (filled by theorem_foliated_bound).
  double K = 0.0;
  double i2 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0;
};

struct FoliatedBound {
  bool ok = false;
  std::string failed_link;  // set when an intermediate is not positive
  double i0 = 0.0;
  BoundConstants chain;
  std::string r2_limit;  // which condition fixed r2
};

// i1 = min(1, v0/omega_n) min(1, 1/sqrt K2) kappa unless constants.i1 > 0.
double i1_surrogate(const AssumptionBounds& b, int spatial_dim, const BoundConstants& constants = {});
FoliatedBound theorem_foliated_bound(const AssumptionBounds& b, int spatial_dim, double eps,
                                     const BoundConstants& constants = {});

struct MainBound {
  double bound = 0.0;
  double r0 = 0.0;
  double c_n = 0.0;
  double volume = 0.0;  // vol_g(B_T(p, c_n r0))
  double coverage = 1.0;
  int rays = 0;
  int curvature_samples = 0;
  int curvature_violations = 0;  // samples with |Riem|_T r0^2 > 1
  double max_curvature = 0.0;
};

struct MainBoundOptions {
  int n_azimuth = 12;
  int panels = 2;
  int curvature_rays = 16;
  IntegratorOptions integrator;
};

MainBound theorem_main_bound(const MetricSpec& spec, const Observer& obs, double r0,
                             const BoundConstants& constants = {}, const MainBoundOptions& opt = {});

// ---- injectivity radius ---------------------------------------------------------------------

struct RadiusOptions {
  ConjugateOptions conjugate;
  LoopOptions loops;
  bool loop_search = true;
  bool foliated_bound = true;
  bool main_bound = true;
  double eps = 0.1;
  double r0 = 0.0;  // main-bound scale; 0 = min(r_max, 1/sqrt(|Riem|_T(p)))
  BoundConstants constants;
  MainBoundOptions main;
};

struct RadiusReport {
  std::optional<double> conj_radius;
  std::optional<double> shortest_loop;
  double inj_estimate = 0.0;
  double r_max = 0.0;
  double defined_radius = 0.0;  // exp known to be defined on B_T(0, defined_radius)
  std::optional<double> thm_foliated_bound;
  std::optional<double> thm_main_bound;
  std::optional<double> thm_null_bound;  // c1^6 r0 (null variant)
  int bound_violations = 0;              // finite bounds exceeding inj_estimate
  bool null_variant = false;
  Diagnostics diagnostics;
};

RadiusReport injectivity_radius(const MetricSpec& spec, const Observer& obs, double r_max,
                                const RadiusOptions& opt = {});

std::string report_text(const RadiusReport& r);
std::string csv_header(const RadiusReport&);
std::string csv_row(const RadiusReport& r, const std::string& label);

// ---- synchronous chart and convexity ---------------------------------------------------------

// Two-point solve from q: exp_q(E_q w) = x.
struct BoundaryHit {
  bool ok = false;
  Vec w;   // frame components at q
  Vec x;   // endpoint reached
  Vec V;   // gamma'(1), chart components
  Mat EA;  // d x / d w
  Mat EB;  // covariant derivative of the Jacobi fields at s = 1, chart components
  Mat Einv;
  int iterations = 0;
};

struct ChartPoint {
  Vec x;
  bool valid = false;
  double tau = 0.0;
  Vec dtau;      // from the Gauss lemma: -g(gamma'(1), .)/tau
  Vec dtau_fd;   // fourth-order differences of independent solves (empty if not requested)
  Mat hess;      // covariant Hessian of tau, both indices down
  Mat gN;        // g + 2 dtau dtau
  double residual = 0.0;  // | |grad tau|_g^2 + 1 | from dtau_fd (or dtau if no differences)
  Vec w;
};

struct SynchronousChart {
  Vec p;
  Vec q;
  OrthoFrame frame_q;  // E_0 = future unit tangent of the T-geodesic at q
  double r0 = 0.0;
  double half_width = 0.0;
  int per_axis = 0;
  double tau_p = 0.0;
  std::vector<ChartPoint> points;
  int valid = 0;
  double max_residual = 0.0;
  double residual_ok_fraction = 0.0;  // valid points with residual < 1e-6
};

struct ChartOptions {
  int per_axis = 3;
  double half_width = 0.0;  // 0 = r0/8
  bool fd_residual = true;
  IntegratorOptions integrator;
};

BoundaryHit solve_boundary(const MetricSpec& spec, const OrthoFrame& frame_q, const Vec& x, const Vec& w_guess,
                           const IntegratorOptions& opt = {});
// tau, gradient, Hessian and gN at x; guess = frame components of a nearby solution.
ChartPoint chart_point(const MetricSpec& spec, const OrthoFrame& frame_q, const Vec& x, const Vec& w_guess,
                       const IntegratorOptions& opt = {});
SynchronousChart build_synchronous_chart(const MetricSpec& spec, const Observer& obs, double r0,
                                         const ChartOptions& opt = {});

struct ConvexityRow {
  Vec z;  // gN-normal coordinates
  double min_eig = 0.0;
  double max_eig = 0.0;
};

struct ConvexityReport {
  double eps = 0.0;
  double radius = 0.0;     // gN-normal ball radius used
  double gamma_gap = 0.0;  // |Gamma_gN - Gamma_g|_N at p
  double curvature_N = 0.0;  // |Riem_gN|_N at p
  std::vector<ConvexityRow> rows;
  double min_eig = 0.0;
  double max_eig = 0.0;
  int in_band = 0;
  int evaluated = 0;
  double coverage = 0.0;
  // Hessian comparison for -grad^2 tau on the orthogonal complement of grad tau at the chart points.
  double curvature_g = 0.0;
  double tau_band_lo_ratio = 0.0;  // min over points of eig * tan(sqrt K tau)/sqrt K
  double tau_band_hi_ratio = 0.0;  // max over points of eig * tanh(sqrt K tau)/sqrt K
  double tau_flat_deviation = 0.0;  // max |eig tau - 1|
  int tau_band_violations = 0;
  std::string table_csv() const;
};

ConvexityReport convexity_check(const MetricSpec& spec, const Observer& obs, const SynchronousChart& chart,
                                double eps, int per_axis = 5);

}  // namespace lorentz
