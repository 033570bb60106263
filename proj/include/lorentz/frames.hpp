#pragma once

#include <vector>

#include "lorentz/spacetime.hpp"

namespace lorentz {

// A point with a future-oriented unit timelike vector.
struct Observer {
  Vec p;
  Vec T;
};

// Normalizes T to g(T, T) = -1 at p. Throws SpecError if T is not future timelike.
Observer make_observer(const MetricSpec& spec, const Vec& p, const Vec& T);
// Unit normal of the t = const slices: T = -grad t / |grad t|.
Observer foliation_observer(const MetricSpec& spec, const Vec& p);

// Columns E_0 = T, E_1..E_n with g(E_a, E_b) = eta_ab.
struct OrthoFrame {
  Vec p;
  Mat E;
};

OrthoFrame complete_frame(const MetricSpec& spec, const Observer& obs);
// Gram-Schmidt at a point against a metric matrix; T must be g-unit timelike.
Mat complete_frame(const Mat& g, const Vec& T);
// Coframe: E^{-1} = eta E^T g, so frame components of a vector V are E^{-1} V.
Mat frame_inverse(const Mat& E, const Mat& g);
// Largest |g(E_a, E_b) - eta_ab|.
double eta_residual(const Mat& E, const Mat& g);

struct ReferenceMetricAt {
  Vec p;
  Mat gT;
};

// gT = g + 2 T_flat T_flat.
Mat reference_metric(const Mat& g, const Vec& T);
ReferenceMetricAt reference_metric_at(const MetricSpec& spec, const Observer& obs);

// Dense tensor with per-slot variance; data in row-major order over the slots.
struct Tensor {
  int dim = 0;
  std::vector<bool> covariant;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int dim, std::vector<bool> covariant);
  int rank() const { return static_cast<int>(covariant.size()); }
  static Tensor vector(const Vec& v);
  static Tensor covector(const Vec& w);
  static Tensor bilinear(const Mat& m);
  static Tensor christoffel(const Array3& gamma);  // slots (up, down, down)
  static Tensor riemann(const Array4& riem);       // all covariant
};

// sqrt of the full contraction with gT / gT^{-1} in every slot; gT built from (g, T).
double tensor_norm_T(const Tensor& t, const Mat& g, const Vec& T);
double tensor_norm_T(const Tensor& t, const Observer& obs, const MetricSpec& spec);
// Same, with the frame already at hand (E gT-orthonormal, e.g. a g-orthonormal frame with E_0 = T).
double tensor_norm_frame(const Tensor& t, const Mat& E, const Mat& Einv);

// Foliation bounds of the assumptions on the lapse, L_T g, curvature and the initial-slice volume.
struct AssumptionBounds {
  double K0 = 0.0;
  double K1 = 0.0;
  double K2 = 0.0;
  double K3 = 0.0;  // e^{2 K0} K1^2
  double v0 = 0.0;
  double r0 = 0.0;  // radius of the sampled region
  int samples = 0;
};

// Samples a coordinate box of half-width `radius` around p (clipped to the chart)
// with `per_axis` points per axis. Requires a foliated spec.
AssumptionBounds measure_bounds(const MetricSpec& spec, const Vec& p, double radius, int per_axis = 3);
// |L_T g|_T at x for the foliation normal.
double lie_derivative_norm(const MetricSpec& spec, const Vec& x);
// |Riem|_T at x for the foliation normal.
double riemann_norm_T(const MetricSpec& spec, const Vec& x);
// Lower estimate for vol(B_{Sigma_t}(p, 1)) in the slice through p.
double slice_ball_volume_estimate(const MetricSpec& spec, const Vec& p);

struct ConnectionGapRow {
  Vec point;
  double lhs = 0.0;        // |Gamma_gT - Gamma_g|_T
  double rhs_lie = 0.0;  // n^2 |L_T g|_T^2
  double lie_norm = 0.0;   // |L_T g|_T
  double lapse = 0.0;
};

struct ConnectionGapReport {
  std::vector<ConnectionGapRow> rows;
  double K0 = 0.0;
  double K1 = 0.0;
  double bound = 0.0;  // e^{2 K0} K1^2
  double max_lhs = 0.0;
  int violations = 0;  // rows with lhs > bound
};

// Compares the Levi-Civita connections of g and of gT (T = foliation normal) at the probe points.
ConnectionGapReport connection_gap(const MetricSpec& spec, const std::vector<Vec>& probes);

// Deterministic probe points in a box of half-width `radius` around p: a Halton sequence
// (bases 2, 3, 5, ...) mapped into the box and filtered by the chart.
std::vector<Vec> halton_probes(const MetricSpec& spec, const Vec& p, double radius, int count);

// Volume of the Euclidean unit ball in R^k.
double unit_ball_volume(int k);
// Area of the unit sphere S^{k-1} in R^k.
double unit_sphere_area(int k);

}  // namespace lorentz
