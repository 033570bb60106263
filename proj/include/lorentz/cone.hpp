#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lorentz/directions.hpp"
#include "lorentz/radius.hpp"

namespace lorentz {

// ---- null-cone localization ------------------------------------------------------------------

struct ConeBounds {
  double c1 = 0.0;  // min coordinate light speed sqrt(n^2 / lambda_max(g_ij))
  double C1 = 0.0;  // max coordinate light speed sqrt(n^2 / lambda_min(g_ij))
  double C0_display = 0.0;  // smallest C0 with 1/C0 <= n^2 <= C0
  double C1_display = 0.0;  // smallest C1 with delta/C1 <= g_ij <= C1 delta
  int samples = 0;
};

// Light-speed bounds over the coordinate region t in [t_p - t_range, t_p], |x - x_p|_inf <= space_range.
ConeBounds measure_cone_bounds(const MetricSpec& spec, const Vec& p, double t_range, double space_range,
                               int per_axis = 5);

struct SliceHit {
  Vec direction;  // null direction, frame components
  double dt = 0.0;  // t_p - t > 0
  double rho = 0.0;  // |x - x_p| (coordinate)
  bool inside = true;  // within [c1 dt, C1 dt] (with tolerance)
};

struct Localization {
  ConeBounds bounds;
  double t_range = 0.0;
  std::vector<SliceHit> hits;
  int rays = 0;
  int incomplete = 0;  // rays that left the chart before the last slice
  int violations = 0;
};

// Shoots `n_rays` past null geodesics and records their slices at `slices` equally spaced depths.
Localization localize_null_cone(const MetricSpec& spec, const Observer& obs, double t_range, int n_rays = 64,
                                int slices = 8);

struct GraphPoint {
  Vec xq;           // bottom-slice point (spatial coordinates)
  Vec theta;        // unit spatial direction of the grid ray
  double rho = 0.0;  // |xq - x_p|
  bool ok = false;
  double height = 0.0;  // t of the crossing
  double F = 0.0;       // t_p - height
  bool in_annulus = true;
};

struct ConeGraph {
  ConeBounds bounds;
  double radius = 0.0;
  int radial = 0;
  std::vector<GraphPoint> points;  // direction-major, radial levels 1..radial
  double lipschitz = 0.0;          // max |delta rho| / |delta F| over radial neighbours
  int excluded = 0;
  int annulus_violations = 0;
  std::string csv() const;
};

// `directions` spatial directions times `radial` levels up to coordinate radius `radius`.
ConeGraph cone_graph(const MetricSpec& spec, const Observer& obs, double radius, int directions = 16,
                     int radial = 8);

RadiusReport null_injectivity_radius(const MetricSpec& spec, const Observer& obs, double r_max,
                                     const RadiusOptions& opt = {});

// ---- cone volumes --------------------------------------------------------------------------

enum class Orientation { future, past };

struct ConeSpec {
  Orientation orientation = Orientation::future;
  double half_angle = kPi / 8;  // cap around +-T on the unit gT-sphere; pi/4 reaches the null cone
  std::vector<WeightedDirection> directions;  // explicit list (frame components); overrides the cap
  int n_azimuth = 16;
  int panels = 2;
};

// Weighted directions of the cone's solid angle Sigma (frame components).
std::vector<WeightedDirection> cone_directions(const ConeSpec& cone, int N);
double solid_angle(const std::vector<WeightedDirection>& dirs);

struct VolumeOptions {
  bool truncate_conjugate = true;
  bool ricci_check = false;
  double K2 = 0.0;  // for the Ricci hypothesis Ric(V,V) >= -n K2 |g(V,V)|
  IntegratorOptions integrator;
};

struct VolumeProfile {
  std::vector<double> radii;
  std::vector<double> volume;
  double solid_angle = 0.0;
  int rays = 0;
  int chart_truncated = 0;
  int conjugate_truncated = 0;
  int failed = 0;
  double coverage = 1.0;  // weight fraction of rays that reached the largest radius or a conjugate point
  int ricci_samples = 0;
  int ricci_violations = 0;
};

// vol(exp(cone up to r_k)) = sum_w weight * int_0^r phi(s; w) s^n ds for each radius.
VolumeProfile volume_profile(const MetricSpec& spec, const OrthoFrame& frame,
                             const std::vector<WeightedDirection>& dirs, const std::vector<double>& radii,
                             const VolumeOptions& opt = {});

double future_cone_volume(const MetricSpec& spec, const Observer& obs, const ConeSpec& cone, double r,
                          const VolumeOptions& opt = {}, VolumeProfile* details = nullptr);

// solid_angle * int_0^r (sinh(sqrt K2 s)/sqrt K2)^n ds.
double model_volume(double K2, double r, int n, double solid_angle = 1.0);

struct VolumeCurve {
  std::vector<double> radii;
  std::vector<double> volume;
  std::vector<double> model;
  std::vector<double> ratio;
  double K2 = 0.0;
  double tolerance = 1e-6;
  int violations = 0;  // ratio[k+1] > ratio[k] (1 + tolerance)
  VolumeProfile profile;
  std::string csv() const;
};

VolumeCurve comparison_ratio_curve(const MetricSpec& spec, const Observer& obs, const ConeSpec& cone,
                                   const std::vector<double>& radii, double K2, double tolerance = 1e-6,
                                   const VolumeOptions& opt = {});

struct CorollaryBound {
  double bound = 0.0;
  double c_sigma = 0.0;
  double gap = 0.0;  // gT angle between Sigma and the null cone
  double volume = 0.0;
  bool vacuous = false;  // vol(FC_Sigma(p, r0)) < v0
};

// c_sigma < 0 selects the default c_n * gap / (pi/4).
CorollaryBound corollary_volume_bound(const MetricSpec& spec, const Observer& obs, const ConeSpec& cone, double r0,
                                      double v0, double c_sigma = -1.0, double c_n = 0.125);

}  // namespace lorentz
