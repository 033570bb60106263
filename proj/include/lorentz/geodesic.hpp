#pragma once

#include <memory>
#include <vector>

#include "lorentz/frames.hpp"
#include "lorentz/ode.hpp"

namespace lorentz {

// Joint ODE along one geodesic: position, velocity, optionally parallel-transported vectors
// (chart components, as columns of E), Jacobi data in frame components (A = a, B = a'),
// and the running integral of det(A)/s used for cone volumes.
struct RaySetup {
  Vec p;
  Vec v;
  Mat E;   // N x k transported vectors; must be a full g-orthonormal frame when Jacobi data is used
  Mat A0;  // N x m initial Jacobi values (frame components)
  Mat B0;  // N x m initial Jacobi derivatives
  bool volume = false;  // needs m = N
};

struct RayState {
  double s = 0.0;
  Vec x;
  Vec v;
  Mat E;
  Mat A;
  Mat B;
  double volume = 0.0;
};

class Ray {
 public:
  int dim = 0;
  int transported = 0;
  int jacobi = 0;
  bool has_volume = false;
  OdeTrajectory traj;

  size_t size() const { return traj.s.size(); }
  double s_end() const { return traj.s_end(); }
  Termination termination() const { return traj.termination; }
  RayState node(size_t i) const;
  // Exact (re-integrated) state at parameter s.
  RayState at(double s) const;
  RayState unpack(const State& y, double s) const;
};

Ray integrate_ray(const MetricSpec& spec, const RaySetup& setup, double s_max, const IntegratorOptions& opt,
                  std::vector<double> stops = {});

struct GeodesicSample {
  double s = 0.0;
  Vec x;
  Vec v;
};

struct GeodesicSolution {
  std::vector<GeodesicSample> samples;
  Vec p;
  Vec v0;
  double max_step = 0.0;
  Termination termination = Termination::reached_smax;
  IntegratorOptions options;
};

// Samples at every accepted step plus `stops`; tol overrides options.tol when positive.
GeodesicSolution integrate_geodesic(const MetricSpec& spec, const Vec& p, const Vec& v0, double s_max,
                                    double tol = -1.0, IntegratorOptions options = {},
                                    std::vector<double> stops = {});

// Largest |g(v,v)(s) - g(v,v)(0)| over the samples.
double norm_drift(const MetricSpec& spec, const GeodesicSolution& geo);

// V(s) at every sample of geo, integrated jointly with the geodesic from its initial data.
std::vector<Vec> parallel_transport(const MetricSpec& spec, const GeodesicSolution& geo, const Vec& V0);

struct TransportedFrame {
  std::vector<double> s;
  std::vector<Mat> E;
};
TransportedFrame transport_frame(const MetricSpec& spec, const GeodesicSolution& geo, const Mat& frame0);

struct ExpResult {
  bool ok = false;
  Vec x;  // gamma(1)
  Vec v;  // gamma'(1)
  Termination termination = Termination::reached_smax;
};

// exp_p(E y): y holds frame components with respect to the observer frame E at p.
ExpResult exp_map(const MetricSpec& spec, const OrthoFrame& frame, const Vec& y,
                  const IntegratorOptions& opt = {});
ExpResult exp_map(const MetricSpec& spec, const Observer& obs, const Vec& y, const IntegratorOptions& opt = {});

struct NormProfileRow {
  double s = 0.0;
  double norm_transported = 0.0;  // |gamma'|_{T_gamma}
  double norm_foliation = 0.0;    // |gamma'|_{T} for the foliation normal (NaN if not foliated)
};

struct NormProfile {
  std::vector<NormProfileRow> rows;
  double K3 = 0.0;
  double max_transport_drift = 0.0;
  double max_rate = 0.0;      // max |d/ds |gamma'|_T^{-1}| between samples
  int band_violations = 0;     // samples where the rate exceeds K3
  Termination termination = Termination::reached_smax;
};

// direction: unit frame components. K3 < 0 measures it from the metric around p.
NormProfile radial_norm_profile(const MetricSpec& spec, const Observer& obs, const Vec& direction, double s_max,
                                double K3 = -1.0, int samples = 50);

}  // namespace lorentz
