#pragma once

#include <string>
#include <vector>

#include "lorentz/core.hpp"

namespace lorentz {

// Deterministic, roughly uniform points on the unit sphere S^{k-1} in R^k.
// k = 1: {+1, -1}; k = 2: equally spaced angles; k = 3: spherical Fibonacci;
// k = 4: super-Fibonacci spirals; k > 4: latitude rings times lower-dimensional lattices.
std::vector<Vec> sphere_lattice(int k, int count);

struct WeightedDirection {
  Vec dir;
  double weight = 0.0;  // solid-angle weight, sums to the cap area
};

// Quadrature on the cap {w in S^{k-1} : angle(w, e_0) <= half_angle} of R^k:
// composite 10-point Gauss-Legendre in the polar angle (`panels` panels) times a lattice of
// `n_azimuth` points on S^{k-2}. Weights include sin^{k-2}.
std::vector<WeightedDirection> cap_quadrature(int k, double half_angle, int n_azimuth, int panels = 1);
// Area of that cap.
double cap_area(int k, double half_angle);

// Direction sets in frame components (R^N, N = n + 1; component 0 along T).
enum class DirectionSet { all, spatial, timelike, null_past };
DirectionSet parse_direction_set(const std::string& name);
std::string to_string(DirectionSet s);
// all: S^n; spatial: w_0 = 0; timelike: future cap of half-angle pi/4 (strictly inside);
// null_past: (-1, theta)/sqrt(2) with theta on S^{n-1}.
std::vector<Vec> direction_set(DirectionSet kind, int N, int count);

}  // namespace lorentz
