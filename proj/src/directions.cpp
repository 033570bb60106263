#include "lorentz/directions.hpp"

#include <cmath>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

namespace lorentz {

std::vector<Vec> sphere_lattice(int k, int count) {
  std::vector<Vec> out;
  if (k < 1) return out;
  count = std::max(count, 1);
  if (k == 1) {
    out.push_back(Vec::Constant(1, 1.0));
    out.push_back(Vec::Constant(1, -1.0));
    return out;
  }
  if (k == 2) {
    count = std::max(count, 2);
    for (int i = 0; i < count; ++i) {
      double a = 2.0 * kPi * i / count;
      Vec v(2);
      v << std::cos(a), std::sin(a);
      out.push_back(v);
    }
    return out;
  }
  if (k == 3) {
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    for (int i = 0; i < count; ++i) {
      double z = 1.0 - (2.0 * i + 1.0) / count;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double a = 2.0 * kPi * i / golden;
      Vec v(3);
      v << z, r * std::cos(a), r * std::sin(a);
      out.push_back(v);
    }
    return out;
  }
  if (k == 4) {
    // Super-Fibonacci spirals (Alexa 2022).
    const double phi = std::sqrt(2.0);
    const double psi = 1.533751168755204288118041;
    for (int i = 0; i < count; ++i) {
      double s = i + 0.5;
      double r = std::sqrt(s / count);
      double R = std::sqrt(1.0 - s / count);
      double a = 2.0 * kPi * s / phi;
      double b = 2.0 * kPi * s / psi;
      Vec v(4);
      v << r * std::sin(a), r * std::cos(a), R * std::sin(b), R * std::cos(b);
      out.push_back(v);
    }
    return out;
  }
  // Rings in the polar angle with a lower-dimensional lattice on each ring, sized by sin^{k-2}.
  int rings = std::max(2, static_cast<int>(std::round(std::pow(count, 1.0 / (k - 1)))));
  double norm = 0.0;
  for (int j = 0; j < rings; ++j) norm += std::pow(std::sin(kPi * (j + 0.5) / rings), k - 2);
  for (int j = 0; j < rings; ++j) {
    double th = kPi * (j + 0.5) / rings;
    int m = std::max(1, static_cast<int>(std::round(count * std::pow(std::sin(th), k - 2) / norm)));
    for (const Vec& w : sphere_lattice(k - 1, m)) {
      Vec v(k);
      v[0] = std::cos(th);
      v.tail(k - 1) = std::sin(th) * w;
      out.push_back(v);
    }
  }
  return out;
}

double cap_area(int k, double half_angle) {
  if (k == 1) return half_angle >= kPi / 2 ? 2.0 : 1.0;
  // Area of S^{k-2} times the integral of sin^{k-2} over [0, half_angle].
  double sub = 2.0 * std::pow(kPi, 0.5 * (k - 1)) / std::tgamma(0.5 * (k - 1));
  double integral = boost::math::quadrature::gauss<double, 30>::integrate(
      [k](double t) { return std::pow(std::sin(t), k - 2); }, 0.0, half_angle);
  return sub * integral;
}

std::vector<WeightedDirection> cap_quadrature(int k, double half_angle, int n_azimuth, int panels) {
  std::vector<WeightedDirection> out;
  if (k < 2) throw SpecError("cap quadrature needs k >= 2");
  using GL = boost::math::quadrature::gauss<double, 10>;
  // Boost stores the nonnegative half of the symmetric rule.
  std::vector<double> nodes, weights;
  for (size_t i = 0; i < GL::abscissa().size(); ++i) {
    double x = GL::abscissa()[i], w = GL::weights()[i];
    nodes.push_back(x);
    weights.push_back(w);
    if (x != 0.0) {
      nodes.push_back(-x);
      weights.push_back(w);
    }
  }
  std::vector<Vec> ring = sphere_lattice(k - 1, n_azimuth);
  const double sub_area = k - 1 == 1 ? 2.0 : 2.0 * std::pow(kPi, 0.5 * (k - 1)) / std::tgamma(0.5 * (k - 1));
  const double ring_w = sub_area / static_cast<double>(ring.size());
  panels = std::max(panels, 1);
  const double width = half_angle / panels;
  for (int pnl = 0; pnl < panels; ++pnl) {
    double a = pnl * width;
    for (size_t i = 0; i < nodes.size(); ++i) {
      double th = a + 0.5 * width * (nodes[i] + 1.0);
      double wt = 0.5 * width * weights[i] * std::pow(std::sin(th), k - 2);
      for (const Vec& w : ring) {
        WeightedDirection d;
        d.dir = Vec(k);
        d.dir[0] = std::cos(th);
        d.dir.tail(k - 1) = std::sin(th) * w;
        d.weight = wt * ring_w;
        out.push_back(d);
      }
    }
  }
  return out;
}

DirectionSet parse_direction_set(const std::string& name) {
  if (name == "all") return DirectionSet::all;
  if (name == "spatial") return DirectionSet::spatial;
  if (name == "timelike") return DirectionSet::timelike;
  if (name == "null" || name == "null_past") return DirectionSet::null_past;
  throw SpecError("unknown direction set '" + name + "' (expected all, spatial, timelike, null)");
}

std::string to_string(DirectionSet s) {
  switch (s) {
    case DirectionSet::all:
      return "all";
    case DirectionSet::spatial:
      return "spatial";
    case DirectionSet::timelike:
      return "timelike";
    case DirectionSet::null_past:
      return "null";
  }
  return "all";
}

std::vector<Vec> direction_set(DirectionSet kind, int N, int count) {
  std::vector<Vec> out;
  switch (kind) {
    case DirectionSet::all:
      return sphere_lattice(N, count);
    case DirectionSet::spatial:
      for (const Vec& w : sphere_lattice(N - 1, count)) {
        Vec v = Vec::Zero(N);
        v.tail(N - 1) = w;
        out.push_back(v);
      }
      return out;
    case DirectionSet::timelike: {
      // Nested polar rings strictly inside the light cone (angle < pi/4 from T).
      int rings = std::max(2, static_cast<int>(std::round(std::pow(count, 1.0 / (N - 1)))));
      std::vector<Vec> ring;
      for (int j = 0; j < rings; ++j) {
        double th = (kPi / 4) * (j + 0.5) / rings;
        int m = std::max(1, static_cast<int>(std::round(count * std::pow(std::sin(th), N - 2) /
                                                         (rings * std::pow(std::sin(kPi / 8), N - 2)))));
        if (N == 2) m = 1;
        for (const Vec& w : sphere_lattice(N - 1, m)) {
          Vec v(N);
          v[0] = std::cos(th);
          v.tail(N - 1) = std::sin(th) * w;
          out.push_back(v);
        }
      }
      return out;
    }
    case DirectionSet::null_past:
      for (const Vec& w : sphere_lattice(N - 1, count)) {
        Vec v(N);
        v[0] = -1.0;
        v.tail(N - 1) = w;
        out.push_back(v / std::sqrt(2.0));
      }
      return out;
  }
  return out;
}

}  // namespace lorentz
