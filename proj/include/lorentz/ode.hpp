#pragma once

#include <functional>
#include <string>
#include <vector>

namespace lorentz {

enum class Termination { reached_smax, left_chart, step_failure };
std::string to_string(Termination t);

struct IntegratorOptions {
  double tol = 1e-11;      // absolute and relative error per step
  double h_init = 1e-2;
  double h_max = 0.1;
  double h_min = 1e-13;
  bool fixed_step = false;  // classical RK4 with step h_fixed
  double h_fixed = 1e-3;
  long max_steps = 2000000;
};

using State = std::vector<double>;
using OdeRhs = std::function<void(const State& y, State& dy, double s)>;
// Returns false when the state has left the admissible region.
using OdeInside = std::function<bool(const State& y)>;

// Accepted steps of an integration, with re-integration for dense queries.
class OdeTrajectory {
 public:
  std::vector<double> s;
  std::vector<State> y;
  std::vector<State> dy;
  Termination termination = Termination::reached_smax;

  double s_end() const { return s.back(); }
  // State at parameter t in [s.front(), s_end()], integrated from the nearest earlier node
  // with the same tolerances (exact at nodes).
  State at(double t) const;
  // Cubic Hermite interpolation between nodes (cheap, third order).
  State interpolate(double t) const;
  size_t node_before(double t) const;

  OdeRhs rhs;
  IntegratorOptions options;
};

// Integrates y' = f(y, s) from s = 0 to s_max. Requested `stops` are hit exactly.
// Leaves the loop with left_chart when `inside` fails; the last node is then the boundary
// crossing located by bisection (to 1e-12 relative in s).
OdeTrajectory integrate_ode(const OdeRhs& rhs, const State& y0, double s_max, const IntegratorOptions& opt,
                            const OdeInside& inside = {}, std::vector<double> stops = {});

}  // namespace lorentz
