#include "lorentz/ode.hpp"

#include <algorithm>
#include <cmath>

#include <boost/numeric/odeint.hpp>

namespace lorentz {

namespace odeint = boost::numeric::odeint;

std::string to_string(Termination t) {
  switch (t) {
    case Termination::reached_smax:
      return "reached_smax";
    case Termination::left_chart:
      return "left_chart";
    case Termination::step_failure:
      return "step_failure";
  }
  return "unknown";
}

namespace {

bool finite_state(const State& y) {
  for (double v : y)
    if (!std::isfinite(v)) return false;
  return true;
}

// One fixed RK4 step, or a controlled dopri5 advance from s0 to s1 (several steps if needed).
// Returns false on step underflow or non-finite states.
bool advance(const OdeRhs& rhs, State& y, double s0, double s1, const IntegratorOptions& opt) {
  if (s1 == s0) return true;
  auto sys = [&rhs](const State& x, State& dx, double t) { rhs(x, dx, t); };
  if (opt.fixed_step) {
    odeint::runge_kutta4<State> rk;
    double s = s0;
    while (s < s1) {
      double h = std::min(opt.h_fixed, s1 - s);
      rk.do_step(sys, y, s, h);
      s = (s1 - s - h <= 1e-14 * std::max(1.0, std::abs(s1))) ? s1 : s + h;
      if (!finite_state(y)) return false;
    }
    return true;
  }
  auto stepper = odeint::make_controlled(opt.tol, opt.tol, odeint::runge_kutta_dopri5<State>());
  double s = s0;
  double h = std::min(s1 - s0, opt.h_max);
  State trial;
  while (s < s1) {
    h = std::min({h, s1 - s, opt.h_max});
    trial = y;
    double st = s, ht = h;
    auto res = stepper.try_step(sys, trial, st, ht);
    if (res == odeint::success && finite_state(trial)) {
      y.swap(trial);
      s = (s1 - st <= 1e-14 * std::max(1.0, std::abs(s1))) ? s1 : st;
      h = ht;
    } else {
      h = (res == odeint::success) ? 0.5 * h : ht;
      if (h < opt.h_min) return false;
    }
  }
  return true;
}

}  // namespace

size_t OdeTrajectory::node_before(double t) const {
  auto it = std::upper_bound(s.begin(), s.end(), t);
  if (it == s.begin()) return 0;
  size_t k = static_cast<size_t>(it - s.begin()) - 1;
  return std::min(k, s.size() - 1);
}

State OdeTrajectory::at(double t) const {
  size_t k = node_before(t);
  if (s[k] == t || !rhs) return y[k];
  State out = y[k];
  if (!advance(rhs, out, s[k], t, options)) return interpolate(t);
  return out;
}

State OdeTrajectory::interpolate(double t) const {
  size_t k = node_before(t);
  if (k + 1 >= s.size() || s[k] == t) return y[k];
  const double h = s[k + 1] - s[k];
  const double u = (t - s[k]) / h;
  const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
  const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
  State out(y[k].size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = h00 * y[k][i] + h10 * h * dy[k][i] + h01 * y[k + 1][i] + h11 * h * dy[k + 1][i];
  return out;
}

OdeTrajectory integrate_ode(const OdeRhs& rhs, const State& y0, double s_max, const IntegratorOptions& opt,
                            const OdeInside& inside, std::vector<double> stops) {
  OdeTrajectory tr;
  tr.rhs = rhs;
  tr.options = opt;
  State y = y0, dy(y0.size());
  rhs(y, dy, 0.0);
  tr.s.push_back(0.0);
  tr.y.push_back(y);
  tr.dy.push_back(dy);
  if (!finite_state(y) || !finite_state(dy)) {
    tr.termination = Termination::step_failure;
    return tr;
  }
  stops.erase(std::remove_if(stops.begin(), stops.end(), [&](double t) { return !(t > 0.0 && t < s_max); }),
              stops.end());
  stops.push_back(s_max);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  size_t next_stop = 0;

  auto sys = [&rhs](const State& x, State& dx, double t) { rhs(x, dx, t); };
  auto stepper = odeint::make_controlled(opt.tol, opt.tol, odeint::runge_kutta_dopri5<State>());
  odeint::runge_kutta4<State> rk4;
  double s = 0.0;
  double h = opt.fixed_step ? opt.h_fixed : std::min(opt.h_init, opt.h_max);
  State trial;
  long steps = 0;
  while (s < s_max) {
    if (++steps > opt.max_steps) {
      tr.termination = Termination::step_failure;
      return tr;
    }
    const double target = stops[next_stop];
    double hs = std::min({h, target - s, opt.fixed_step ? opt.h_fixed : opt.h_max});
    trial = y;
    double st = s, ht = hs;
    bool ok;
    if (opt.fixed_step) {
      rk4.do_step(sys, trial, st, hs);
      st = s + hs;
      ok = finite_state(trial);
      if (!ok) {
        tr.termination = Termination::step_failure;
        return tr;
      }
    } else {
      auto res = stepper.try_step(sys, trial, st, ht);
      ok = res == odeint::success && finite_state(trial);
      if (!ok) {
        h = (res == odeint::success) ? 0.5 * hs : ht;
        if (h < opt.h_min) {
          tr.termination = Termination::step_failure;
          return tr;
        }
        continue;
      }
      h = ht;
    }
    bool hit_stop = target - st <= 1e-14 * std::max(1.0, std::abs(target));
    if (hit_stop) st = target;
    if (inside && !inside(trial)) {
      // Bisect the step for the boundary crossing; keep the last inside state.
      double lo = s, hi = st;
      State ylo = y;
      for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(hi)); ++it) {
        double mid = 0.5 * (lo + hi);
        State ym = y;
        if (!advance(rhs, ym, s, mid, opt)) break;
        if (inside(ym)) {
          lo = mid;
          ylo = ym;
        } else {
          hi = mid;
        }
      }
      if (lo > s) {
        rhs(ylo, dy, lo);
        tr.s.push_back(lo);
        tr.y.push_back(ylo);
        tr.dy.push_back(dy);
      }
      tr.termination = Termination::left_chart;
      return tr;
    }
    y.swap(trial);
    s = st;
    rhs(y, dy, s);
    if (!finite_state(dy)) {
      tr.termination = Termination::step_failure;
      return tr;
    }
    tr.s.push_back(s);
    tr.y.push_back(y);
    tr.dy.push_back(dy);
    if (hit_stop) ++next_stop;
  }
  tr.termination = Termination::reached_smax;
  return tr;
}

}  // namespace lorentz
