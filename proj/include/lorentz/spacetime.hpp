#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lorentz/core.hpp"

namespace lorentz {

// Coordinate box, optional spatial periodicity and an optional excluded spatial ball
// around the origin (used to keep Schwarzschild away from its horizon).
struct ChartDomain {
  Vec lo;
  Vec hi;
  std::vector<double> period;  // per coordinate, 0 = not periodic; period[0] is always 0
  double exclude_radius = 0.0;

  int dim() const { return static_cast<int>(lo.size()); }
  bool periodic(int axis) const { return period[axis] > 0.0; }
  bool contains(const Vec& x) const;
  // Periodic coordinates reduced into [lo, lo + period).
  Vec wrap(const Vec& x) const;
  // to - from, with periodic components taken as the nearest image.
  Vec displacement(const Vec& from, const Vec& to) const;
  // Coordinate distance from x to the boundary of the chart, capped by half of every period.
  double chart_radius(const Vec& x) const;
};

enum class SpecKind { Builtin, Foliated, General };

// Metric value and coordinate derivatives at a point:
// dg(m, a, b) = ∂_m g_ab, ddg(m, k, a, b) = ∂_m ∂_k g_ab.
struct MetricJet {
  Mat g;
  Array3 dg;
  Array4 ddg;
  bool has_second = false;
};

class MetricModel;

class MetricSpec {
 public:
  MetricSpec(std::shared_ptr<const MetricModel> model, ChartDomain domain,
             std::map<std::string, double> params, double scale = 1.0);

  int dim() const;
  int spatial_dim() const { return dim() - 1; }
  SpecKind kind() const;
  // Builtin model id, or "foliated" / "general" for expression specs.
  std::string name() const;
  // True for specs in the form -n^2 dt^2 + g_ij dx^i dx^j (all builtins and foliated expressions).
  bool foliated() const { return kind() != SpecKind::General; }
  const ChartDomain& domain() const { return domain_; }
  const std::map<std::string, double>& parameters() const { return params_; }
  // Constant factor multiplying the model metric (g -> scale * g).
  double scale() const { return scale_; }
  // Same spacetime with g -> lambda^2 g.
  MetricSpec scaled(double lambda) const;
  // Same spacetime with a different chart domain.
  MetricSpec with_domain(ChartDomain domain) const;
  // Canonical spec document; parse_metric_spec(to_document()) reproduces this spec.
  std::string to_document() const;

  // Raw evaluation without chart checks (the public *_at functions check).
  Mat metric(const Vec& x) const;
  double lapse(const Vec& x) const;
  // Closed-form derivatives for builtins, central differences for expression specs.
  void jet(const Vec& x, bool second, MetricJet& out) const;
  // Central differences of metric values, whatever the kind.
  void jet_fd(const Vec& x, bool second, MetricJet& out) const;
  bool has_closed_form_derivatives() const;
  const MetricModel& model() const { return *model_; }

 private:
  std::shared_ptr<const MetricModel> model_;
  ChartDomain domain_;
  std::map<std::string, double> params_;
  double scale_ = 1.0;
};

MetricSpec parse_metric_spec(std::string_view text);
MetricSpec load_metric_spec(const std::string& path);

namespace builtin {
MetricSpec minkowski(int dim = 4);
// Areal-radius Cartesian coordinates: g_tt = -(1-2M/r), g_ij = δ_ij + 2M x_i x_j / (r^2 (r-2M)).
MetricSpec schwarzschild(double M = 1.0);
// -dt^2 + exp(2 sqrt(K) t) δ_ij.
MetricSpec desitter_slicing(double K = 1.0, int dim = 4);
// -dt^2 + a(t)^2 δ_ij with a(t) given as an expression in t.
MetricSpec flrw(const std::string& a_expr = "1 + 0.5*t", int dim = 4);
// Minkowski metric with every spatial coordinate periodic with period L.
MetricSpec flat_spatial_torus(double L = 2.0, int dim = 4);
// -dt^2 + 4 δ_ij / (1 + K|x|^2)^2: static product of time with the round sphere of curvature K.
MetricSpec static_sphere(double K = 1.0, int dim = 4);
std::vector<std::string> names();
// Builds a builtin from its id and parameter map (missing parameters take defaults).
MetricSpec make(const std::string& name, const std::map<std::string, double>& params, int dim,
                const std::string& a_expr = "");
}  // namespace builtin

// Foliated expression document describing the same metric as a builtin spec.
std::string expression_document(const MetricSpec& spec);

struct MetricAt {
  Vec point;
  Mat g;
};

struct ChristoffelAt {
  Vec point;
  Array3 gamma;  // gamma(c, a, b) = Γ^c_ab
};

struct RiemannAt {
  Vec point;
  Array4 riem;  // riem(a, b, c, d) = R_abcd = g_cz R^z_abd
  Mat ricci;    // R_ab = R_acbd g^cd
};

MetricAt metric_at(const MetricSpec& spec, const Vec& p);
ChristoffelAt christoffel_at(const MetricSpec& spec, const Vec& p);
RiemannAt riemann_at(const MetricSpec& spec, const Vec& p);
// Components of L_T g for the unit normal T of the foliation, in the basis (T, ∂_1, ..., ∂_n):
// (L_T g)(T,T) = 0, (L_T g)(T,∂_i) = ∂_i n / n, (L_T g)(∂_i,∂_j) = ∂_t g_ij / n.
Mat lie_derivative_T(const MetricSpec& spec, const Vec& p);

// Independent path: central differences of metric values and the general coordinate formulas.
ChristoffelAt christoffel_fd(const MetricSpec& spec, const Vec& p);
RiemannAt riemann_fd(const MetricSpec& spec, const Vec& p);

// Largest violation of antisymmetry (ab), (cd), pair symmetry and the first Bianchi identity,
// relative to max(1, max |R_abcd|).
double riemann_symmetry_residual(const RiemannAt& r);

// Everything the ODE right-hand sides need at one point, using the MetricSpec's own evaluation path.
struct LocalGeometry {
  Mat g;
  Mat ginv;
  Array3 gamma;    // Γ^c_ab
  Array4 riem_up;  // R^z_abd (valid when curvature was requested)
};
void evaluate_geometry(const MetricSpec& spec, const Vec& x, bool curvature, LocalGeometry& out);

// Christoffel symbols and curvature from a metric jet, general coordinate formulas.
void christoffel_from_jet(const MetricJet& jet, const Mat& ginv, Array3& gamma);
void riemann_up_from_jet(const MetricJet& jet, const Mat& ginv, const Array3& gamma, Array4& riem_up);
// Closed formulas for metrics of the form f dt^2 + g_ij dx^i dx^j (f = g_00).
void foliated_christoffel_from_jet(const MetricJet& jet, Array3& gamma);
void foliated_riemann_lower_from_jet(const MetricJet& jet, Array4& riem);

// Central-difference jet of an arbitrary metric field (steps eps^(1/3) and eps^(1/4), scaled by |x|).
void finite_difference_jet(const std::function<Mat(const Vec&)>& metric, const Vec& x, bool second,
                           MetricJet& out);

// Lowers the first index: R_abcd = g_cz R^z_abd.
Array4 lower_riemann(const Array4& riem_up, const Mat& g);
Mat ricci_from_lower(const Array4& riem, const Mat& ginv);

// Deterministic probe points inside the chart (center and quarter points along each axis).
std::vector<Vec> probe_points(const ChartDomain& domain);

namespace debug {
// Fault injection for the verification suite: flips the sign of every curvature evaluation.
void set_flip_curvature_sign(bool on);
bool flip_curvature_sign();
}  // namespace debug

}  // namespace lorentz
