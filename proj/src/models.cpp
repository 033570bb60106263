#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "lorentz/config.hpp"
#include "model.hpp"

namespace lorentz {

namespace {

using expr::Expression;
using expr::format_number;

// Step that is exactly representable as a difference of x + h and x.
double exact_step(double x, double h) {
  volatile double xp = x + h;
  return xp - x;
}

}  // namespace

namespace {

template <class MetricFn>
void fd_jet(const MetricFn& metric, const Vec& x, bool second, MetricJet& out) {
  const int N = static_cast<int>(x.size());
  out.g = metric(x);
  out.dg = Array3(N);
  out.ddg = Array4(N);
  out.has_second = second;
  const double c1 = std::cbrt(kEps);
  const double c2 = std::sqrt(std::sqrt(kEps));
  Vec y = x;
  for (int m = 0; m < N; ++m) {
    double h = exact_step(x[m], c1 * std::max(1.0, std::abs(x[m])));
    y[m] = x[m] + h;
    Mat gp = metric(y);
    y[m] = x[m] - h;
    Mat gm = metric(y);
    y[m] = x[m];
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) out.dg(m, a, b) = (gp(a, b) - gm(a, b)) / (2.0 * h);
  }
  if (!second) return;
  std::array<double, kMaxDim> h2{};
  for (int m = 0; m < N; ++m) h2[m] = exact_step(x[m], c2 * std::max(1.0, std::abs(x[m])));
  for (int m = 0; m < N; ++m) {
    y[m] = x[m] + h2[m];
    Mat gp = metric(y);
    y[m] = x[m] - h2[m];
    Mat gm = metric(y);
    y[m] = x[m];
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b)
        out.ddg(m, m, a, b) = (gp(a, b) - 2.0 * out.g(a, b) + gm(a, b)) / (h2[m] * h2[m]);
    for (int k = m + 1; k < N; ++k) {
      Mat acc = Mat::Zero(N, N);
      for (int sm = -1; sm <= 1; sm += 2)
        for (int sk = -1; sk <= 1; sk += 2) {
          y[m] = x[m] + sm * h2[m];
          y[k] = x[k] + sk * h2[k];
          acc += static_cast<double>(sm * sk) * metric(y);
        }
      y[m] = x[m];
      y[k] = x[k];
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) {
          double v = acc(a, b) / (4.0 * h2[m] * h2[k]);
          out.ddg(m, k, a, b) = v;
          out.ddg(k, m, a, b) = v;
        }
    }
  }
}

// ---------------------------------------------------------------- builtin models

class MinkowskiModel : public MetricModel {
 public:
  MinkowskiModel(int dim, std::string name) : dim_(dim), name_(std::move(name)) {}
  int dim() const override { return dim_; }
  SpecKind kind() const override { return SpecKind::Builtin; }
  std::string name() const override { return name_; }
  Mat metric(const Vec&) const override { return eta(dim_); }
  bool closed_form_jet() const override { return true; }
  void jet(const Vec&, bool second, MetricJet& out) const override {
    out.g = eta(dim_);
    out.dg = Array3(dim_);
    out.ddg = Array4(dim_);
    out.has_second = second;
  }
  std::string document_body(const std::map<std::string, double>& params) const override {
    std::string s = "[model]\nmodel = \"" + name_ + "\"\ndim = " + std::to_string(dim_) + "\n";
    if (name_ == "flat_spatial_torus") s += "L = " + format_number(params.at("L")) + "\n";
    return s;
  }

 private:
  int dim_;
  std::string name_;
};

// g_ij = psi(t, x) δ_ij, g_00 = -1; psi and its derivatives supplied by subclasses.
class ConformallyFlatSliceModel : public MetricModel {
 public:
  explicit ConformallyFlatSliceModel(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  SpecKind kind() const override { return SpecKind::Builtin; }
  Mat metric(const Vec& x) const override {
    Mat g = Mat::Identity(dim_, dim_) * psi(x);
    g(0, 0) = -1.0;
    return g;
  }
  bool closed_form_jet() const override { return true; }
  void jet(const Vec& x, bool second, MetricJet& out) const override {
    Vec d1(dim_);
    Mat d2(dim_, dim_);
    double p = psi_jet(x, d1, d2);
    out.g = Mat::Identity(dim_, dim_) * p;
    out.g(0, 0) = -1.0;
    out.dg = Array3(dim_);
    out.ddg = Array4(dim_);
    out.has_second = second;
    for (int m = 0; m < dim_; ++m)
      for (int i = 1; i < dim_; ++i) {
        out.dg(m, i, i) = d1[m];
        if (second)
          for (int k = 0; k < dim_; ++k) out.ddg(m, k, i, i) = d2(m, k);
      }
  }

 protected:
  virtual double psi(const Vec& x) const = 0;
  // Returns psi and fills its gradient and Hessian in (t, x).
  virtual double psi_jet(const Vec& x, Vec& d1, Mat& d2) const = 0;
  int dim_;
};

class DeSitterModel : public ConformallyFlatSliceModel {
 public:
  DeSitterModel(double K, int dim) : ConformallyFlatSliceModel(dim), h_(std::sqrt(K)) {}
  std::string name() const override { return "desitter_slicing"; }
  std::string document_body(const std::map<std::string, double>& params) const override {
    return "[model]\nmodel = \"desitter_slicing\"\ndim = " + std::to_string(dim_) +
           "\nK = " + format_number(params.at("K")) + "\n";
  }

 protected:
  double psi(const Vec& x) const override { return std::exp(2.0 * h_ * x[0]); }
  double psi_jet(const Vec& x, Vec& d1, Mat& d2) const override {
    double p = psi(x);
    d1.setZero();
    d2.setZero();
    d1[0] = 2.0 * h_ * p;
    d2(0, 0) = 4.0 * h_ * h_ * p;
    return p;
  }

 private:
  double h_;
};

class FlrwModel : public ConformallyFlatSliceModel {
 public:
  FlrwModel(std::string a_text, int dim) : ConformallyFlatSliceModel(dim), a_text_(std::move(a_text)) {
    expr::SymbolTable sym;
    sym.spatial_dim = dim - 1;
    a_ = Expression::parse(a_text_, sym);
    for (int i = 1; i < dim; ++i)
      if (a_.depends_on(i)) throw SpecError("flrw scale factor a(t) must depend on t only");
  }
  std::string name() const override { return "flrw"; }
  std::string document_body(const std::map<std::string, double>&) const override {
    return "[model]\nmodel = \"flrw\"\ndim = " + std::to_string(dim_) + "\na = \"" + a_.to_string() + "\"\n";
  }
  std::string scale_factor_text() const override { return a_.to_string(); }

 protected:
  double a(double t) const {
    std::array<double, kMaxDim> v{};
    v[0] = t;
    return a_.eval(v.data());
  }
  double psi(const Vec& x) const override {
    double av = a(x[0]);
    return av * av;
  }
  double psi_jet(const Vec& x, Vec& d1, Mat& d2) const override {
    // a' and a'' by central differences in t (the grammar has no symbolic derivative).
    double t = x[0];
    double h1 = exact_step(t, std::cbrt(kEps) * std::max(1.0, std::abs(t)));
    double h2 = exact_step(t, std::sqrt(std::sqrt(kEps)) * std::max(1.0, std::abs(t)));
    double av = a(t);
    double ap = (a(t + h1) - a(t - h1)) / (2.0 * h1);
    double app = (a(t + h2) - 2.0 * av + a(t - h2)) / (h2 * h2);
    d1.setZero();
    d2.setZero();
    d1[0] = 2.0 * av * ap;
    d2(0, 0) = 2.0 * ap * ap + 2.0 * av * app;
    return av * av;
  }

 private:
  std::string a_text_;
  Expression a_;
};

class StaticSphereModel : public ConformallyFlatSliceModel {
 public:
  StaticSphereModel(double K, int dim) : ConformallyFlatSliceModel(dim), K_(K) {}
  std::string name() const override { return "static_sphere"; }
  std::string document_body(const std::map<std::string, double>& params) const override {
    return "[model]\nmodel = \"static_sphere\"\ndim = " + std::to_string(dim_) +
           "\nK = " + format_number(params.at("K")) + "\n";
  }

 protected:
  double psi(const Vec& x) const override {
    double r2 = x.tail(dim_ - 1).squaredNorm();
    double q = 1.0 + K_ * r2;
    return 4.0 / (q * q);
  }
  double psi_jet(const Vec& x, Vec& d1, Mat& d2) const override {
    double r2 = x.tail(dim_ - 1).squaredNorm();
    double q = 1.0 + K_ * r2;
    d1.setZero();
    d2.setZero();
    for (int k = 1; k < dim_; ++k) {
      d1[k] = -16.0 * K_ * x[k] / (q * q * q);
      for (int l = 1; l < dim_; ++l)
        d2(k, l) = (k == l ? -16.0 * K_ / (q * q * q) : 0.0) +
                   96.0 * K_ * K_ * x[k] * x[l] / (q * q * q * q);
    }
    return 4.0 / (q * q);
  }

 private:
  double K_;
};

class SchwarzschildModel : public MetricModel {
 public:
  explicit SchwarzschildModel(double M) : M_(M) {}
  int dim() const override { return 4; }
  SpecKind kind() const override { return SpecKind::Builtin; }
  std::string name() const override { return "schwarzschild"; }
  std::string document_body(const std::map<std::string, double>& params) const override {
    return "[model]\nmodel = \"schwarzschild\"\ndim = 4\nM = " + format_number(params.at("M")) + "\n";
  }
  Mat metric(const Vec& x) const override {
    double r = x.tail(3).norm();
    Mat g = Mat::Identity(4, 4);
    g(0, 0) = -(1.0 - 2.0 * M_ / r);
    double q = 2.0 * M_ / (r * r * (r - 2.0 * M_));
    for (int i = 1; i < 4; ++i)
      for (int j = 1; j < 4; ++j) g(i, j) += q * x[i] * x[j];
    return g;
  }
  bool closed_form_jet() const override { return true; }
  void jet(const Vec& x, bool second, MetricJet& out) const override {
    const double M = M_;
    double r = x.tail(3).norm();
    out.g = metric(x);
    out.dg = Array3(4);
    out.ddg = Array4(4);
    out.has_second = second;
    // g_tt = -u with u = 1 - 2M/r.
    double r3 = r * r * r, r5 = r3 * r * r;
    double D = r3 - 2.0 * M * r * r;
    double Dp = 3.0 * r * r - 4.0 * M * r;
    double Dpp = 6.0 * r - 4.0 * M;
    double q = 2.0 * M / D;
    double qp = -2.0 * M * Dp / (D * D);
    double qpp = -2.0 * M * (Dpp / (D * D) - 2.0 * Dp * Dp / (D * D * D));
    auto xs = [&](int i) { return x[i]; };
    double dq[4] = {0, 0, 0, 0};
    for (int k = 1; k < 4; ++k) {
      out.dg(k, 0, 0) = -2.0 * M * xs(k) / r3;
      dq[k] = qp * xs(k) / r;
    }
    auto del = [](int a, int b) { return a == b ? 1.0 : 0.0; };
    for (int k = 1; k < 4; ++k)
      for (int i = 1; i < 4; ++i)
        for (int j = 1; j < 4; ++j)
          out.dg(k, i, j) = dq[k] * xs(i) * xs(j) + q * (del(k, i) * xs(j) + xs(i) * del(k, j));
    if (!second) return;
    for (int k = 1; k < 4; ++k)
      for (int l = 1; l < 4; ++l) {
        out.ddg(k, l, 0, 0) = -2.0 * M * (del(k, l) / r3 - 3.0 * xs(k) * xs(l) / r5);
        double ddq = qpp * xs(k) * xs(l) / (r * r) + qp * (del(k, l) / r - xs(k) * xs(l) / r3);
        for (int i = 1; i < 4; ++i)
          for (int j = 1; j < 4; ++j)
            out.ddg(k, l, i, j) = ddq * xs(i) * xs(j) + dq[k] * (del(l, i) * xs(j) + xs(i) * del(l, j)) +
                                  dq[l] * (del(k, i) * xs(j) + xs(i) * del(k, j)) +
                                  q * (del(k, i) * del(l, j) + del(l, i) * del(k, j));
      }
  }

 private:
  double M_;
};

// ---------------------------------------------------------------- expression models

class FoliatedExprModel : public MetricModel {
 public:
  FoliatedExprModel(int dim, Expression lapse, std::vector<std::vector<std::optional<Expression>>> spatial)
      : dim_(dim), lapse_(std::move(lapse)), spatial_(std::move(spatial)) {}
  int dim() const override { return dim_; }
  SpecKind kind() const override { return SpecKind::Foliated; }
  std::string name() const override { return "foliated"; }
  Mat metric(const Vec& x) const override {
    Mat g = Mat::Zero(dim_, dim_);
    double n = lapse_.eval(x.data());
    g(0, 0) = -n * n;
    for (int i = 1; i < dim_; ++i)
      for (int j = i; j < dim_; ++j) {
        const auto& e = spatial_[i - 1][j - 1];
        double v = e ? e->eval(x.data()) : 0.0;
        g(i, j) = v;
        g(j, i) = v;
      }
    return g;
  }
  std::string document_body(const std::map<std::string, double>&) const override {
    std::string s = "[lapse]\nlapse = \"" + lapse_.to_string() + "\"\n[spatial]\n";
    for (int i = 1; i < dim_; ++i)
      for (int j = i; j < dim_; ++j)
        if (const auto& e = spatial_[i - 1][j - 1])
          s += "g" + std::to_string(i) + std::to_string(j) + " = \"" + e->to_string() + "\"\n";
    return s;
  }
  double lapse_value(const Vec& x) const { return lapse_.eval(x.data()); }

 private:
  int dim_;
  Expression lapse_;
  std::vector<std::vector<std::optional<Expression>>> spatial_;  // upper triangle, 0-based spatial
};

class GeneralExprModel : public MetricModel {
 public:
  GeneralExprModel(int dim, std::vector<std::vector<std::optional<Expression>>> comps)
      : dim_(dim), comps_(std::move(comps)) {}
  int dim() const override { return dim_; }
  SpecKind kind() const override { return SpecKind::General; }
  std::string name() const override { return "general"; }
  Mat metric(const Vec& x) const override {
    Mat g = Mat::Zero(dim_, dim_);
    for (int a = 0; a < dim_; ++a)
      for (int b = a; b < dim_; ++b) {
        const auto& e = comps_[a][b];
        double v = e ? e->eval(x.data()) : 0.0;
        g(a, b) = v;
        g(b, a) = v;
      }
    return g;
  }
  std::string document_body(const std::map<std::string, double>&) const override {
    std::string s = "[metric]\n";
    for (int a = 0; a < dim_; ++a)
      for (int b = a; b < dim_; ++b)
        if (const auto& e = comps_[a][b])
          s += "g" + std::to_string(a) + std::to_string(b) + " = \"" + e->to_string() + "\"\n";
    return s;
  }

 private:
  int dim_;
  std::vector<std::vector<std::optional<Expression>>> comps_;
};

ChartDomain box_domain(int dim, double t_half, double x_half) {
  ChartDomain d;
  d.lo = Vec::Constant(dim, -x_half);
  d.hi = Vec::Constant(dim, x_half);
  d.lo[0] = -t_half;
  d.hi[0] = t_half;
  d.period.assign(static_cast<size_t>(dim), 0.0);
  return d;
}

void check_dim(int dim) {
  if (dim < 2 || dim > kMaxDim)
    throw SpecError("dimension must be between 2 and " + std::to_string(kMaxDim));
}

}  // namespace

void finite_difference_jet(const std::function<Mat(const Vec&)>& metric, const Vec& x, bool second,
                           MetricJet& out) {
  fd_jet(metric, x, second, out);
}

// ---------------------------------------------------------------- ChartDomain

bool ChartDomain::contains(const Vec& x) const {
  if (x.size() != lo.size() || !x.allFinite()) return false;
  for (int a = 0; a < x.size(); ++a) {
    if (periodic(a)) continue;
    if (x[a] < lo[a] || x[a] > hi[a]) return false;
  }
  if (exclude_radius > 0.0 && x.tail(x.size() - 1).norm() <= exclude_radius) return false;
  return true;
}

Vec ChartDomain::wrap(const Vec& x) const {
  Vec y = x;
  for (int a = 0; a < x.size(); ++a)
    if (periodic(a)) {
      double L = period[a];
      y[a] = lo[a] + (x[a] - lo[a]) - L * std::floor((x[a] - lo[a]) / L);
    }
  return y;
}

Vec ChartDomain::displacement(const Vec& from, const Vec& to) const {
  Vec d = to - from;
  for (int a = 0; a < d.size(); ++a)
    if (periodic(a)) d[a] -= period[a] * std::round(d[a] / period[a]);
  return d;
}

double ChartDomain::chart_radius(const Vec& x) const {
  double r = kInf;
  for (int a = 0; a < x.size(); ++a) {
    if (periodic(a))
      r = std::min(r, 0.5 * period[a]);
    else
      r = std::min({r, x[a] - lo[a], hi[a] - x[a]});
  }
  if (exclude_radius > 0.0) r = std::min(r, x.tail(x.size() - 1).norm() - exclude_radius);
  return std::max(r, 0.0);
}

std::vector<Vec> probe_points(const ChartDomain& d) {
  const int N = d.dim();
  Vec center(N), half(N);
  for (int a = 0; a < N; ++a) {
    double lo = d.lo[a], hi = d.hi[a];
    if (d.periodic(a)) hi = lo + d.period[a];
    center[a] = 0.5 * (lo + hi);
    half[a] = 0.5 * (hi - lo);
  }
  std::vector<Vec> pts;
  auto add = [&](const Vec& p) {
    if (d.contains(p)) pts.push_back(p);
  };
  add(center);
  for (int a = 0; a < N; ++a)
    for (int s = -1; s <= 1; s += 2) {
      Vec p = center;
      p[a] += 0.5 * s * half[a];
      add(p);
    }
  if (pts.empty() && d.exclude_radius > 0.0) {
    // Center lies in the excluded ball: probe on a shell just outside it instead.
    for (int a = 1; a < N; ++a) {
      Vec p = center;
      p[a] = 2.0 * d.exclude_radius;
      add(p);
    }
  }
  return pts;
}

// ---------------------------------------------------------------- MetricSpec

MetricSpec::MetricSpec(std::shared_ptr<const MetricModel> model, ChartDomain domain,
                       std::map<std::string, double> params, double scale)
    : model_(std::move(model)), domain_(std::move(domain)), params_(std::move(params)), scale_(scale) {}

int MetricSpec::dim() const { return model_->dim(); }
SpecKind MetricSpec::kind() const { return model_->kind(); }
std::string MetricSpec::name() const { return model_->name(); }

MetricSpec MetricSpec::scaled(double lambda) const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw SpecError("scale factor must be positive");
  return MetricSpec(model_, domain_, params_, scale_ * lambda * lambda);
}

MetricSpec MetricSpec::with_domain(ChartDomain domain) const {
  return MetricSpec(model_, std::move(domain), params_, scale_);
}

Mat MetricSpec::metric(const Vec& x) const { return scale_ * model_->metric(x); }

double MetricSpec::lapse(const Vec& x) const {
  if (!foliated()) throw SpecError("lapse requested for a spec that is not in foliated form");
  if (auto f = dynamic_cast<const FoliatedExprModel*>(model_.get())) return std::sqrt(scale_) * f->lapse_value(x);
  return std::sqrt(-metric(x)(0, 0));
}

bool MetricSpec::has_closed_form_derivatives() const { return model_->closed_form_jet(); }

void MetricSpec::jet(const Vec& x, bool second, MetricJet& out) const {
  if (!model_->closed_form_jet()) {
    jet_fd(x, second, out);
    return;
  }
  model_->jet(x, second, out);
  if (scale_ != 1.0) {
    const int N = dim();
    out.g *= scale_;
    for (int m = 0; m < N; ++m)
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) {
          out.dg(m, a, b) *= scale_;
          if (second)
            for (int k = 0; k < N; ++k) out.ddg(m, k, a, b) *= scale_;
        }
  }
}

void MetricSpec::jet_fd(const Vec& x, bool second, MetricJet& out) const {
  fd_jet([this](const Vec& y) { return metric(y); }, x, second, out);
}

std::string MetricSpec::to_document() const {
  std::ostringstream os;
  std::string body = model_->document_body(params_);
  if (kind() != SpecKind::Builtin) {
    os << "[model]\ndim = " << dim() << "\n";
    if (scale_ != 1.0) os << "scale = " << format_number(scale_) << "\n";
    if (!params_.empty()) {
      os << "[params]\n";
      for (const auto& [k, v] : params_) os << k << " = " << format_number(v) << "\n";
    }
    os << body;
  } else {
    os << body;
    if (scale_ != 1.0) os << "scale = " << format_number(scale_) << "\n";
  }
  os << "[domain]\n";
  const char* names[] = {"t", "x1", "x2", "x3", "x4", "x5"};
  for (int a = 0; a < dim(); ++a) {
    if (domain_.periodic(a)) continue;
    os << names[a] << " = " << format_number(domain_.lo[a]) << ", " << format_number(domain_.hi[a]) << "\n";
  }
  for (int a = 1; a < dim(); ++a)
    if (domain_.periodic(a))
      os << "period_" << names[a] << " = " << format_number(domain_.period[a]) << "\n";
  if (domain_.exclude_radius > 0.0) os << "exclude_radius = " << format_number(domain_.exclude_radius) << "\n";
  return os.str();
}

// ---------------------------------------------------------------- builtins

namespace builtin {

MetricSpec minkowski(int dim) {
  check_dim(dim);
  return MetricSpec(std::make_shared<MinkowskiModel>(dim, "minkowski"), box_domain(dim, 1e3, 1e3), {});
}

MetricSpec schwarzschild(double M) {
  if (!(M > 0.0)) throw SpecError("schwarzschild mass must be positive");
  ChartDomain d = box_domain(4, 1e4, 1e3);
  d.exclude_radius = 2.5 * M;
  return MetricSpec(std::make_shared<SchwarzschildModel>(M), d, {{"M", M}});
}

MetricSpec desitter_slicing(double K, int dim) {
  check_dim(dim);
  if (!(K > 0.0)) throw SpecError("desitter_slicing curvature K must be positive");
  return MetricSpec(std::make_shared<DeSitterModel>(K, dim), box_domain(dim, 10.0 / std::sqrt(K), 1e3),
                    {{"K", K}});
}

MetricSpec flrw(const std::string& a_expr, int dim) {
  check_dim(dim);
  ChartDomain d = box_domain(dim, 10.0, 1e3);
  d.lo[0] = -1.5;
  auto model = std::make_shared<FlrwModel>(a_expr, dim);
  return MetricSpec(model, d, {});
}

MetricSpec flat_spatial_torus(double L, int dim) {
  check_dim(dim);
  if (!(L > 0.0)) throw SpecError("torus period L must be positive");
  ChartDomain d = box_domain(dim, 1e3, 0.5 * L);
  for (int a = 1; a < dim; ++a) {
    d.period[a] = L;
    d.lo[a] = -0.5 * L;
    d.hi[a] = 0.5 * L;
  }
  return MetricSpec(std::make_shared<MinkowskiModel>(dim, "flat_spatial_torus"), d, {{"L", L}});
}

MetricSpec static_sphere(double K, int dim) {
  check_dim(dim);
  if (!(K > 0.0)) throw SpecError("static_sphere curvature K must be positive");
  return MetricSpec(std::make_shared<StaticSphereModel>(K, dim), box_domain(dim, 1e3, 1e3 / std::sqrt(K)),
                    {{"K", K}});
}

std::vector<std::string> names() {
  return {"minkowski", "schwarzschild", "desitter_slicing", "flrw", "flat_spatial_torus", "static_sphere"};
}

MetricSpec make(const std::string& name, const std::map<std::string, double>& params, int dim,
                const std::string& a_expr) {
  auto get = [&](const char* key, double def) {
    auto it = params.find(key);
    return it == params.end() ? def : it->second;
  };
  if (name == "minkowski") return minkowski(dim);
  if (name == "schwarzschild") {
    if (dim != 4) throw SpecError("schwarzschild is only available in dimension 4");
    return schwarzschild(get("M", 1.0));
  }
  if (name == "desitter_slicing") return desitter_slicing(get("K", 1.0), dim);
  if (name == "flrw") return flrw(a_expr.empty() ? std::string("1 + 0.5*t") : a_expr, dim);
  if (name == "flat_spatial_torus") return flat_spatial_torus(get("L", 2.0), dim);
  if (name == "static_sphere") return static_sphere(get("K", 1.0), dim);
  throw SpecError("unknown builtin model '" + name + "'");
}

}  // namespace builtin

std::string expression_document(const MetricSpec& spec) {
  if (spec.kind() != SpecKind::Builtin) return spec.to_document();
  const int N = spec.dim();
  const int n = N - 1;
  std::string r2;
  for (int i = 1; i <= n; ++i) r2 += (i > 1 ? " + " : "") + std::string("x") + std::to_string(i) + "^2";
  std::ostringstream os;
  os << "[model]\ndim = " << N << "\n";
  if (spec.scale() != 1.0) os << "scale = " << format_number(spec.scale()) << "\n";
  const auto& p = spec.parameters();
  if (!p.empty()) {
    os << "[params]\n";
    for (const auto& [k, v] : p) os << k << " = " << format_number(v) << "\n";
  }
  std::string name = spec.name();
  std::string lapse = "1";
  std::vector<std::vector<std::string>> gij(n, std::vector<std::string>(n));
  for (int i = 0; i < n; ++i) gij[i][i] = "1";
  if (name == "desitter_slicing") {
    for (int i = 0; i < n; ++i) gij[i][i] = "exp(2*sqrt(K)*t)";
  } else if (name == "flrw") {
    std::string a = spec.model().scale_factor_text();
    for (int i = 0; i < n; ++i) gij[i][i] = "(" + a + ")^2";
  } else if (name == "static_sphere") {
    for (int i = 0; i < n; ++i) gij[i][i] = "4/(1 + K*(" + r2 + "))^2";
  } else if (name == "schwarzschild") {
    std::string r = "sqrt(" + r2 + ")";
    lapse = "sqrt(1 - 2*M/" + r + ")";
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        std::string term = "2*M*x" + std::to_string(i + 1) + "*x" + std::to_string(j + 1) + "/((" + r2 +
                           ")*(" + r + " - 2*M))";
        gij[i][j] = i == j ? "1 + " + term : term;
      }
  }
  os << "[lapse]\nlapse = \"" << lapse << "\"\n[spatial]\n";
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      if (!gij[i][j].empty()) os << "g" << i + 1 << j + 1 << " = \"" << gij[i][j] << "\"\n";
  const ChartDomain& d = spec.domain();
  os << "[domain]\n";
  const char* names[] = {"t", "x1", "x2", "x3", "x4", "x5"};
  for (int a = 0; a < N; ++a)
    if (!d.periodic(a)) os << names[a] << " = " << format_number(d.lo[a]) << ", " << format_number(d.hi[a]) << "\n";
  for (int a = 1; a < N; ++a)
    if (d.periodic(a)) os << "period_" << names[a] << " = " << format_number(d.period[a]) << "\n";
  if (d.exclude_radius > 0.0) os << "exclude_radius = " << format_number(d.exclude_radius) << "\n";
  return os.str();
}

// ---------------------------------------------------------------- document parsing

namespace {

bool is_component_key(const std::string& key, int& a, int& b) {
  if (key.size() != 3 || key[0] != 'g' || !std::isdigit(static_cast<unsigned char>(key[1])) ||
      !std::isdigit(static_cast<unsigned char>(key[2])))
    return false;
  a = key[1] - '0';
  b = key[2] - '0';
  return true;
}

bool is_axis_key(const std::string& key, int& axis) {
  if (key == "t") {
    axis = 0;
    return true;
  }
  if (key.size() == 2 && key[0] == 'x' && key[1] >= '1' && key[1] <= '9') {
    axis = key[1] - '0';
    return true;
  }
  return false;
}

[[noreturn]] void fail_at(const ConfigEntry& e, const std::string& what, bool at_value = false) {
  throw ParseError(e.line, at_value ? e.value_column : e.key_column, at_value ? e.text : e.key, what);
}

}  // namespace

MetricSpec parse_metric_spec(std::string_view text) {
  std::vector<ConfigEntry> entries = parse_config(text);
  static const std::set<std::string> kSections = {"", "model", "params", "lapse", "spatial", "metric", "domain"};
  static const std::set<std::string> kBuiltinParams = {"M", "K", "L"};

  const ConfigEntry* model = nullptr;
  const ConfigEntry* dim_entry = nullptr;
  const ConfigEntry* scale_entry = nullptr;
  const ConfigEntry* lapse = nullptr;
  const ConfigEntry* a_entry = nullptr;
  std::vector<const ConfigEntry*> comps, domain_entries, param_entries;

  for (const auto& e : entries) {
    if (!kSections.count(e.section)) fail_at(e, "unknown section [" + e.section + "]");
    int a = 0, b = 0, axis = 0;
    if (e.section == "params") {
      if (e.type != ConfigEntry::Type::Number) fail_at(e, "parameter must be a number", true);
      param_entries.push_back(&e);
    } else if (e.key == "model" || e.key == "name") {
      if (e.type != ConfigEntry::Type::String) fail_at(e, "model name must be a string", true);
      model = &e;
    } else if (e.key == "dim") {
      if (e.type != ConfigEntry::Type::Number || e.numbers[0] != std::floor(e.numbers[0]))
        fail_at(e, "dim must be an integer", true);
      dim_entry = &e;
    } else if (e.key == "scale") {
      if (e.type != ConfigEntry::Type::Number || !(e.numbers[0] > 0.0)) fail_at(e, "scale must be a positive number", true);
      scale_entry = &e;
    } else if (e.key == "lapse" || e.key == "n") {
      lapse = &e;
    } else if (e.key == "a") {
      if (e.type != ConfigEntry::Type::String) fail_at(e, "a(t) must be a quoted expression", true);
      a_entry = &e;
    } else if (is_component_key(e.key, a, b)) {
      comps.push_back(&e);
    } else if (is_axis_key(e.key, axis) || e.key.rfind("period_", 0) == 0 || e.key == "exclude_radius") {
      domain_entries.push_back(&e);
    } else if (kBuiltinParams.count(e.key)) {
      if (e.type != ConfigEntry::Type::Number) fail_at(e, "parameter must be a number", true);
      param_entries.push_back(&e);
    } else {
      fail_at(e, "unknown key");
    }
  }

  std::map<std::string, double> params;
  for (const auto* e : param_entries) params[e->key] = e->numbers[0];
  double scale = scale_entry ? scale_entry->numbers[0] : 1.0;

  // Dimension: explicit, builtin default, or inferred from the highest component index.
  int dim = 0;
  if (dim_entry) {
    dim = static_cast<int>(dim_entry->numbers[0]);
    if (dim < 2 || dim > kMaxDim) fail_at(*dim_entry, "dim must be between 2 and " + std::to_string(kMaxDim), true);
  }

  std::optional<MetricSpec> spec;
  if (model) {
    if (!comps.empty()) fail_at(*comps[0], "component keys are not allowed together with a builtin model");
    if (lapse) fail_at(*lapse, "lapse is not allowed together with a builtin model");
    auto known = builtin::names();
    if (std::find(known.begin(), known.end(), model->text) == known.end())
      fail_at(*model, "unknown builtin model", true);
    if (a_entry && model->text != "flrw") fail_at(*a_entry, "key 'a' only applies to the flrw model");
    if (dim == 0) dim = 4;
    try {
      spec = builtin::make(model->text, params, dim, a_entry ? a_entry->text : std::string());
    } catch (const ParseError&) {
      throw;
    } catch (const SpecError& err) {
      fail_at(a_entry && model->text == "flrw" ? *a_entry : *model, err.what(), true);
    }
  } else {
    if (a_entry) fail_at(*a_entry, "key 'a' requires model = \"flrw\"");
    if (comps.empty()) throw ParseError(1, 1, "", "document defines neither a builtin model nor metric components");
    bool general = false;
    int max_index = 0;
    for (const auto* e : comps) {
      int a = 0, b = 0;
      is_component_key(e->key, a, b);
      if (a == 0 || b == 0) general = true;
      max_index = std::max({max_index, a, b});
    }
    if (general && lapse) fail_at(*lapse, "lapse cannot be combined with g0* components");
    if (!general && !lapse) fail_at(*comps[0], "foliated spec needs a lapse expression");
    if (dim == 0) dim = max_index + 1;
    if (dim < 2 || dim > kMaxDim) fail_at(*comps[0], "inferred dimension out of range");
    expr::SymbolTable sym;
    sym.spatial_dim = dim - 1;
    sym.constants = params;
    auto compile = [&](const ConfigEntry& e) {
      if (e.type == ConfigEntry::Type::List) fail_at(e, "expected a single expression", true);
      return expr::Expression::parse(e.text, sym, e.line, e.value_column);
    };
    std::vector<std::vector<std::optional<expr::Expression>>> table(
        static_cast<size_t>(dim), std::vector<std::optional<expr::Expression>>(static_cast<size_t>(dim)));
    for (const auto* e : comps) {
      int a = 0, b = 0;
      is_component_key(e->key, a, b);
      if (a >= dim || b >= dim) fail_at(*e, "component index exceeds dimension " + std::to_string(dim));
      if (!general && (a == 0 || b == 0)) fail_at(*e, "foliated spec components are spatial (indices 1..n)");
      if (a > b) std::swap(a, b);
      if (table[a][b]) fail_at(*e, "component given twice (gij and gji)");
      table[a][b] = compile(*e);
    }
    std::shared_ptr<MetricModel> m;
    if (general) {
      for (int a = 0; a < dim; ++a)
        if (!table[a][a]) throw ParseError(comps[0]->line, comps[0]->key_column, "g" + std::to_string(a) + std::to_string(a), "missing diagonal component");
      m = std::make_shared<GeneralExprModel>(dim, std::move(table));
    } else {
      std::vector<std::vector<std::optional<expr::Expression>>> spatial(
          static_cast<size_t>(dim - 1), std::vector<std::optional<expr::Expression>>(static_cast<size_t>(dim - 1)));
      for (int i = 1; i < dim; ++i) {
        if (!table[i][i])
          throw ParseError(comps[0]->line, comps[0]->key_column, "g" + std::to_string(i) + std::to_string(i), "missing diagonal component");
        for (int j = i; j < dim; ++j) spatial[i - 1][j - 1] = table[i][j];
      }
      m = std::make_shared<FoliatedExprModel>(dim, compile(*lapse), std::move(spatial));
    }
    std::map<std::string, double> kept;
    for (const auto* e : param_entries) kept[e->key] = e->numbers[0];
    spec = MetricSpec(m, box_domain(dim, 10.0, 10.0), kept);
  }
  if (dim_entry && spec->dim() != dim) fail_at(*dim_entry, "dimension mismatch with model", true);

  // Domain overrides.
  ChartDomain d = spec->domain();
  for (const auto* e : domain_entries) {
    int axis = 0;
    if (is_axis_key(e->key, axis)) {
      if (axis >= dim) fail_at(*e, "axis exceeds dimension");
      if (e->type != ConfigEntry::Type::List || e->numbers.size() != 2 || !(e->numbers[0] < e->numbers[1]))
        fail_at(*e, "expected 'lo, hi' with lo < hi", true);
      d.lo[axis] = e->numbers[0];
      d.hi[axis] = e->numbers[1];
    } else if (e->key == "exclude_radius") {
      if (e->type != ConfigEntry::Type::Number || e->numbers[0] < 0.0) fail_at(*e, "exclude_radius must be a nonnegative number", true);
      d.exclude_radius = e->numbers[0];
    } else {
      std::string ax = e->key.substr(7);
      if (!is_axis_key(ax, axis) || axis == 0 || axis >= dim) fail_at(*e, "period must name a spatial axis x1..xn");
      if (e->type != ConfigEntry::Type::Number || !(e->numbers[0] > 0.0)) fail_at(*e, "period must be positive", true);
      d.period[axis] = e->numbers[0];
      d.hi[axis] = d.lo[axis] + e->numbers[0];
    }
  }
  MetricSpec result = spec->with_domain(d);
  if (scale != 1.0) result = result.scaled(std::sqrt(scale));

  // Signature and lapse checks at probe points.
  std::vector<Vec> probes = probe_points(d);
  if (probes.empty()) throw ParseError(1, 1, "", "chart domain contains no probe points");
  for (const Vec& p : probes) {
    if (lapse) {
      double n = result.lapse(p);
      if (!(n > 0.0) || !std::isfinite(n)) {
        std::ostringstream os;
        os << "lapse must be positive (value " << n << " at probe point";
        for (int a = 0; a < p.size(); ++a) os << (a ? ", " : " (") << p[a];
        os << "))";
        fail_at(*lapse, os.str(), true);
      }
    }
    Mat g = result.metric(p);
    std::ostringstream where;
    for (int a = 0; a < p.size(); ++a) where << (a ? ", " : "(") << p[a];
    where << ")";
    if (!g.allFinite()) throw ParseError(comps.empty() ? 1 : comps[0]->line, 1, "", "metric is not finite at probe point " + where.str());
    Eigen::SelfAdjointEigenSolver<Mat> es(g);
    const Vec& ev = es.eigenvalues();
    int neg = 0;
    double scale_ev = ev.cwiseAbs().maxCoeff();
    for (int a = 0; a < ev.size(); ++a) {
      if (std::abs(ev[a]) <= 1e-15 * scale_ev) throw ParseError(comps.empty() ? 1 : comps[0]->line, 1, "", "metric is degenerate at probe point " + where.str());
      if (ev[a] < 0.0) ++neg;
    }
    if (neg != 1) throw ParseError(comps.empty() ? 1 : comps[0]->line, 1, "", "metric signature is not (-,+,...,+) at probe point " + where.str());
  }
  return result;
}

MetricSpec load_metric_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot open spec file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_metric_spec(ss.str());
}

}  // namespace lorentz
