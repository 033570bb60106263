#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace lorentz {

// Spacetime dimensions up to 6 are supported; all small matrices live on the stack.
inline constexpr int kMaxDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEps = std::numeric_limits<double>::epsilon();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid spec content: unknown keys, dimension mismatch, signature failure.
class SpecError : public Error {
 public:
  using Error::Error;
};

class ParseError : public SpecError {
 public:
  ParseError(int line, int column, std::string token, const std::string& what)
      : SpecError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                  what + (token.empty() ? "" : " (at '" + token + "')")),
        line_(line),
        column_(column),
        token_(std::move(token)) {}
  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& token() const { return token_; }

 private:
  int line_;
  int column_;
  std::string token_;
};

// Point outside the chart domain, or an evaluation produced a non-finite value.
class ChartError : public Error {
 public:
  using Error::Error;
};

// A numerical procedure could not produce its result (failed solve, degenerate input).
class AnalysisError : public Error {
 public:
  using Error::Error;
};

// Rank-3 array with index order (a, b, c); used for Christoffel symbols Γ^a_{bc}
// and for metric first derivatives ∂_a g_{bc}.
class Array3 {
 public:
  Array3() = default;
  explicit Array3(int dim) : dim_(dim) { data_.fill(0.0); }
  int dim() const { return dim_; }
  double& operator()(int a, int b, int c) { return data_[(a * kMaxDim + b) * kMaxDim + c]; }
  double operator()(int a, int b, int c) const { return data_[(a * kMaxDim + b) * kMaxDim + c]; }
  void set_zero() { data_.fill(0.0); }

 private:
  int dim_ = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> data_{};
};

// Rank-4 array with index order (a, b, c, d).
class Array4 {
 public:
  Array4() = default;
  explicit Array4(int dim) : dim_(dim) { data_.fill(0.0); }
  int dim() const { return dim_; }
  double& operator()(int a, int b, int c, int d) {
    return data_[((a * kMaxDim + b) * kMaxDim + c) * kMaxDim + d];
  }
  double operator()(int a, int b, int c, int d) const {
    return data_[((a * kMaxDim + b) * kMaxDim + c) * kMaxDim + d];
  }
  void set_zero() { data_.fill(0.0); }

 private:
  int dim_ = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim * kMaxDim> data_{};
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

// Minkowski sign matrix diag(-1, 1, ..., 1).
inline Mat eta(int dim) {
  Mat m = Mat::Identity(dim, dim);
  m(0, 0) = -1.0;
  return m;
}

}  // namespace lorentz
