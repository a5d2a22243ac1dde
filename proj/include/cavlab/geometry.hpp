#pragma once

/// \file
/// Points, boxes and small numeric helpers shared by every cavlab module.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cavlab {

inline constexpr int kMaxDim = 3;

/// A point in R^d, d <= 3. Coordinates past the active dimension stay zero.
using Point = std::array<double, kMaxDim>;

/// Value returned by weight evaluation on the singular set.
inline constexpr double kInfinite = std::numeric_limits<double>::infinity();

/// Raised when a weight or experiment description is out of its admissible range.
class InvalidSpec : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation's precondition on its inputs does not hold.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by iterative solvers that fail to reach their tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

inline void check_dim(int d) {
  if (d < 1 || d > kMaxDim) throw InvalidSpec("dimension must be 1, 2 or 3");
}

inline double norm(const Point& x, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += x[i] * x[i];
  return std::sqrt(s);
}

inline double distance(const Point& a, const Point& b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline Point scaled(const Point& x, double t) {
  return {x[0] * t, x[1] * t, x[2] * t};
}

inline Point offset(const Point& x, const Point& y, double t = 1.0) {
  return {x[0] + t * y[0], x[1] + t * y[1], x[2] + t * y[2]};
}

/// Axis-aligned box [lo, hi] in R^d.
struct Box {
  int dim = 2;
  Point lo{};
  Point hi{};

  static Box cube(int d, double lo, double hi) {
    check_dim(d);
    Box b;
    b.dim = d;
    for (int i = 0; i < d; ++i) {
      b.lo[i] = lo;
      b.hi[i] = hi;
    }
    return b;
  }

  bool contains(const Point& x, double slack = 0.0) const {
    for (int i = 0; i < dim; ++i)
      if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
    return true;
  }

  /// Whether the closed ball B_r(c) lies inside the box.
  bool contains_ball(const Point& c, double r) const {
    for (int i = 0; i < dim; ++i)
      if (c[i] - r < lo[i] || c[i] + r > hi[i]) return false;
    return true;
  }

  double min_side() const {
    double s = kInfinite;
    for (int i = 0; i < dim; ++i) s = std::min(s, hi[i] - lo[i]);
    return s;
  }
};

/// Ordinary least squares fit y = slope*x + intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw PreconditionError("least squares needs two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw PreconditionError("least squares needs distinct abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

/// Dyadic radii 2^-k for k in [k_min, k_max], largest first.
inline std::vector<double> dyadic_radii(int k_min, int k_max) {
  std::vector<double> r;
  for (int k = k_min; k <= k_max; ++k) r.push_back(std::ldexp(1.0, -k));
  return r;
}

}  // namespace cavlab
