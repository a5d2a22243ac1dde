#pragma once

/// \file
/// Singular A2 weight families: evaluation, rescaling, homogenized limits and
/// numerical estimates of the A2 constant and of the averaged singularity rate.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cavlab/geometry.hpp"

namespace cavlab {

enum class WeightKind { Constant, PowerSubspace, AnisotropicProduct, TwoCone, AngularModulated, Perturbed };

inline std::string_view to_string(WeightKind k) {
  switch (k) {
    case WeightKind::Constant: return "constant";
    case WeightKind::PowerSubspace: return "power_subspace";
    case WeightKind::AnisotropicProduct: return "anisotropic_product";
    case WeightKind::TwoCone: return "two_cone";
    case WeightKind::AngularModulated: return "angular_modulated";
    case WeightKind::Perturbed: return "perturbed";
  }
  return "unknown";
}

inline WeightKind weight_kind_from_string(std::string_view s) {
  for (auto k : {WeightKind::Constant, WeightKind::PowerSubspace, WeightKind::AnisotropicProduct,
                 WeightKind::TwoCone, WeightKind::AngularModulated, WeightKind::Perturbed})
    if (to_string(k) == s) return k;
  throw InvalidSpec("unknown weight kind '" + std::string(s) + "'");
}

/// Positive function on the unit sphere, tabulated on a uniform azimuth
/// (periodic) by polar (poles included, d = 3 only) lattice and interpolated
/// linearly. One azimuth sample means a constant profile.
struct AngularProfile {
  int n_azimuth = 1;
  int n_polar = 1;
  std::vector<double> values{1.0};

  double lower() const { return *std::min_element(values.begin(), values.end()); }
  double upper() const { return *std::max_element(values.begin(), values.end()); }

  void validate(int d) const {
    if (n_azimuth < 1 || n_polar < 1) throw InvalidSpec("angular profile needs at least one sample");
    if (d != 3 && n_polar != 1) throw InvalidSpec("polar samples are only meaningful for d = 3");
    if (n_polar == 2 || (d == 3 && n_polar < 1))
      throw InvalidSpec("polar lattice needs 1 or at least 3 samples");
    if (values.size() != static_cast<std::size_t>(n_azimuth) * static_cast<std::size_t>(n_polar))
      throw InvalidSpec("angular profile has the wrong number of samples");
    for (double v : values)
      if (!(v > 0.0) || !std::isfinite(v)) throw InvalidSpec("angular profile must be positive and finite");
  }

  /// theta(x/|x|); x must be nonzero.
  double operator()(const Point& x, int d) const {
    if (n_azimuth == 1 && n_polar == 1) return values[0];
    const double two_pi = 2.0 * std::numbers::pi;
    double phi = d >= 2 ? std::atan2(x[1], x[0]) : (x[0] >= 0.0 ? 0.0 : std::numbers::pi);
    if (phi < 0.0) phi += two_pi;
    const double sa = phi / two_pi * n_azimuth;
    const int a0 = static_cast<int>(std::floor(sa)) % n_azimuth;
    const int a1 = (a0 + 1) % n_azimuth;
    const double ta = sa - std::floor(sa);
    auto at = [&](int p, int a) { return values[static_cast<std::size_t>(p) * n_azimuth + a]; };
    if (n_polar == 1) return (1.0 - ta) * at(0, a0) + ta * at(0, a1);
    const double polar = std::acos(std::clamp(x[2] / norm(x, d), -1.0, 1.0));
    const double sp = polar / std::numbers::pi * (n_polar - 1);
    const int p0 = std::min(static_cast<int>(std::floor(sp)), n_polar - 2);
    const double tp = sp - p0;
    const double lo = (1.0 - ta) * at(p0, a0) + ta * at(p0, a1);
    const double hi = (1.0 - ta) * at(p0 + 1, a0) + ta * at(p0 + 1, a1);
    return (1.0 - tp) * lo + tp * hi;
  }
};

/// Multiplicative and additive perturbation of a homogeneous weight:
/// omega = theta(x) * omega_0(x) + g(x), theta(x) = 1 + a sin(k x_1),
/// g(x) = c |x|^gamma.
struct Perturbation {
  double theta_amplitude = 0.0;
  double theta_frequency = 0.0;
  double g_coefficient = 0.0;
  double g_exponent = 0.0;

  double theta(const Point& x) const { return 1.0 + theta_amplitude * std::sin(theta_frequency * x[0]); }
  double theta_lower() const { return 1.0 - std::abs(theta_amplitude); }
  double theta_upper() const { return 1.0 + std::abs(theta_amplitude); }
};

/// Set {x : x_i = 0 for every i in axes}.
struct CoordinateSubspace {
  std::vector<int> axes;

  double distance(const Point& x) const {
    double s = 0.0;
    for (int i : axes) s += x[i] * x[i];
    return std::sqrt(s);
  }
};

/// Immutable description of a weight omega on R^d satisfying omega >= tau0.
class WeightSpec {
 public:
  static WeightSpec constant(int d, double c) {
    WeightSpec s(WeightKind::Constant, d);
    s.value_ = c;
    s.finish();
    return s;
  }

  /// omega = |x'|^alpha with x' the first m coordinates; m = d gives |x|^alpha.
  static WeightSpec power_subspace(int d, int m, double alpha) {
    WeightSpec s(WeightKind::PowerSubspace, d);
    s.codim_ = m;
    s.alpha_ = alpha;
    s.finish();
    return s;
  }

  /// omega = prod |x_i|^{alpha_i}.
  static WeightSpec anisotropic(std::vector<double> exponents) {
    WeightSpec s(WeightKind::AnisotropicProduct, static_cast<int>(exponents.size()));
    s.per_axis_ = std::move(exponents);
    s.finish();
    return s;
  }

  /// omega = |x_1 ... x_m|^{a1} |x_{m+1} ... x_d|^{a2}.
  static WeightSpec two_cone(int d, int m, double a1, double a2) {
    WeightSpec s(WeightKind::TwoCone, d);
    s.codim_ = m;
    s.cone_ = {a1, a2};
    s.finish();
    return s;
  }

  /// omega = |x'|^alpha theta(x/|x|).
  static WeightSpec angular(int d, int m, double alpha, AngularProfile profile) {
    WeightSpec s(WeightKind::AngularModulated, d);
    s.codim_ = m;
    s.alpha_ = alpha;
    s.profile_ = std::move(profile);
    s.finish();
    return s;
  }

  static WeightSpec perturbed(const WeightSpec& base, Perturbation p) {
    WeightSpec s(WeightKind::Perturbed, base.dim());
    s.base_ = std::make_shared<const WeightSpec>(base);
    s.perturbation_ = p;
    s.finish();
    return s;
  }

  /// Copy with an explicit essential lower bound. It must not exceed the
  /// bound computed on the reference cube [-1, 1]^d.
  WeightSpec with_tau0(double tau0) const {
    if (!(tau0 > 0.0)) throw InvalidSpec("tau0 must be positive");
    if (tau0 > reference_infimum() * (1.0 + 1e-12))
      throw InvalidSpec("tau0 exceeds the infimum of the weight on [-1,1]^d");
    WeightSpec s = *this;
    s.tau0_ = tau0;
    return s;
  }

  WeightKind kind() const { return kind_; }
  int dim() const { return dim_; }
  /// Homogeneity degree at the origin (effective degree for composite kinds).
  double alpha() const { return alpha_; }
  double tau0() const { return tau0_; }
  int codim() const { return codim_; }
  double constant_value() const { return value_; }
  const std::vector<double>& per_axis_exponents() const { return per_axis_; }
  std::pair<double, double> cone_exponents() const { return cone_; }
  const AngularProfile& angular_profile() const { return profile_; }
  const Perturbation& perturbation() const { return perturbation_; }
  const WeightSpec& base() const {
    if (!base_) throw PreconditionError("weight has no base");
    return *base_;
  }

  /// Exact t^alpha scaling: every kind except a nontrivially perturbed one.
  bool homogeneous() const {
    if (kind_ != WeightKind::Perturbed) return true;
    return perturbation_.theta_amplitude == 0.0 && perturbation_.g_coefficient == 0.0;
  }

  /// omega(x), or kInfinite on the singular set.
  double operator()(const Point& x) const {
    switch (kind_) {
      case WeightKind::Constant: return value_;
      case WeightKind::PowerSubspace: {
        if (alpha_ == 0.0) return 1.0;
        double r = 0.0;
        for (int i = 0; i < codim_; ++i) r += x[i] * x[i];
        return r == 0.0 ? kInfinite : std::pow(r, 0.5 * alpha_);
      }
      case WeightKind::AnisotropicProduct: {
        double w = 1.0;
        for (int i = 0; i < dim_; ++i) {
          if (per_axis_[i] == 0.0) continue;
          if (x[i] == 0.0) return kInfinite;
          w *= std::pow(std::abs(x[i]), per_axis_[i]);
        }
        return w;
      }
      case WeightKind::TwoCone: {
        double w = 1.0;
        for (int i = 0; i < dim_; ++i) {
          const double e = i < codim_ ? cone_.first : cone_.second;
          if (e == 0.0) continue;
          if (x[i] == 0.0) return kInfinite;
          w *= std::pow(std::abs(x[i]), e);
        }
        return w;
      }
      case WeightKind::AngularModulated: {
        if (norm(x, dim_) == 0.0) return kInfinite;
        double w = 1.0;
        if (alpha_ != 0.0) {
          double r = 0.0;
          for (int i = 0; i < codim_; ++i) r += x[i] * x[i];
          if (r == 0.0) return kInfinite;
          w = std::pow(r, 0.5 * alpha_);
        }
        return w * profile_(x, dim_);
      }
      case WeightKind::Perturbed: {
        const double b = (*base_)(x);
        if (b == kInfinite) return kInfinite;
        double g = 0.0;
        if (perturbation_.g_coefficient != 0.0) {
          const double r = norm(x, dim_);
          if (r == 0.0 && perturbation_.g_exponent < 0.0) return kInfinite;
          g = perturbation_.g_coefficient * std::pow(r, perturbation_.g_exponent);
        }
        return perturbation_.theta(x) * b + g;
      }
    }
    return kInfinite;
  }

  /// Components of Lambda_infinity(omega). Lambda_0 is empty by construction.
  std::vector<CoordinateSubspace> singular_set() const {
    std::vector<CoordinateSubspace> out;
    auto leading = [&](int m) {
      CoordinateSubspace s;
      for (int i = 0; i < m; ++i) s.axes.push_back(i);
      return s;
    };
    switch (kind_) {
      case WeightKind::Constant: break;
      case WeightKind::PowerSubspace:
        if (alpha_ < 0.0) out.push_back(leading(codim_));
        break;
      case WeightKind::AnisotropicProduct:
        for (int i = 0; i < dim_; ++i)
          if (per_axis_[i] < 0.0) out.push_back({{i}});
        break;
      case WeightKind::TwoCone:
        for (int i = 0; i < dim_; ++i)
          if ((i < codim_ ? cone_.first : cone_.second) < 0.0) out.push_back({{i}});
        break;
      case WeightKind::AngularModulated:
        if (alpha_ < 0.0) out.push_back(leading(codim_));
        out.push_back(leading(dim_));
        break;
      case WeightKind::Perturbed:
        out = base_->singular_set();
        if (perturbation_.g_coefficient != 0.0 && perturbation_.g_exponent < 0.0) out.push_back(leading(dim_));
        break;
    }
    return out;
  }

  double distance_to_singular_set(const Point& x) const {
    double best = kInfinite;
    for (const auto& s : singular_set()) best = std::min(best, s.distance(x));
    return best;
  }

  /// Largest value the weight takes at distance h/8 from its singular set;
  /// used to cap discretized weights.
  double singular_cap(double h) const {
    const double t = h / 8.0;
    switch (kind_) {
      case WeightKind::Constant: return value_;
      case WeightKind::PowerSubspace: return std::max(tau0_, std::pow(t, alpha_));
      case WeightKind::AnisotropicProduct: {
        double e = 0.0;
        for (double a : per_axis_) e += std::min(a, 0.0);
        return std::max(tau0_, std::pow(t, e));
      }
      case WeightKind::TwoCone:
        return std::max(tau0_, std::pow(t, codim_ * cone_.first + (dim_ - codim_) * cone_.second));
      case WeightKind::AngularModulated: return std::max(tau0_, std::pow(t, alpha_) * profile_.upper());
      case WeightKind::Perturbed: {
        double g = 0.0;
        if (perturbation_.g_coefficient != 0.0)
          g = perturbation_.g_coefficient *
              std::max(std::pow(t, perturbation_.g_exponent), std::pow(std::sqrt(dim_), perturbation_.g_exponent));
        return std::max(tau0_, perturbation_.theta_upper() * base_->singular_cap(h) + g);
      }
    }
    return kInfinite;
  }

  /// Lower bound of the weight on [-1, 1]^d.
  double reference_infimum() const {
    switch (kind_) {
      case WeightKind::Constant: return value_;
      case WeightKind::PowerSubspace: return alpha_ == 0.0 ? 1.0 : std::pow(std::sqrt(double(codim_)), alpha_);
      case WeightKind::AnisotropicProduct:
      case WeightKind::TwoCone: return 1.0;
      case WeightKind::AngularModulated:
        return (alpha_ == 0.0 ? 1.0 : std::pow(std::sqrt(double(codim_)), alpha_)) * profile_.lower();
      case WeightKind::Perturbed: {
        double g = 0.0;
        if (perturbation_.g_coefficient != 0.0 && perturbation_.g_exponent < 0.0)
          g = perturbation_.g_coefficient * std::pow(std::sqrt(double(dim_)), perturbation_.g_exponent);
        return perturbation_.theta_lower() * base_->reference_infimum() + g;
      }
    }
    return 0.0;
  }

 private:
  WeightSpec(WeightKind k, int d) : kind_(k), dim_(d) {}

  void finish() {
    check_dim(dim_);
    switch (kind_) {
      case WeightKind::Constant:
        if (!(value_ > 0.0) || !std::isfinite(value_)) throw InvalidSpec("constant weight must be positive");
        alpha_ = 0.0;
        break;
      case WeightKind::PowerSubspace:
      case WeightKind::AngularModulated:
        if (codim_ < 0 || codim_ > dim_) throw InvalidSpec("subspace codimension must lie in [0, d]");
        if (!(alpha_ <= 0.0 && alpha_ > -codim_))
          throw InvalidSpec("power exponent must satisfy -m < alpha <= 0");
        if (kind_ == WeightKind::AngularModulated) profile_.validate(dim_);
        break;
      case WeightKind::AnisotropicProduct:
        alpha_ = 0.0;
        for (double a : per_axis_) {
          if (!(a <= 0.0 && a > -1.0)) throw InvalidSpec("per-axis exponents must lie in (-1, 0]");
          alpha_ += a;
        }
        break;
      case WeightKind::TwoCone:
        if (codim_ < 1 || codim_ >= dim_) throw InvalidSpec("two-cone split must satisfy 1 <= m < d");
        if (!(cone_.first <= 0.0 && cone_.first > -codim_ && cone_.first > -1.0))
          throw InvalidSpec("first cone exponent must lie in (max(-m, -1), 0]");
        if (!(cone_.second <= 0.0 && cone_.second > -(dim_ - codim_) && cone_.second > -1.0))
          throw InvalidSpec("second cone exponent must lie in (max(m - d, -1), 0]");
        alpha_ = codim_ * cone_.first + (dim_ - codim_) * cone_.second;
        break;
      case WeightKind::Perturbed: {
        if (base_->kind() == WeightKind::Perturbed) throw InvalidSpec("perturbed weight needs a homogeneous base");
        const auto& p = perturbation_;
        if (!(std::abs(p.theta_amplitude) < 1.0)) throw InvalidSpec("theta amplitude must satisfy |a| < 1");
        if (!std::isfinite(p.theta_frequency)) throw InvalidSpec("theta frequency must be finite");
        if (!(p.g_coefficient >= 0.0)) throw InvalidSpec("additive term coefficient must be nonnegative");
        alpha_ = base_->alpha();
        if (p.g_coefficient > 0.0 && !(p.g_exponent > alpha_))
          throw InvalidSpec("additive term must be o(|x|^alpha): need gamma > alpha");
        break;
      }
    }
    tau0_ = reference_infimum();
    if (!(tau0_ > 0.0)) throw InvalidSpec("weight has no positive lower bound");
  }

  WeightKind kind_;
  int dim_;
  double alpha_ = 0.0;
  int codim_ = 0;
  double value_ = 1.0;
  std::vector<double> per_axis_;
  std::pair<double, double> cone_{0.0, 0.0};
  AngularProfile profile_;
  Perturbation perturbation_;
  std::shared_ptr<const WeightSpec> base_;
  double tau0_ = 1.0;
};

inline double eval_weight(const WeightSpec& spec, const Point& x) { return spec(x); }

/// Value of f at p; on the singular set (f infinite) the average of f over the
/// 2^d points p + (+-step/8, ..., +-step/8).
template <class F>
double offset_sample(F&& f, const Point& p, int d, double step) {
  const double v = f(p);
  if (std::isfinite(v)) return v;
  const double t = step / 8.0;
  double sum = 0.0;
  const int corners = 1 << d;
  for (int c = 0; c < corners; ++c) {
    Point q = p;
    for (int i = 0; i < d; ++i) q[i] += (c >> i & 1) ? t : -t;
    sum += f(q);
  }
  return sum / corners;
}

/// Calls visit(p) at every midpoint of a q^d lattice of cells covering the
/// bounding cube of B_r(c) whose center lies in the closed ball.
template <class Visit>
void for_each_ball_midpoint(const Point& c, double r, int d, int q, Visit&& visit) {
  const double cell = 2.0 * r / q;
  std::array<int, kMaxDim> k{0, 0, 0};
  while (true) {
    Point p = c;
    double rr = 0.0;
    for (int i = 0; i < d; ++i) {
      const double s = -r + (k[i] + 0.5) * cell;
      p[i] += s;
      rr += s * s;
    }
    if (rr <= r * r) visit(p);
    int axis = 0;
    while (axis < d && ++k[axis] == q) k[axis++] = 0;
    if (axis == d) break;
  }
}

struct BallMoments {
  double mean_weight = 0.0;
  double mean_inverse = 0.0;
  std::size_t samples = 0;
  bool valid = false;
};

/// Midpoint averages of omega and 1/omega over B_r(c) with q cells per axis.
inline BallMoments ball_moments(const WeightSpec& w, const Point& c, double r, int q) {
  const int d = w.dim();
  const double cell = 2.0 * r / q;
  BallMoments m;
  auto inverse = [&](const Point& x) {
    const double v = w(x);
    return v == kInfinite ? 0.0 : 1.0 / v;
  };
  for_each_ball_midpoint(c, r, d, q, [&](const Point& p) {
    const double v = w(p);
    if (std::isfinite(v)) {
      m.mean_weight += v;
      m.mean_inverse += 1.0 / v;
    } else {
      m.mean_weight += offset_sample(w, p, d, cell);
      const double t = cell / 8.0;
      double s = 0.0;
      for (int cc = 0; cc < (1 << d); ++cc) {
        Point y = p;
        for (int i = 0; i < d; ++i) y[i] += (cc >> i & 1) ? t : -t;
        s += inverse(y);
      }
      m.mean_inverse += s / (1 << d);
    }
    ++m.samples;
  });
  if (m.samples == 0) return m;
  m.mean_weight /= static_cast<double>(m.samples);
  m.mean_inverse /= static_cast<double>(m.samples);
  m.valid = std::isfinite(m.mean_weight) && m.mean_inverse > 0.0;
  return m;
}

/// Midpoint integral of f over B_r(c) with the singular offset policy.
template <class F>
double ball_integral(F&& f, const Point& c, double r, int d, int q) {
  const double cell = 2.0 * r / q;
  double sum = 0.0;
  for_each_ball_midpoint(c, r, d, q, [&](const Point& p) { sum += offset_sample(f, p, d, cell); });
  return sum * std::pow(cell, d);
}

struct Ball {
  Point center{};
  double radius = 0.0;
};

/// Estimate of the A2 constant over a finite ball family. Because the family
/// is finite this is a lower estimate of the supremum over all balls.
struct A2Report {
  double c1_estimate = 0.0;
  std::vector<Ball> ball_family;
  std::vector<double> per_ball_products;
  int quadrature_resolution = 0;
  int skipped = 0;
};

/// Balls of radius 2^-k_min ... 2^-k_max centered on a lattice of the given
/// spacing anchored at the domain's lower corner, kept when inside the domain.
inline std::vector<Ball> dyadic_ball_family(const Box& domain, double center_spacing = 0.25, int k_min = 1,
                                            int k_max = 6) {
  if (!(center_spacing > 0.0)) throw PreconditionError("center spacing must be positive");
  const int d = domain.dim;
  std::array<int, kMaxDim> count{1, 1, 1};
  for (int i = 0; i < d; ++i)
    count[i] = static_cast<int>(std::floor((domain.hi[i] - domain.lo[i]) / center_spacing + 1e-9)) + 1;
  std::vector<Ball> family;
  for (double r : dyadic_radii(k_min, k_max)) {
    std::array<int, kMaxDim> k{0, 0, 0};
    while (true) {
      Point c{};
      for (int i = 0; i < d; ++i) c[i] = domain.lo[i] + k[i] * center_spacing;
      if (domain.contains_ball(c, r)) family.push_back({c, r});
      int axis = 0;
      while (axis < d && ++k[axis] == count[axis]) k[axis++] = 0;
      if (axis == d) break;
    }
  }
  return family;
}

inline A2Report a2_constant(const WeightSpec& spec, const std::vector<Ball>& family, int resolution = 16) {
  if (family.empty()) throw PreconditionError("A2 ball family is empty");
  if (resolution < 8) throw PreconditionError("A2 quadrature needs at least 8 points per axis");
  A2Report rep;
  rep.quadrature_resolution = resolution;
  for (const auto& b : family) {
    const auto m = ball_moments(spec, b.center, b.radius, resolution);
    if (!m.valid) {
      ++rep.skipped;
      continue;
    }
    const double product = m.mean_weight * m.mean_inverse;
    rep.ball_family.push_back(b);
    rep.per_ball_products.push_back(product);
    rep.c1_estimate = std::max(rep.c1_estimate, product);
  }
  return rep;
}

inline A2Report a2_constant(const WeightSpec& spec, const Box& domain, int resolution = 16) {
  return a2_constant(spec, dyadic_ball_family(domain), resolution);
}

/// omega_lambda(x) = lambda^{|alpha|} omega(lambda x). Homogeneous kinds are fixed points.
inline WeightSpec rescaled_weight(const WeightSpec& spec, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw PreconditionError("rescaling factor must lie in (0, 1]");
  if (spec.kind() != WeightKind::Perturbed) return spec;
  Perturbation p = spec.perturbation();
  p.theta_frequency *= lambda;
  if (p.g_coefficient != 0.0) p.g_coefficient *= std::pow(lambda, -spec.alpha() + p.g_exponent);
  return WeightSpec::perturbed(spec.base(), p);
}

/// The homogeneous part omega_0 of a weight: the base of a perturbed weight
/// scaled by theta(0) = 1, the weight itself otherwise.
inline WeightSpec homogeneous_part(const WeightSpec& spec) {
  return spec.kind() == WeightKind::Perturbed ? spec.base() : spec;
}

struct HomogenizationLimit {
  WeightSpec limit_spec;
  std::vector<double> lambda_sequence;
  std::vector<double> l1_residuals;
  bool converging = true;
};

/// Strictly decreasing, or already below 1e-12 of `scale` at the last entry.
inline bool residuals_converging(const std::vector<double>& residuals, double scale) {
  if (residuals.empty()) return true;
  if (residuals.back() <= 1e-12 * scale) return true;
  for (std::size_t i = 1; i < residuals.size(); ++i)
    if (!(residuals[i] < residuals[i - 1])) return false;
  return true;
}

/// L1(B_1) distance between omega_lambda and omega_0 along a decreasing sequence.
inline HomogenizationLimit homogenized_limit(const WeightSpec& spec, const std::vector<double>& lambdas,
                                             int resolution = 256) {
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0 && lambdas[i] < 1.0)) throw PreconditionError("lambdas must lie in (0, 1)");
    if (i > 0 && !(lambdas[i] < lambdas[i - 1])) throw PreconditionError("lambdas must be strictly decreasing");
  }
  HomogenizationLimit out{homogeneous_part(spec), lambdas, {}, true};
  const int d = spec.dim();
  double scale = 0.0;
  for (double lambda : lambdas) {
    const WeightSpec wl = rescaled_weight(spec, lambda);
    auto diff = [&](const Point& x) {
      const double a = wl(x), b = out.limit_spec(x);
      if (a == kInfinite || b == kInfinite) return kInfinite;
      return std::abs(a - b);
    };
    out.l1_residuals.push_back(ball_integral(diff, Point{}, 1.0, d, resolution));
    scale = std::max(scale, ball_integral(out.limit_spec, Point{}, 1.0, d, resolution));
  }
  out.converging = residuals_converging(out.l1_residuals, scale);
  return out;
}

/// Averaged singularity rate tau_star r^alpha <= avg_{B_r(center)} omega <= L r^alpha.
struct SingularityBounds {
  std::vector<double> radii;
  std::vector<double> averages;
  double tau_star = 0.0;
  double L_bound = 0.0;
};

inline SingularityBounds singularity_bounds(const WeightSpec& spec, const std::vector<double>& radii,
                                            int resolution = 256, const Point& center = {}) {
  if (radii.empty()) throw PreconditionError("singularity bounds need radii");
  SingularityBounds out;
  out.radii = radii;
  out.tau_star = kInfinite;
  for (double r : radii) {
    if (!(r > 0.0 && r < 1.0)) throw PreconditionError("radii must lie in (0, 1)");
    const auto m = ball_moments(spec, center, r, resolution);
    out.averages.push_back(m.mean_weight);
    const double scaled_avg = m.mean_weight / std::pow(r, spec.alpha());
    out.tau_star = std::min(out.tau_star, scaled_avg);
    out.L_bound = std::max(out.L_bound, scaled_avg);
  }
  return out;
}

}  // namespace cavlab
