#pragma once

/// \file
/// Free boundary extraction and the geometric measurements taken on discrete
/// minimizers: growth, regularity, nondegeneracy, dyadic decay, density,
/// distance comparability and Hölder modulus.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cavlab/geometry.hpp"
#include "cavlab/grid.hpp"
#include "cavlab/weights.hpp"

namespace cavlab {

/// Discretization allowances. Chosen for this repository, not exact constants.
inline constexpr double kExponentSlack = 0.15;
inline constexpr double kNondegeneracySlack = 0.5;
inline constexpr double kDyadicSlack = 1.2;

/// Sharp growth exponent 1 + |alpha|/2.
inline double growth_exponent(double alpha) { return 1.0 + std::abs(alpha) / 2.0; }

/// Blow-up exponent 1 - alpha/2. Equal to growth_exponent for alpha <= 0.
inline double blowup_beta(double alpha) { return 1.0 - alpha / 2.0; }

/// 2 sqrt((1/L) d^d / (d+2)^(d+2)).
inline double nondegeneracy_constant(int d, double L) {
  if (!(L > 0.0)) throw PreconditionError("L must be positive");
  return 2.0 * std::sqrt((1.0 / L) * std::pow(d, d) / std::pow(d + 2, d + 2));
}

struct FreeBoundarySet {
  /// Lower-corner node of each cell with both a zero and a strictly positive vertex.
  std::vector<std::size_t> cells;
  std::vector<Point> points;

  bool empty() const { return cells.empty(); }
  std::size_t size() const { return cells.size(); }
};

namespace detail {

inline void require_nonnegative(const ScalarField& u) {
  for (double v : u.values())
    if (!(v >= 0.0)) throw PreconditionError("field must be nonnegative");
}

/// Visits the 2^d vertex offsets of a cell.
template <class Visit>
void for_each_corner(const Grid& g, Visit&& visit) {
  const int d = g.dim();
  for (int mask = 0; mask < (1 << d); ++mask) {
    std::size_t off = 0;
    for (int a = 0; a < d; ++a)
      if (mask & (1 << a)) off += g.stride(a);
    visit(off);
  }
}

}  // namespace detail

inline FreeBoundarySet extract_free_boundary(const ScalarField& u) {
  detail::require_nonnegative(u);
  const Grid& g = u.grid();
  const int d = g.dim();
  FreeBoundarySet fb;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Index k = g.multi_index(i);
    bool interior_corner = true;
    for (int a = 0; a < d; ++a) interior_corner &= k[a] + 1 < g.n(a);
    if (!interior_corner) continue;
    bool zero = false, positive = false;
    detail::for_each_corner(g, [&](std::size_t off) {
      const double v = u[i + off];
      zero |= v == 0.0;
      positive |= v > 0.0;
    });
    if (!(zero && positive)) continue;
    fb.cells.push_back(i);
    fb.points.push_back(offset(g.position(k), Point{0.5 * g.h(), d > 1 ? 0.5 * g.h() : 0.0, d > 2 ? 0.5 * g.h() : 0.0}));
  }
  return fb;
}

/// A node with u = 0 and a strictly positive axis neighbor.
inline bool is_free_boundary_node(const ScalarField& u, std::size_t i) {
  if (u[i] != 0.0) return false;
  const Grid& g = u.grid();
  const Index k = g.multi_index(i);
  for (int a = 0; a < g.dim(); ++a) {
    if (g.has_neighbor(k, a, -1) && u[i - g.stride(a)] > 0.0) return true;
    if (g.has_neighbor(k, a, +1) && u[i + g.stride(a)] > 0.0) return true;
  }
  return false;
}

inline std::vector<std::size_t> free_boundary_nodes(const ScalarField& u) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (is_free_boundary_node(u, i)) out.push_back(i);
  return out;
}

/// Free boundary node minimizing `key`; ties go to the node nearest the
/// origin, then to the lowest index.
template <class Key>
std::size_t free_boundary_node_by(const ScalarField& u, Key&& key) {
  const Grid& g = u.grid();
  const auto nodes = free_boundary_nodes(u);
  if (nodes.empty()) throw PreconditionError("field has no free boundary node");
  constexpr double tie = 1e-12;
  std::size_t best = nodes.front();
  double best_key = key(g.position(best));
  double best_r = norm(g.position(best), g.dim());
  for (std::size_t i : nodes) {
    const Point x = g.position(i);
    const double k = key(x), r = norm(x, g.dim());
    if (k < best_key - tie || (k <= best_key + tie && r < best_r - tie)) {
      best = i;
      best_key = k;
      best_r = r;
    }
  }
  return best;
}

inline std::size_t nearest_free_boundary_node(const ScalarField& u, const Point& target) {
  const int d = u.grid().dim();
  return free_boundary_node_by(u, [&](const Point& x) { return distance(x, target, d); });
}

/// Free boundary node nearest to the given singular set. An empty set falls
/// back to the node nearest the origin.
inline std::size_t canonical_free_boundary_node(const ScalarField& u, const std::vector<CoordinateSubspace>& singular) {
  if (singular.empty()) return nearest_free_boundary_node(u, Point{});
  return free_boundary_node_by(u, [&](const Point& x) {
    double dist = kInfinite;
    for (const auto& s : singular) dist = std::min(dist, s.distance(x));
    return dist;
  });
}

inline std::size_t canonical_free_boundary_node(const ScalarField& u, const WeightSpec& spec) {
  return canonical_free_boundary_node(u, spec.singular_set());
}

struct GrowthReport {
  Point center{};
  std::size_t center_node = 0;
  int dim = 2;
  double h = 0.0;
  double domain_radius = 0.0;
  std::vector<double> radii;
  std::vector<double> S_values;
  std::vector<char> usable;
  double fitted_exponent = 0.0;
  double fitted_constant = 0.0;
  /// Slopes between consecutive usable radii, smallest radius first.
  std::vector<double> local_slopes;
  std::vector<double> nondeg_ratios;
  double paper_constant = 0.0;

  std::size_t usable_count() const { return static_cast<std::size_t>(std::count(usable.begin(), usable.end(), 1)); }
};

/// Whether r lies in [4h, domain_radius/4].
inline bool usable_radius(double r, double h, double domain_radius) {
  constexpr double rel = 1e-12;
  return r >= 4.0 * h * (1.0 - rel) && r <= 0.25 * domain_radius * (1.0 + rel);
}

inline std::vector<double> usable_radii(const Grid& g, const std::vector<double>& radii) {
  std::vector<double> out;
  for (double r : radii)
    if (usable_radius(r, g.h(), g.domain_radius())) out.push_back(r);
  return out;
}

/// S(r) = max of u over the discrete ball B_r(z0).
inline GrowthReport growth_function(const ScalarField& u, std::size_t z0, const std::vector<double>& radii) {
  if (z0 >= u.size() || !is_free_boundary_node(u, z0)) throw PreconditionError("growth center is not a free boundary node");
  if (radii.empty()) throw PreconditionError("growth function needs radii");
  const Grid& g = u.grid();
  GrowthReport rep;
  rep.center_node = z0;
  rep.center = g.position(z0);
  rep.dim = g.dim();
  rep.h = g.h();
  rep.domain_radius = g.domain_radius();
  rep.radii = radii;
  std::sort(rep.radii.begin(), rep.radii.end());
  for (double r : rep.radii) {
    if (!(r > 0.0)) throw PreconditionError("radii must be positive");
    double s = 0.0;
    for (auto i : g.ball_nodes(rep.center, r)) s = std::max(s, u[i]);
    rep.S_values.push_back(s);
    rep.usable.push_back(usable_radius(r, rep.h, rep.domain_radius) ? 1 : 0);
  }
  return rep;
}

/// Log-log least squares slope over the usable radii. Fills the fit fields of `rep`.
inline double fit_growth_exponent(GrowthReport& rep) {
  std::vector<double> lr, ls;
  for (std::size_t j = 0; j < rep.radii.size(); ++j) {
    if (!rep.usable[j]) continue;
    if (!(rep.S_values[j] > 0.0)) throw PreconditionError("S(r) vanishes at a usable radius");
    lr.push_back(std::log(rep.radii[j]));
    ls.push_back(std::log(rep.S_values[j]));
  }
  if (lr.size() < 4) throw PreconditionError("fewer than 4 usable radii in [4h, domain radius/4]");
  const LineFit fit = least_squares(lr, ls);
  rep.fitted_exponent = fit.slope;
  rep.fitted_constant = std::exp(fit.intercept);
  rep.local_slopes.clear();
  for (std::size_t j = 1; j < lr.size(); ++j) rep.local_slopes.push_back((ls[j] - ls[j - 1]) / (lr[j] - lr[j - 1]));
  return rep.fitted_exponent;
}

struct RegularityCheck {
  double exponent = 0.0;
  double inferred_C = 0.0;
  double min_small_scale_slope = 0.0;
  bool pass = false;
};

/// C = max over usable radii of S(r)/r^(1+|alpha|/2). Passes when C is finite
/// and every local slope in the smaller half of the window reaches the exponent minus 0.15.
inline RegularityCheck check_optimal_regularity(GrowthReport& rep, double alpha) {
  if (rep.local_slopes.empty()) fit_growth_exponent(rep);
  RegularityCheck c;
  c.exponent = growth_exponent(alpha);
  for (std::size_t j = 0; j < rep.radii.size(); ++j)
    if (rep.usable[j]) c.inferred_C = std::max(c.inferred_C, rep.S_values[j] / std::pow(rep.radii[j], c.exponent));
  const std::size_t half = (rep.local_slopes.size() + 1) / 2;
  c.min_small_scale_slope = kInfinite;
  for (std::size_t j = 0; j < half; ++j) c.min_small_scale_slope = std::min(c.min_small_scale_slope, rep.local_slopes[j]);
  c.pass = std::isfinite(c.inferred_C) && c.min_small_scale_slope >= c.exponent - kExponentSlack;
  return c;
}

struct NondegeneracyCheck {
  double min_ratio = 0.0;
  double paper_constant = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

/// min over usable radii of S(r)/r^(1+|alpha|/2) against half the explicit constant.
inline NondegeneracyCheck check_nondegeneracy(GrowthReport& rep, double alpha, double L_bound, int d) {
  NondegeneracyCheck c;
  const double p = growth_exponent(alpha);
  c.paper_constant = nondegeneracy_constant(d, L_bound);
  c.threshold = kNondegeneracySlack * c.paper_constant;
  rep.paper_constant = c.paper_constant;
  rep.nondeg_ratios.clear();
  c.min_ratio = kInfinite;
  for (std::size_t j = 0; j < rep.radii.size(); ++j) {
    const double q = rep.S_values[j] / std::pow(rep.radii[j], p);
    rep.nondeg_ratios.push_back(q);
    if (rep.usable[j]) c.min_ratio = std::min(c.min_ratio, q);
  }
  if (rep.usable_count() == 0) throw PreconditionError("no usable radii for the nondegeneracy check");
  c.pass = c.min_ratio >= c.threshold;
  return c;
}

/// u(z0 + rho x) / max(1, sup_{B_rho(z0)} u), sampled on the nodes of u's grid
/// translated so that z0 sits at the origin. Requires rho to be a multiple of h.
inline ScalarField normalized_rescaling(const ScalarField& u, std::size_t z0, double rho = 1.0) {
  const Grid& g = u.grid();
  const Point c = g.position(z0);
  double sup = 0.0;
  for (auto i : g.ball_nodes(c, rho)) sup = std::max(sup, u[i]);
  const double scale = 1.0 / std::max(1.0, sup);
  Point lo{};
  for (int a = 0; a < g.dim(); ++a) lo[a] = (g.lo()[a] - c[a]) / rho;
  ScalarField out(Grid(g.dim(), g.extents(), lo, g.h() / rho));
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = u[i] * scale;
  return out;
}

struct DyadicLevel {
  int k = 0;
  double radius = 0.0;
  double sup = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct DyadicDecayReport {
  std::vector<DyadicLevel> levels;
  bool truncated = false;
  std::string note;
  bool pass = false;
};

/// sup_{B_{2^-k}} u <= 1.2 * 2^(k(alpha/2 - 1)) at the origin of u's grid for k = 1..k_max.
/// Levels with 2^-k < 4h are dropped and noted.
inline DyadicDecayReport dyadic_decay_check(const ScalarField& u_rescaled, double alpha, int k_max) {
  if (k_max < 1) throw PreconditionError("k_max must be at least 1");
  const Grid& g = u_rescaled.grid();
  double sup1 = 0.0;
  for (auto i : g.ball_nodes(Point{}, 1.0)) sup1 = std::max(sup1, u_rescaled[i]);
  if (sup1 > 1.0 + 1e-12) throw PreconditionError("rescaled field must satisfy sup_{B_1} <= 1");
  DyadicDecayReport rep;
  rep.pass = true;
  for (int k = 1; k <= k_max; ++k) {
    const double r = std::ldexp(1.0, -k);
    if (r < 4.0 * g.h() * (1.0 - 1e-12)) {
      rep.truncated = true;
      rep.note = "levels k >= " + std::to_string(k) + " fall below 4h and were skipped";
      break;
    }
    DyadicLevel lv;
    lv.k = k;
    lv.radius = r;
    for (auto i : g.ball_nodes(Point{}, r)) lv.sup = std::max(lv.sup, u_rescaled[i]);
    lv.bound = std::pow(2.0, k * (alpha / 2.0 - 1.0));
    lv.pass = lv.sup <= kDyadicSlack * lv.bound;
    rep.pass = rep.pass && lv.pass;
    rep.levels.push_back(lv);
  }
  return rep;
}

struct DensityReport {
  std::vector<double> radii;
  std::vector<double> fractions;
  double min_fraction = 0.0;
};

/// Node-count fraction of {u > 0} in the discrete ball B_r(z0), clipped to the grid.
inline DensityReport positive_density(const ScalarField& u, std::size_t z0, const std::vector<double>& radii) {
  if (z0 >= u.size() || !is_free_boundary_node(u, z0)) throw PreconditionError("density center is not a free boundary node");
  if (radii.empty()) throw PreconditionError("density needs radii");
  const Grid& g = u.grid();
  const Point c = g.position(z0);
  DensityReport rep;
  rep.min_fraction = 1.0;
  for (double r : radii) {
    const auto nodes = g.ball_nodes(c, r);
    std::size_t pos = 0;
    for (auto i : nodes) pos += u[i] > 0.0;
    const double frac = static_cast<double>(pos) / static_cast<double>(nodes.size());
    rep.radii.push_back(r);
    rep.fractions.push_back(frac);
    rep.min_fraction = std::min(rep.min_fraction, frac);
  }
  return rep;
}

/// Distance from x to the nearest free boundary cell center.
inline double distance_to_free_boundary(const FreeBoundarySet& fb, const Point& x, int d) {
  double best = kInfinite;
  for (const auto& p : fb.points) best = std::min(best, distance(p, x, d));
  return best;
}

/// Interior nodes with u > 0 at distance >= 2h from the free boundary.
inline std::vector<std::size_t> comparability_samples(const ScalarField& u, const FreeBoundarySet& fb) {
  const Grid& g = u.grid();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(u[i] > 0.0) || g.on_boundary(i)) continue;
    if (distance_to_free_boundary(fb, g.position(i), g.dim()) >= 2.0 * g.h() * (1.0 - 1e-12)) out.push_back(i);
  }
  return out;
}

struct ComparabilityReport {
  double c_lower = 0.0;
  double c_upper = 0.0;
  std::size_t samples = 0;
  double eccentricity() const { return c_upper / c_lower; }
};

/// Extremes of u(x)/dist(x, free boundary)^(1+|alpha|/2) over the sample nodes.
inline ComparabilityReport distance_comparability(const ScalarField& u, double alpha, const FreeBoundarySet& fb,
                                                  const std::vector<std::size_t>& sample_nodes) {
  if (fb.empty()) throw PreconditionError("free boundary is empty");
  if (sample_nodes.empty()) throw PreconditionError("comparability needs sample nodes");
  const Grid& g = u.grid();
  const double p = growth_exponent(alpha);
  ComparabilityReport rep;
  rep.c_lower = kInfinite;
  for (std::size_t i : sample_nodes) {
    const double dist = distance_to_free_boundary(fb, g.position(i), g.dim());
    if (!(u[i] > 0.0) || dist < 2.0 * g.h() * (1.0 - 1e-12))
      throw PreconditionError("sample nodes must be positive and at distance >= 2h from the free boundary");
    const double q = u[i] / std::pow(dist, p);
    rep.c_lower = std::min(rep.c_lower, q);
    rep.c_upper = std::max(rep.c_upper, q);
  }
  rep.samples = sample_nodes.size();
  return rep;
}

struct HolderReport {
  /// Dyadic scales rho, largest first, with the modulus sup{|u(x) - u(y)| : |x - y| <= rho}.
  std::vector<double> radii;
  std::vector<double> oscillations;
  std::size_t pairs = 0;
  double tau_hat = 0.0;
  double seminorm = 0.0;
  bool constant = false;
};

/// Modulus of continuity of u restricted to the nodes inside `subdomain`, at
/// dyadic rho in [2h, min side/4].
inline HolderReport holder_modulus(const ScalarField& u, const Box& subdomain) {
  const Grid& g = u.grid();
  const int d = g.dim();
  if (subdomain.dim != d) throw PreconditionError("subdomain dimension differs from the grid");
  for (int a = 0; a < d; ++a)
    if (!(subdomain.lo[a] > g.box().lo[a] && subdomain.hi[a] < g.box().hi[a] && subdomain.lo[a] < subdomain.hi[a]))
      throw PreconditionError("subdomain must lie compactly inside the grid");

  HolderReport rep;
  const double rho_max = subdomain.min_side() / 4.0;
  for (double rho = std::ldexp(1.0, static_cast<int>(std::floor(std::log2(rho_max)))); rho >= 2.0 * g.h() * (1.0 - 1e-12);
       rho /= 2.0)
    rep.radii.push_back(rho);
  if (rep.radii.size() < 2) throw PreconditionError("subdomain too small for two dyadic scales");

  std::vector<std::size_t> nodes;
  std::vector<char> inside(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (subdomain.contains(g.position(i))) {
      nodes.push_back(i);
      inside[i] = 1;
    }

  // Offsets within the largest radius, tagged by length.
  const int reach = static_cast<int>(std::floor(rep.radii.front() / g.h() + 1e-9));
  struct Offset {
    long delta;
    Index step;
    double length;
  };
  std::vector<Offset> offsets;
  Index k{0, 0, 0};
  for (int a = 0; a < d; ++a) k[a] = -reach;
  while (true) {
    double len2 = 0.0;
    long delta = 0;
    for (int a = 0; a < d; ++a) {
      len2 += double(k[a]) * k[a];
      delta += static_cast<long>(k[a]) * static_cast<long>(g.stride(a));
    }
    const double len = std::sqrt(len2) * g.h();
    if (delta > 0 && len <= rep.radii.front() * (1.0 + 1e-12)) offsets.push_back({delta, k, len});
    int axis = d - 1;
    while (axis >= 0 && ++k[axis] > reach) k[axis--] = -reach;
    if (axis < 0) break;
  }

  auto scan = [&](auto&& visit) {
    for (std::size_t i : nodes) {
      const Index ki = g.multi_index(i);
      for (const auto& o : offsets) {
        bool ok = true;
        for (int a = 0; a < d && ok; ++a) ok = ki[a] + o.step[a] >= 0 && ki[a] + o.step[a] < g.n(a);
        if (!ok) continue;
        const std::size_t j = static_cast<std::size_t>(static_cast<long>(i) + o.delta);
        if (inside[j]) visit(o.length, std::abs(u[i] - u[j]));
      }
    }
  };
  rep.oscillations.assign(rep.radii.size(), 0.0);
  scan([&](double len, double du) {
    ++rep.pairs;
    for (std::size_t r = 0; r < rep.radii.size(); ++r)
      if (len <= rep.radii[r] * (1.0 + 1e-12)) rep.oscillations[r] = std::max(rep.oscillations[r], du);
  });

  if (rep.oscillations.front() == 0.0) {
    rep.constant = true;
    return rep;
  }
  std::vector<double> lr, lo;
  for (std::size_t r = 0; r < rep.radii.size(); ++r)
    if (rep.oscillations[r] > 0.0) {
      lr.push_back(std::log(rep.radii[r]));
      lo.push_back(std::log(rep.oscillations[r]));
    }
  if (lr.size() < 2) throw PreconditionError("oscillation vanishes at all but one scale");
  rep.tau_hat = std::max(0.0, least_squares(lr, lo).slope);
  scan([&](double len, double du) { rep.seminorm = std::max(rep.seminorm, du / std::pow(len, rep.tau_hat)); });
  return rep;
}

}  // namespace cavlab
