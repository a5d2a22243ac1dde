#pragma once

/// \file
/// Discrete local minimizers of the cavitation functional by exact nodewise
/// coordinate descent, omega-harmonic replacements, and the closeness and
/// Harnack measurements built on them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <thread>
#include <vector>

#include "cavlab/grid.hpp"

namespace cavlab {

/// Nondecreasing step function beta: R -> [0, 1]. beta(v) = values[j] where j
/// counts the jump locations strictly below v, so beta is left-continuous and
/// the canonical instance {0}, {0, 1} is the indicator of (0, inf).
struct JumpProfile {
  std::vector<double> locations{0.0};
  std::vector<double> values{0.0, 1.0};

  static JumpProfile cavitation() { return {}; }

  void validate() const {
    if (values.size() != locations.size() + 1) throw InvalidSpec("jump profile needs one more value than jumps");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] >= 0.0 && values[i] <= 1.0)) throw InvalidSpec("jump profile values must lie in [0, 1]");
      if (i > 0 && values[i] < values[i - 1]) throw InvalidSpec("jump profile must be nondecreasing");
    }
    for (std::size_t i = 1; i < locations.size(); ++i)
      if (!(locations[i] > locations[i - 1])) throw InvalidSpec("jump locations must be increasing");
  }

  double operator()(double v) const {
    std::size_t j = 0;
    while (j < locations.size() && locations[j] < v) ++j;
    return values[j];
  }
};

enum class Ordering { Lexicographic, RedBlack };
enum class TieBreak { Zero };

/// Starting field of the descent.
enum class Initialization {
  /// Boundary data on the boundary, zero inside.
  ZeroInterior,
  /// Mean over axes of the linear interpolation between the two boundary
  /// nodes on the axis line through each node.
  BoundaryBlend,
};

struct SolveConfig {
  double tol = 1e-13;
  /// Bound on |div(w grad u)| at nodes set positive during the last sweep.
  double residual_tol = 1e-10;
  int max_sweeps = 200000;
  Ordering ordering = Ordering::Lexicographic;
  TieBreak tie_break = TieBreak::Zero;
  double epsilon = 1.0;
  Initialization init = Initialization::ZeroInterior;
  int threads = 1;

  void validate() const {
    if (!(tol > 0.0)) throw InvalidSpec("solver tolerance must be positive");
    if (!(residual_tol > 0.0)) throw InvalidSpec("residual tolerance must be positive");
    if (max_sweeps < 1) throw InvalidSpec("max_sweeps must be at least 1");
    if (!(epsilon >= 0.0)) throw InvalidSpec("jump coefficient must be nonnegative");
    if (threads < 1) throw InvalidSpec("threads must be at least 1");
  }
};

struct SolveResult {
  ScalarField field;
  std::vector<EnergyBreakdown> energy_history;
  int sweeps = 0;
  bool converged = false;
  int phase_flips_last_sweep = 0;
  double last_update = 0.0;
  double last_residual = 0.0;
};

namespace detail {

/// Interior nodes with their axis neighbors and face weights, laid out flat.
struct Stencil {
  int arms = 0;
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> neighbors;
  std::vector<double> weights;
  std::vector<double> diagonal;

  Stencil(const FaceWeightField& w, const std::vector<std::size_t>& order) : arms(2 * w.grid().dim()), nodes(order) {
    const Grid& g = w.grid();
    neighbors.resize(nodes.size() * arms);
    weights.resize(nodes.size() * arms);
    diagonal.resize(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const std::size_t i = nodes[j];
      double a_sum = 0.0;
      for (int a = 0; a < g.dim(); ++a) {
        const std::size_t st = g.stride(a);
        neighbors[j * arms + 2 * a] = i - st;
        weights[j * arms + 2 * a] = w(a, i - st);
        neighbors[j * arms + 2 * a + 1] = i + st;
        weights[j * arms + 2 * a + 1] = w(a, i);
        a_sum += w(a, i - st) + w(a, i);
      }
      diagonal[j] = a_sum;
    }
  }
};

inline std::vector<std::size_t> interior_nodes(const Grid& g, Ordering ord) {
  std::vector<std::size_t> out;
  for (int color = 0; color < (ord == Ordering::RedBlack ? 2 : 1); ++color)
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Index k = g.multi_index(i);
      if (g.on_boundary(k)) continue;
      if (ord == Ordering::RedBlack && (k[0] + k[1] + k[2]) % 2 != color) continue;
      out.push_back(i);
    }
  return out;
}

inline ScalarField initial_field(const BoundaryData& f, Initialization init) {
  const Grid& g = f.grid();
  ScalarField u = f.as_field();
  if (init == Initialization::ZeroInterior) return u;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Index k = g.multi_index(i);
    if (g.on_boundary(k)) continue;
    double s = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      Index lo = k, hi = k;
      lo[a] = 0;
      hi[a] = g.n(a) - 1;
      const double t = static_cast<double>(k[a]) / (g.n(a) - 1);
      s += (1.0 - t) * f[g.index(lo)] + t * f[g.index(hi)];
    }
    u[i] = s / g.dim();
  }
  return u;
}

/// Exact minimizer of A (v - b)^2 + c beta(v) over v >= 0. Candidates are
/// the clipped quadratic argmin and every nonnegative jump location; among
/// equal energies the smaller value wins, so zero wins ties.
inline double nodewise_minimizer(double a, double b, double c, const JumpProfile& beta) {
  double best = 0.0;
  double best_e = kInfinite;
  auto consider = [&](double v) {
    const double e = a * (v - b) * (v - b) + c * beta(v);
    if (e < best_e || (e == best_e && v < best)) {
      best = v;
      best_e = e;
    }
  };
  for (double t : beta.locations)
    if (t >= 0.0) consider(t);
  consider(std::max(b, 0.0));
  return best;
}

template <class Body>
void parallel_chunks(std::size_t begin, std::size_t end, int threads, Body&& body) {
  if (threads <= 1 || end - begin < 4096) {
    body(begin, end);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (end - begin + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::size_t lo = begin + t * chunk, hi = std::min(end, lo + chunk);
    if (lo < hi) pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Nodewise exact coordinate descent for
///   sum_faces w (du/h)^2 h^d + epsilon h^d sum_nodes beta(u)
/// with u = f on the grid boundary. Returns a nodewise (local) minimizer.
inline SolveResult minimize_cavitation(const FaceWeightField& w, const BoundaryData& f, const JumpProfile& profile,
                                       const SolveConfig& cfg, const std::optional<ScalarField>& start = std::nullopt) {
  cfg.validate();
  profile.validate();
  const Grid& g = w.grid();
  if (!(g == f.grid())) throw PreconditionError("weights and boundary data live on different grids");
  SolveResult res;
  res.field = start ? *start : detail::initial_field(f, cfg.init);
  ScalarField& u = res.field;
  if (!(u.grid() == g)) throw PreconditionError("initial field lives on a different grid");
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.on_boundary(i)) u[i] = f[i];

  const auto order = detail::interior_nodes(g, cfg.ordering);
  const detail::Stencil st(w, order);
  const double jump = cfg.epsilon * g.h() * g.h();
  const std::size_t half = cfg.ordering == Ordering::RedBlack ? [&] {
    std::size_t c = 0;
    for (auto i : order) {
      const Index k = g.multi_index(i);
      c += (k[0] + k[1] + k[2]) % 2 == 0;
    }
    return c;
  }()
                                                              : order.size();

  const double inv_h2 = 1.0 / (g.h() * g.h());
  // At a node left positive, a (v - old) / h^2 is div(w grad u) before the update.
  auto relax = [&](std::size_t lo, std::size_t hi, double& max_update, double& max_residual, int& flips) {
    for (std::size_t j = lo; j < hi; ++j) {
      const std::size_t i = st.nodes[j];
      double s = 0.0;
      for (int k = 0; k < st.arms; ++k) s += st.weights[j * st.arms + k] * u[st.neighbors[j * st.arms + k]];
      const double a = st.diagonal[j];
      const double v = detail::nodewise_minimizer(a, s / a, jump, profile);
      const double old = u[i];
      max_update = std::max(max_update, std::abs(v - old));
      if (v > 0.0) max_residual = std::max(max_residual, a * std::abs(v - old) * inv_h2);
      flips += (v > 0.0) != (old > 0.0);
      u[i] = v;
    }
  };

  res.energy_history.push_back(energy(u, w, cfg.epsilon));
  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    double max_update = 0.0, max_residual = 0.0;
    int flips = 0;
    if (cfg.ordering == Ordering::Lexicographic || cfg.threads == 1) {
      relax(0, order.size(), max_update, max_residual, flips);
    } else {
      for (auto [lo, hi] : {std::pair{std::size_t{0}, half}, std::pair{half, order.size()}}) {
        std::vector<double> mu(cfg.threads, 0.0), mr(cfg.threads, 0.0);
        std::vector<int> fl(cfg.threads, 0);
        const std::size_t chunk = (hi - lo + cfg.threads - 1) / cfg.threads;
        detail::parallel_chunks(lo, hi, cfg.threads, [&](std::size_t a, std::size_t b) {
          const std::size_t slot = chunk == 0 ? 0 : (a - lo) / chunk;
          relax(a, b, mu[slot], mr[slot], fl[slot]);
        });
        for (int t = 0; t < cfg.threads; ++t) {
          max_update = std::max(max_update, mu[t]);
          max_residual = std::max(max_residual, mr[t]);
          flips += fl[t];
        }
      }
    }
    res.energy_history.push_back(energy(u, w, cfg.epsilon));
    res.sweeps = sweep;
    res.phase_flips_last_sweep = flips;
    res.last_update = max_update;
    res.last_residual = max_residual;
    if (max_update < cfg.tol && max_residual < cfg.residual_tol && flips == 0) {
      res.converged = true;
      break;
    }
  }
  return res;
}

/// Energy spread over randomized restarts of the descent.
struct MultiStartReport {
  std::vector<double> energies;
  double reference_energy = 0.0;
  double max_gap = 0.0;
  bool flagged = false;
};

/// Re-solves from the canonical start plus uniform noise in
/// [0, amplitude * sup f] at interior nodes, seeded deterministically, and
/// flags energy gaps above `gap_tolerance` against the canonical solve.
inline MultiStartReport multistart(const FaceWeightField& w, const BoundaryData& f, const JumpProfile& profile,
                                   const SolveConfig& cfg, int starts = 5, std::uint64_t seed = 0,
                                   double amplitude = 1e-3, double gap_tolerance = 1e-6) {
  MultiStartReport rep;
  const auto base = minimize_cavitation(w, f, profile, cfg);
  rep.reference_energy = base.energy_history.back().total;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(0.0, amplitude * f.sup_norm());
  const Grid& g = w.grid();
  for (int s = 0; s < starts; ++s) {
    ScalarField start = detail::initial_field(f, cfg.init);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!g.on_boundary(i)) start[i] += noise(rng);
    const auto r = minimize_cavitation(w, f, profile, cfg, start);
    const double e = r.energy_history.back().total;
    rep.energies.push_back(e);
    rep.max_gap = std::max(rep.max_gap, std::abs(e - rep.reference_energy));
  }
  rep.flagged = rep.max_gap > gap_tolerance;
  return rep;
}

/// Solves div(w grad h) = 0 at nodes where `unknown` is set, with h = u
/// elsewhere, by Jacobi-preconditioned conjugate gradients. Stops once every
/// nodal correction |b_i - h_i| is at most tol * max(|u|_inf, tiny).
inline ScalarField solve_weighted_harmonic(const ScalarField& u, const FaceWeightField& w,
                                           const std::vector<char>& unknown, double tol = 1e-13,
                                           int max_iterations = 100000) {
  const Grid& g = u.grid();
  std::vector<std::size_t> nodes;
  std::vector<long> local(g.size(), -1);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (unknown[i]) {
      if (g.on_boundary(i)) throw PreconditionError("harmonic solve region touches the grid boundary");
      local[i] = static_cast<long>(nodes.size());
      nodes.push_back(i);
    }
  ScalarField h = u;
  if (nodes.empty()) return h;
  const detail::Stencil st(w, nodes);
  const std::size_t n = nodes.size();
  std::vector<double> rhs(n, 0.0), x(n), r(n), z(n), p(n), q(n);
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = u[nodes[j]];
    for (int k = 0; k < st.arms; ++k) {
      const std::size_t nb = st.neighbors[j * st.arms + k];
      if (local[nb] < 0) rhs[j] += st.weights[j * st.arms + k] * u[nb];
    }
  }
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = st.diagonal[j] * v[j];
      for (int k = 0; k < st.arms; ++k) {
        const long l = local[st.neighbors[j * st.arms + k]];
        if (l >= 0) s -= st.weights[j * st.arms + k] * v[static_cast<std::size_t>(l)];
      }
      out[j] = s;
    }
  };
  auto correction = [&] {
    double m = 0.0;
    for (std::size_t j = 0; j < n; ++j) m = std::max(m, std::abs(r[j]) / st.diagonal[j]);
    return m;
  };
  const double scale = std::max(u.sup_norm(), 1e-300);
  apply(x, q);
  for (std::size_t j = 0; j < n; ++j) r[j] = rhs[j] - q[j];
  double rz = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    z[j] = r[j] / st.diagonal[j];
    p[j] = z[j];
    rz += r[j] * z[j];
  }
  int it = 0;
  while (correction() > tol * scale) {
    if (++it > max_iterations) throw ConvergenceError("harmonic replacement did not converge", correction());
    apply(p, q);
    double pq = 0.0;
    for (std::size_t j = 0; j < n; ++j) pq += p[j] * q[j];
    const double step = rz / pq;
    for (std::size_t j = 0; j < n; ++j) {
      x[j] += step * p[j];
      r[j] -= step * q[j];
    }
    // recompute the true residual now and then to stop drift
    if (it % 50 == 0) {
      apply(x, q);
      for (std::size_t j = 0; j < n; ++j) r[j] = rhs[j] - q[j];
    }
    double rz_new = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      z[j] = r[j] / st.diagonal[j];
      rz_new += r[j] * z[j];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t j = 0; j < n; ++j) p[j] = z[j] + beta * p[j];
  }
  for (std::size_t j = 0; j < n; ++j) h[nodes[j]] = x[j];
  return h;
}

/// h = u outside the discrete ball B_R(center), omega-harmonic inside it.
inline ScalarField harmonic_replacement(const ScalarField& u, const FaceWeightField& w, const Point& center,
                                        double radius, double tol = 1e-13) {
  const auto mask = ball_mask(u.grid(), center, radius);
  return solve_weighted_harmonic(u, w, mask, tol);
}

struct ClosenessGap {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

inline constexpr double kClosenessSlack = 1.1;

/// Weighted Dirichlet energy of u - h over B_R(center) against epsilon R^d.
inline ClosenessGap closeness_gap(const ScalarField& u, const ScalarField& h, const FaceWeightField& w,
                                  const Point& center, double radius, double epsilon) {
  const Grid& g = u.grid();
  ScalarField diff(g);
  for (std::size_t i = 0; i < g.size(); ++i) diff[i] = u[i] - h[i];
  ClosenessGap c;
  c.lhs = masked_dirichlet(diff, w, ball_mask(g, center, radius));
  c.rhs = epsilon * std::pow(radius, g.dim());
  c.pass = c.lhs <= kClosenessSlack * c.rhs;
  return c;
}

/// sup/inf over B_R(center) of the omega-harmonic function in the open ball
/// B_4R(center) whose values outside it are the profile evaluated at the
/// radial projection onto the sphere of radius 4R.
inline double harnack_ratio(const FaceWeightField& w, const Point& center, double radius,
                            const std::function<double(const Point&)>& boundary_profile, double tol = 1e-13) {
  const Grid& g = w.grid();
  const int d = g.dim();
  const double outer = 4.0 * radius;
  if (!g.box().contains_ball(center, outer + g.h())) throw PreconditionError("B_4R must lie inside the grid");
  ScalarField u(g);
  std::vector<char> unknown(g.size(), 0);
  bool any_positive = false;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.position(i);
    const double r = distance(x, center, d);
    if (r < outer) {
      unknown[i] = 1;
      continue;
    }
    Point y = center;
    for (int a = 0; a < d; ++a) y[a] += (x[a] - center[a]) * outer / r;
    const double v = boundary_profile(y);
    if (!(v >= 0.0)) throw PreconditionError("harnack boundary profile must be nonnegative");
    any_positive = any_positive || v > 0.0;
    u[i] = v;
  }
  if (!any_positive) throw PreconditionError("harnack boundary profile vanishes identically");
  const ScalarField h = solve_weighted_harmonic(u, w, unknown, tol);
  double hi = 0.0, lo = kInfinite;
  for (auto i : g.ball_nodes(center, radius)) {
    if (!(h[i] > 0.0)) throw std::logic_error("omega-harmonic solution is not positive inside B_R");
    hi = std::max(hi, h[i]);
    lo = std::min(lo, h[i]);
  }
  return hi / lo;
}

/// CSV rows "sweep,dirichlet,volume,total".
inline void write_energy_csv(std::ostream& os, const SolveResult& r) {
  os << "sweep,dirichlet,volume,total\n";
  os.precision(17);
  for (std::size_t s = 0; s < r.energy_history.size(); ++s) {
    const auto& e = r.energy_history[s];
    os << s << ',' << e.dirichlet << ',' << e.volume << ',' << e.total << '\n';
  }
}

}  // namespace cavlab
