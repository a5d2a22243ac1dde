#pragma once

/// \file
/// Blow-up rescaling u_lambda(x) = lambda^-beta u(lambda x), the energy scaling
/// identity, and re-solved blow-up sequences under rescaled weights.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cavlab/analysis.hpp"
#include "cavlab/grid.hpp"
#include "cavlab/solver.hpp"
#include "cavlab/weights.hpp"

namespace cavlab {

/// lambda^-beta u(lambda x) on the nodes of `reference`, by multilinear interpolation.
inline ScalarField rescale_minimizer(const ScalarField& u, double lambda, double alpha, const Grid& reference) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw PreconditionError("lambda must lie in (0, 1]");
  if (reference.dim() != u.grid().dim()) throw PreconditionError("reference grid dimension differs");
  const Box rb = reference.box();
  const Box ub = u.grid().box();
  for (int a = 0; a < reference.dim(); ++a)
    if (lambda * rb.lo[a] < ub.lo[a] - 1e-12 || lambda * rb.hi[a] > ub.hi[a] + 1e-12)
      throw PreconditionError("lambda times the reference box leaves the field's box");
  const double factor = std::pow(lambda, -blowup_beta(alpha));
  return ScalarField::from_function(reference, [&](const Point& x) { return factor * u.interpolate(scaled(x, lambda)); });
}

/// Nodes of g inside lambda * box(g). Requires lambda = 2^-j and the scaled
/// corners to fall on nodes of g.
inline Grid nested_subgrid(const Grid& g, double lambda) {
  int exponent = 0;
  const double mant = std::frexp(lambda, &exponent);
  if (!(lambda > 0.0 && lambda <= 1.0) || mant != 0.5) throw PreconditionError("lambda must be a power 2^-j");
  Index n{1, 1, 1};
  Point lo{};
  for (int a = 0; a < g.dim(); ++a) {
    lo[a] = lambda * g.lo()[a];
    const double shift = (lo[a] - g.lo()[a]) / g.h();
    const double cells = lambda * (g.n(a) - 1);
    if (std::abs(shift - std::round(shift)) > 1e-9 || std::abs(cells - std::round(cells)) > 1e-9)
      throw PreconditionError("lambda times the box does not align with the grid");
    n[a] = static_cast<int>(std::lround(cells)) + 1;
    if (n[a] < 3) throw PreconditionError("nested subgrid has fewer than 3 nodes per axis");
  }
  return Grid(g.dim(), n, lo, g.h());
}

inline ScalarField restrict_to(const ScalarField& u, const Grid& sub) {
  const Grid& g = u.grid();
  return ScalarField::from_function(sub, [&](const Point& x) { return u[g.nearest_node(x)]; });
}

/// lambda^-(alpha + 2 beta - 2): the jump coefficient of the rescaled functional
/// relative to its gradient term. Equal to 1 because beta = 1 - alpha/2.
inline double jump_rescaling_factor(double lambda, double alpha) {
  return std::pow(lambda, -(alpha + 2.0 * blowup_beta(alpha) - 2.0));
}

struct ScalingIdentity {
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_error = 0.0;
};

inline double relative_error(double lhs, double rhs) { return std::abs(lhs - rhs) / std::max(lhs, 1e-30); }

/// lhs: energy of u on lambda * box over the nested subgrid, weight spec.
/// rhs: lambda^d times the energy of u_lambda on u's grid, weight rescaled_weight(spec, lambda).
inline ScalingIdentity scaling_energy_identity(const ScalarField& u, const WeightSpec& spec, double lambda,
                                               double epsilon = 1.0) {
  const Grid& g = u.grid();
  const Grid sub = nested_subgrid(g, lambda);
  ScalingIdentity s;
  s.lhs = energy(restrict_to(u, sub), sample_face_weights(spec, sub), epsilon).total;
  const ScalarField ul = rescale_minimizer(u, lambda, spec.alpha(), g);
  const WeightSpec wl = rescaled_weight(spec, lambda);
  s.rhs = std::pow(lambda, g.dim()) * energy(ul, sample_face_weights(wl, g), epsilon * jump_rescaling_factor(lambda, spec.alpha())).total;
  s.rel_error = relative_error(s.lhs, s.rhs);
  return s;
}

struct BlowupSequence {
  std::vector<double> lambdas;
  double beta = 1.0;
  ScalarField base;
  std::vector<ScalarField> rescaled_fields;
  /// Entry k compares scales k and k+1 over B_{1/2}.
  std::vector<double> successive_sup_distances;
  /// (energy of the base solve on lambda * box, lambda^d times the energy of the re-solved field).
  std::vector<std::pair<double, double>> energy_pairs;
  std::vector<int> sweeps;
  bool truncated = false;
  std::string diagnostic;

  bool distances_decreasing() const {
    if (successive_sup_distances.size() < 2) return false;
    for (std::size_t k = 1; k < successive_sup_distances.size(); ++k)
      if (!(successive_sup_distances[k] < successive_sup_distances[k - 1])) return false;
    return true;
  }
};

namespace detail {

inline double free_boundary_offset(const ScalarField& u) {
  const Grid& g = u.grid();
  return norm(g.position(nearest_free_boundary_node(u, Point{})), g.dim());
}

inline double sup_distance_on_ball(const ScalarField& a, const ScalarField& b, double radius) {
  double m = 0.0;
  for (auto i : a.grid().ball_nodes(Point{}, radius)) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace detail

/// Solves on the grid of `data` with weight spec, then for each lambda
/// re-solves with weight rescaled_weight(spec, lambda) and Dirichlet data
/// lambda^-beta u(lambda x). The jump coefficient is cfg.epsilon at every
/// scale. Lambdas must be strictly decreasing powers 2^-j.
inline BlowupSequence blowup_convergence(const WeightSpec& spec, const BoundaryData& data,
                                         const std::vector<double>& lambdas, const SolveConfig& cfg) {
  if (lambdas.empty()) throw PreconditionError("blow-up needs at least one scale");
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (!(lambdas[k] > 0.0 && lambdas[k] < 1.0)) throw PreconditionError("blow-up scales must lie in (0, 1)");
    if (k > 0 && !(lambdas[k] < lambdas[k - 1])) throw PreconditionError("blow-up scales must decrease strictly");
  }
  const Grid& g = data.grid();
  const double reach = 2.0 * g.h() * (1.0 + 1e-12);
  const JumpProfile profile = JumpProfile::cavitation();

  BlowupSequence seq;
  seq.beta = blowup_beta(spec.alpha());
  const SolveResult base = minimize_cavitation(sample_face_weights(spec, g), data, profile, cfg);
  if (!base.converged) throw ConvergenceError("base solve of the blow-up did not converge", base.last_update);
  seq.base = base.field;
  if (free_boundary_nodes(base.field).empty() || detail::free_boundary_offset(base.field) > reach)
    throw PreconditionError("the origin is not within 2h of the base free boundary");

  for (double lambda : lambdas) {
    const ScalarField ul = rescale_minimizer(base.field, lambda, spec.alpha(), g);
    const BoundaryData fk = BoundaryData::from_function(g, [&](const Point& x) { return ul[g.nearest_node(x)]; });
    const WeightSpec wk = rescaled_weight(spec, lambda);
    const SolveConfig ck = [&] {
      SolveConfig c = cfg;
      c.epsilon = cfg.epsilon * jump_rescaling_factor(lambda, spec.alpha());
      return c;
    }();
    const FaceWeightField w = sample_face_weights(wk, g);
    const SolveResult r = minimize_cavitation(w, fk, profile, ck);
    if (!r.converged) throw ConvergenceError("blow-up solve did not converge", r.last_update);
    if (free_boundary_nodes(r.field).empty() || detail::free_boundary_offset(r.field) > reach) {
      seq.truncated = true;
      seq.diagnostic = "free boundary left the 2h neighborhood of the origin at lambda = " + std::to_string(lambda);
      break;
    }
    const Grid sub = nested_subgrid(g, lambda);
    const double lhs = energy(restrict_to(base.field, sub), sample_face_weights(spec, sub), cfg.epsilon).total;
    const double rhs = std::pow(lambda, g.dim()) * energy(r.field, w, ck.epsilon).total;
    seq.lambdas.push_back(lambda);
    seq.energy_pairs.emplace_back(lhs, rhs);
    seq.sweeps.push_back(r.sweeps);
    if (!seq.rescaled_fields.empty())
      seq.successive_sup_distances.push_back(detail::sup_distance_on_ball(r.field, seq.rescaled_fields.back(), 0.5));
    seq.rescaled_fields.push_back(r.field);
  }
  return seq;
}

}  // namespace cavlab
