#pragma once

/// \file
/// Uniform Cartesian grids, nodal fields, face-sampled weights and the
/// discrete cavitation functional.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cavlab/geometry.hpp"
#include "cavlab/weights.hpp"

namespace cavlab {

using Index = std::array<int, kMaxDim>;

/// Nodes lo + i*h, 0 <= i_a < n_a, row-major with the first axis slowest.
class Grid {
 public:
  Grid() = default;

  Grid(int dim, Index n, Point lo, double h) : dim_(dim), n_(n), lo_(lo), h_(h) {
    check_dim(dim);
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidSpec("grid spacing must be positive");
    for (int a = 0; a < kMaxDim; ++a) {
      if (a >= dim) {
        n_[a] = 1;
        lo_[a] = 0.0;
      } else if (n_[a] < 3) {
        throw InvalidSpec("grid needs at least 3 nodes per axis");
      }
    }
    stride_[kMaxDim - 1] = 1;
    for (int a = kMaxDim - 2; a >= 0; --a) stride_[a] = stride_[a + 1] * static_cast<std::size_t>(n_[a + 1]);
    size_ = stride_[0] * static_cast<std::size_t>(n_[0]);
  }

  /// n nodes per axis on [lo, hi]^d.
  static Grid cube(int dim, int n, double lo = -1.0, double hi = 1.0) {
    if (n < 3) throw InvalidSpec("grid needs at least 3 nodes per axis");
    if (!(hi > lo)) throw InvalidSpec("grid box is degenerate");
    Point p{};
    for (int a = 0; a < dim; ++a) p[a] = lo;
    return Grid(dim, {n, n, n}, p, (hi - lo) / (n - 1));
  }

  int dim() const { return dim_; }
  int n(int axis) const { return n_[axis]; }
  Index extents() const { return n_; }
  double h() const { return h_; }
  Point lo() const { return lo_; }
  std::size_t size() const { return size_; }
  std::size_t stride(int axis) const { return stride_[axis]; }
  double cell_volume() const { return std::pow(h_, dim_); }

  Box box() const {
    Box b;
    b.dim = dim_;
    for (int a = 0; a < dim_; ++a) {
      b.lo[a] = lo_[a];
      b.hi[a] = lo_[a] + (n_[a] - 1) * h_;
    }
    return b;
  }

  /// Half of the shortest box side.
  double domain_radius() const { return 0.5 * box().min_side(); }

  Index multi_index(std::size_t i) const {
    Index k{0, 0, 0};
    for (int a = 0; a < kMaxDim; ++a) {
      k[a] = static_cast<int>(i / stride_[a]);
      i %= stride_[a];
    }
    return k;
  }

  std::size_t index(const Index& k) const {
    std::size_t i = 0;
    for (int a = 0; a < kMaxDim; ++a) i += static_cast<std::size_t>(k[a]) * stride_[a];
    return i;
  }

  Point position(const Index& k) const {
    Point p{};
    for (int a = 0; a < dim_; ++a) p[a] = lo_[a] + k[a] * h_;
    return p;
  }
  Point position(std::size_t i) const { return position(multi_index(i)); }

  bool on_boundary(const Index& k) const {
    for (int a = 0; a < dim_; ++a)
      if (k[a] == 0 || k[a] == n_[a] - 1) return true;
    return false;
  }
  bool on_boundary(std::size_t i) const { return on_boundary(multi_index(i)); }

  /// Nearest node to x, clamped into the grid.
  std::size_t nearest_node(const Point& x) const {
    Index k{0, 0, 0};
    for (int a = 0; a < dim_; ++a)
      k[a] = std::clamp(static_cast<int>(std::lround((x[a] - lo_[a]) / h_)), 0, n_[a] - 1);
    return index(k);
  }

  /// Discrete ball: nodes with |node - center| <= radius (ties included).
  std::vector<std::size_t> ball_nodes(const Point& center, double radius) const {
    std::vector<std::size_t> out;
    Index lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
      lo[a] = std::max(0, static_cast<int>(std::ceil((center[a] - radius - lo_[a]) / h_ - 1e-9)));
      hi[a] = std::min(n_[a] - 1, static_cast<int>(std::floor((center[a] + radius - lo_[a]) / h_ + 1e-9)));
      if (lo[a] > hi[a]) return out;
    }
    const double r2 = radius * radius * (1.0 + 1e-12);
    Index k = lo;
    while (true) {
      const Point p = position(k);
      double s = 0.0;
      for (int a = 0; a < dim_; ++a) s += (p[a] - center[a]) * (p[a] - center[a]);
      if (s <= r2) out.push_back(index(k));
      int axis = dim_ - 1;
      while (axis >= 0 && ++k[axis] > hi[axis]) {
        k[axis] = lo[axis];
        --axis;
      }
      if (axis < 0) break;
    }
    return out;
  }

  /// Whether the node has an axis neighbor in direction +-1 along `axis`.
  bool has_neighbor(const Index& k, int axis, int dir) const {
    return dir > 0 ? k[axis] + 1 < n_[axis] : k[axis] > 0;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dim_ == b.dim_ && a.n_ == b.n_ && a.lo_ == b.lo_ && a.h_ == b.h_;
  }

 private:
  int dim_ = 2;
  Index n_{3, 3, 1};
  Point lo_{};
  double h_ = 1.0;
  std::array<std::size_t, kMaxDim> stride_{};
  std::size_t size_ = 0;
};

/// One real per grid node.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(Grid g, double fill = 0.0) : grid_(std::move(g)), values_(grid_.size(), fill) {}
  ScalarField(Grid g, std::vector<double> v) : grid_(std::move(g)), values_(std::move(v)) {
    if (values_.size() != grid_.size()) throw PreconditionError("field length does not match the grid");
  }

  template <class F>
  static ScalarField from_function(const Grid& g, F&& f) {
    ScalarField u(g);
    for (std::size_t i = 0; i < g.size(); ++i) u[i] = f(g.position(i));
    return u;
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double sup_norm() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  /// Multilinear interpolation at x; throws outside the grid box.
  double interpolate(const Point& x) const {
    const int d = grid_.dim();
    const Box b = grid_.box();
    if (!b.contains(x, 1e-12 * grid_.h())) throw PreconditionError("interpolation point outside the grid");
    Index base{0, 0, 0};
    std::array<double, kMaxDim> t{0, 0, 0};
    for (int a = 0; a < d; ++a) {
      const double s = (x[a] - grid_.lo()[a]) / grid_.h();
      int k = static_cast<int>(std::floor(s));
      k = std::clamp(k, 0, grid_.n(a) - 2);
      base[a] = k;
      t[a] = std::clamp(s - k, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int c = 0; c < (1 << d); ++c) {
      Index k = base;
      double wgt = 1.0;
      for (int a = 0; a < d; ++a) {
        const bool up = c >> a & 1;
        k[a] += up;
        wgt *= up ? t[a] : 1.0 - t[a];
      }
      if (wgt != 0.0) sum += wgt * values_[grid_.index(k)];
    }
    return sum;
  }

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Nonnegative Dirichlet data, stored on the grid boundary nodes.
class BoundaryData {
 public:
  template <class F>
  static BoundaryData from_function(const Grid& g, F&& f) {
    BoundaryData b;
    b.grid_ = g;
    b.values_ = ScalarField(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g.on_boundary(i)) continue;
      const double v = f(g.position(i));
      if (!std::isfinite(v) || v < 0.0) throw PreconditionError("boundary data must be finite and nonnegative");
      b.values_[i] = v;
      b.sup_norm_ = std::max(b.sup_norm_, v);
    }
    return b;
  }

  static BoundaryData constant(const Grid& g, double level) {
    return from_function(g, [level](const Point&) { return level; });
  }

  const Grid& grid() const { return grid_; }
  double sup_norm() const { return sup_norm_; }
  double operator[](std::size_t i) const { return values_[i]; }
  /// Field holding the data on boundary nodes and zero inside.
  const ScalarField& as_field() const { return values_; }

 private:
  Grid grid_;
  ScalarField values_;
  double sup_norm_ = 0.0;
};

/// Weight samples on cell faces. faces[a][i] is the face between node i and
/// i + e_a, defined for nodes whose a-th index is below n_a - 1.
class FaceWeightField {
 public:
  FaceWeightField() = default;
  FaceWeightField(Grid g, double tau0, double cap) : grid_(std::move(g)), tau0_(tau0), cap_(cap) {
    for (int a = 0; a < grid_.dim(); ++a) faces_[a].assign(grid_.size(), 0.0);
  }

  const Grid& grid() const { return grid_; }
  double tau0() const { return tau0_; }
  double cap() const { return cap_; }
  double operator()(int axis, std::size_t lower_node) const { return faces_[axis][lower_node]; }
  double& at(int axis, std::size_t lower_node) { return faces_[axis][lower_node]; }

  template <class Visit>
  void for_each_face(Visit&& visit) const {
    for (int a = 0; a < grid_.dim(); ++a) {
      const std::size_t st = grid_.stride(a);
      const std::size_t period = st * static_cast<std::size_t>(grid_.n(a));
      // lower nodes of a-faces are those whose a-th index is below n_a - 1
      for (std::size_t block = 0; block < grid_.size(); block += period)
        for (std::size_t i = block; i < block + period - st; ++i) visit(a, i, i + st, faces_[a][i]);
    }
  }

  /// Node weight: mean of the adjacent face weights.
  double node_weight(std::size_t i) const {
    const Index k = grid_.multi_index(i);
    double s = 0.0;
    int c = 0;
    for (int a = 0; a < grid_.dim(); ++a) {
      if (k[a] + 1 < grid_.n(a)) {
        s += faces_[a][i];
        ++c;
      }
      if (k[a] > 0) {
        s += faces_[a][i - grid_.stride(a)];
        ++c;
      }
    }
    return s / c;
  }

 private:
  Grid grid_;
  double tau0_ = 1.0;
  double cap_ = 1.0;
  std::array<std::vector<double>, kMaxDim> faces_;
};

/// Samples omega at face centers. Centers on the singular set use the offset
/// average; every sample is clamped to [tau0, cap(h)].
inline FaceWeightField sample_face_weights(const WeightSpec& spec, const Grid& grid) {
  if (spec.dim() != grid.dim()) throw PreconditionError("weight and grid dimensions differ");
  const double cap = spec.singular_cap(grid.h());
  FaceWeightField w(grid, spec.tau0(), cap);
  const int d = grid.dim();
  for (int a = 0; a < d; ++a) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Index k = grid.multi_index(i);
      if (k[a] + 1 >= grid.n(a)) continue;
      Point c = grid.position(k);
      c[a] += 0.5 * grid.h();
      const double v = offset_sample(spec, c, d, grid.h());
      w.at(a, i) = std::clamp(v, spec.tau0(), cap);
    }
  }
  return w;
}

/// Value of the discrete functional, split into its two parts.
struct EnergyBreakdown {
  double dirichlet = 0.0;
  double volume = 0.0;
  double total = 0.0;
  double epsilon = 0.0;
};

/// sum_faces w (du/h)^2 h^d + epsilon h^d #{u > 0}.
inline EnergyBreakdown energy(const ScalarField& u, const FaceWeightField& w, double epsilon) {
  const Grid& g = u.grid();
  if (!(g == w.grid())) throw PreconditionError("field and weights live on different grids");
  EnergyBreakdown e;
  e.epsilon = epsilon;
  const double hd = g.cell_volume();
  const double inv_h2 = 1.0 / (g.h() * g.h());
  w.for_each_face([&](int, std::size_t lo, std::size_t hi, double wf) {
    const double du = u[hi] - u[lo];
    e.dirichlet += wf * du * du;
  });
  e.dirichlet *= inv_h2 * hd;
  std::size_t positive = 0;
  for (std::size_t i = 0; i < u.size(); ++i) positive += u[i] > 0.0;
  e.volume = epsilon * hd * static_cast<double>(positive);
  e.total = e.dirichlet + e.volume;
  return e;
}

/// Conservative stencil div(w grad u) at interior nodes, zero on the boundary.
inline ScalarField discrete_flux_divergence(const ScalarField& u, const FaceWeightField& w) {
  const Grid& g = u.grid();
  ScalarField out(g);
  const double inv_h2 = 1.0 / (g.h() * g.h());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.on_boundary(i)) continue;
    double s = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t st = g.stride(a);
      s += w(a, i) * (u[i + st] - u[i]) - w(a, i - st) * (u[i] - u[i - st]);
    }
    out[i] = s * inv_h2;
  }
  return out;
}

/// Weighted Dirichlet energy restricted to faces with an endpoint in `mask`.
inline double masked_dirichlet(const ScalarField& u, const FaceWeightField& w, const std::vector<char>& mask) {
  const Grid& g = u.grid();
  double s = 0.0;
  w.for_each_face([&](int, std::size_t lo, std::size_t hi, double wf) {
    if (!mask[lo] && !mask[hi]) return;
    const double du = u[hi] - u[lo];
    s += wf * du * du;
  });
  return s * g.cell_volume() / (g.h() * g.h());
}

inline std::vector<char> ball_mask(const Grid& g, const Point& center, double radius) {
  std::vector<char> mask(g.size(), 0);
  for (auto i : g.ball_nodes(center, radius)) mask[i] = 1;
  return mask;
}

/// (sum f^2 omega h^d) / (R^2 * weighted Dirichlet energy over B_R(center)).
inline double poincare_ratio(const ScalarField& f, const FaceWeightField& w, double radius, const Point& center = {}) {
  const Grid& g = f.grid();
  const auto mask = ball_mask(g, center, radius);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (f[i] == 0.0) continue;
    if (!mask[i] || distance(g.position(i), center, g.dim()) >= radius * (1.0 - 1e-12))
      throw PreconditionError("poincare test function must vanish on and outside the sphere");
  }
  double mass = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (mask[i] && f[i] != 0.0) mass += f[i] * f[i] * w.node_weight(i);
  mass *= g.cell_volume();
  const double grad = masked_dirichlet(f, w, mask);
  if (grad == 0.0) throw PreconditionError("poincare ratio undefined for zero gradient energy");
  return mass / (radius * radius * grad);
}

/// Text dump: "d n1 ... nd h" then one value per line in row-major order.
/// Doubles are written in shortest round-trip form.
inline void write_dump(std::ostream& os, const ScalarField& u) {
  const Grid& g = u.grid();
  char buf[64];
  auto put = [&](double v) {
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    os.write(buf, res.ptr - buf);
  };
  os << g.dim();
  for (int a = 0; a < g.dim(); ++a) os << ' ' << g.n(a);
  os << ' ';
  put(g.h());
  os << '\n';
  for (double v : u.values()) {
    put(v);
    os << '\n';
  }
}

/// Reads a dump. The header carries no origin, so the grid is centered at 0.
inline ScalarField read_dump(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidSpec("empty grid dump");
  std::istringstream header(line);
  int d = 0;
  header >> d;
  check_dim(d);
  Index n{1, 1, 1};
  for (int a = 0; a < d; ++a)
    if (!(header >> n[a])) throw InvalidSpec("grid dump header is truncated");
  std::string hs;
  if (!(header >> hs)) throw InvalidSpec("grid dump header lacks spacing");
  double h = 0.0;
  if (std::from_chars(hs.data(), hs.data() + hs.size(), h).ec != std::errc{})
    throw InvalidSpec("bad grid spacing");
  Point lo{};
  for (int a = 0; a < d; ++a) lo[a] = -0.5 * h * (n[a] - 1);
  Grid g(d, n, lo, h);
  std::vector<double> v;
  v.reserve(g.size());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    double x = 0.0;
    if (std::from_chars(line.data(), line.data() + line.size(), x).ec != std::errc{})
      throw InvalidSpec("bad value in grid dump: " + line);
    v.push_back(x);
  }
  if (v.size() != g.size()) throw InvalidSpec("grid dump has the wrong number of values");
  return ScalarField(g, std::move(v));
}

}  // namespace cavlab
