#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cavlab/grid.hpp"
#include "naive_oracles.hpp"

using namespace cavlab;

namespace {

// Direct summation from tests/oracles/grid_oracle.py.
constexpr double kPoincareBumpN65 = 0.16970342733820892;

ScalarField random_field(const Grid& g, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  ScalarField f(g);
  for (auto& v : f.values()) v = u(rng);
  return f;
}

FaceWeightField random_weights(const Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  FaceWeightField w(g, 0.5, 3.0);
  for (int a = 0; a < g.dim(); ++a)
    for (std::size_t i = 0; i < g.size(); ++i) w.at(a, i) = u(rng);
  return w;
}

}  // namespace

TEST(GridLayout, RowMajorFirstAxisSlowest) {
  const Grid g = Grid::cube(2, 5);
  EXPECT_EQ(g.size(), 25u);
  EXPECT_EQ(g.index({1, 2, 0}), 7u);
  EXPECT_DOUBLE_EQ(g.h(), 0.5);
  EXPECT_EQ(g.multi_index(7), (Index{1, 2, 0}));
  EXPECT_THROW(Grid::cube(2, 2), InvalidSpec);
}

TEST(GridLayout, BallIncludesTies) {
  const Grid g = Grid::cube(2, 5);
  EXPECT_EQ(g.ball_nodes({0, 0, 0}, 0.5).size(), 5u);
  EXPECT_EQ(g.ball_nodes({0, 0, 0}, 0.49).size(), 1u);
}

TEST(SampleFaceWeights, ConstantIsOne) {
  const Grid g = Grid::cube(2, 9);
  const auto w = sample_face_weights(WeightSpec::constant(2, 1.0), g);
  w.for_each_face([](int, std::size_t, std::size_t, double v) { EXPECT_EQ(v, 1.0); });
}

TEST(SampleFaceWeights, SingularFaceClampedToCap) {
  const Grid g = Grid::cube(2, 5);
  const auto s = WeightSpec::power_subspace(2, 1, -0.5);
  const auto w = sample_face_weights(s, g);
  // Axis-1 faces of nodes with x_1 = 0 are centered on the singular line.
  const std::size_t node = g.index({2, 1, 0});
  EXPECT_TRUE(std::isfinite(w(1, node)));
  EXPECT_EQ(w(1, node), w.cap());
  EXPECT_EQ(w.cap(), s.singular_cap(g.h()));
  w.for_each_face([&](int, std::size_t, std::size_t, double v) {
    EXPECT_GE(v, w.tau0());
    EXPECT_LE(v, w.cap());
  });
}

TEST(SampleFaceWeights, OffSingularFaceDirectFormula) {
  const Grid g = Grid::cube(2, 5);
  const auto w = sample_face_weights(WeightSpec::power_subspace(2, 1, -0.5), g);
  // Axis-1 face from (0.5, -1) to (0.5, -0.5) has center x_1 = 0.5.
  EXPECT_NEAR(w(1, g.index({3, 0, 0})), 1.41421356237310, 1e-13);
}

TEST(Energy, ZeroField) {
  const Grid g = Grid::cube(2, 9);
  const auto e = energy(ScalarField(g), sample_face_weights(WeightSpec::constant(2, 1.0), g), 1.0);
  EXPECT_EQ(e.total, 0.0);
}

TEST(Energy, UnitFieldCountsNodes) {
  const Grid g = Grid::cube(2, 11, 0.0, 1.0);
  const auto e = energy(ScalarField(g, 1.0), sample_face_weights(WeightSpec::constant(2, 1.0), g), 1.0);
  EXPECT_EQ(e.dirichlet, 0.0);
  EXPECT_DOUBLE_EQ(e.volume, g.h() * g.h() * 121.0);
  EXPECT_EQ(e.total, e.dirichlet + e.volume);
}

TEST(Energy, MatchesNaiveSummationOracle) {
  for (int d = 1; d <= 3; ++d) {
    for (int n : {4, 8}) {
      const Grid g = Grid::cube(d, n);
      const auto u = random_field(g, 17 + n + d, -0.3, 1.0);
      const auto w = random_weights(g, 29 + n);
      const auto e = energy(u, w, 0.7);
      const double dir = oracle::dirichlet(u, w);
      EXPECT_NEAR(e.dirichlet, dir, 1e-12 * dir);
      EXPECT_NEAR(e.volume, oracle::volume(u, 0.7), 1e-12 * e.volume);
      EXPECT_EQ(e.total, e.dirichlet + e.volume);
    }
  }
}

TEST(Energy, SlopeInEpsilonIsPositiveVolume) {
  const Grid g = Grid::cube(2, 8);
  const auto u = random_field(g, 3, -0.5, 1.0);
  const auto w = random_weights(g, 4);
  std::size_t pos = 0;
  for (double v : u.values()) pos += v > 0.0;
  const double e1 = energy(u, w, 1.0).total, e2 = energy(u, w, 2.5).total;
  EXPECT_GT(e2, e1);
  EXPECT_NEAR((e2 - e1) / 1.5, g.h() * g.h() * pos, 1e-12);
}

TEST(FluxDivergence, AffineIsHarmonic) {
  const Grid g = Grid::cube(2, 9);
  const auto u = ScalarField::from_function(g, [](const Point& x) { return 2.0 * x[0] - 0.5 * x[1] + 1.0; });
  const auto div = discrete_flux_divergence(u, sample_face_weights(WeightSpec::constant(2, 1.0), g));
  for (double v : div.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(FluxDivergence, QuadraticGivesTwo) {
  const Grid g = Grid::cube(2, 9);
  const auto u = ScalarField::from_function(g, [](const Point& x) { return x[0] * x[0]; });
  const auto div = discrete_flux_divergence(u, sample_face_weights(WeightSpec::constant(2, 1.0), g));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(div[i], g.on_boundary(i) ? 0.0 : 2.0, 1e-12);
}

TEST(FluxDivergence, MatchesNaiveStencilOracle) {
  for (int d = 1; d <= 3; ++d) {
    const Grid g = Grid::cube(d, 8);
    const auto u = random_field(g, 41 + d);
    const auto w = random_weights(g, 43 + d);
    const auto div = discrete_flux_divergence(u, w);
    const auto ref = oracle::divergence(u, w);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.on_boundary(i)) {
        EXPECT_EQ(div[i], 0.0);
        continue;
      }
      EXPECT_NEAR(div[i], ref[i], 1e-12 * std::max(1.0, std::abs(ref[i])));
    }
  }
}

TEST(FluxDivergence, IsNegativeHalfGradientOfDirichlet) {
  const Grid g = Grid::cube(2, 7);
  const auto u = random_field(g, 5);
  auto phi = random_field(g, 6);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.on_boundary(i)) phi[i] = 0.0;
  const auto w = random_weights(g, 7);
  const auto div = discrete_flux_divergence(u, w);
  double pairing = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) pairing += phi[i] * div[i];
  pairing *= g.h() * g.h();
  // The Dirichlet part is quadratic, so the central difference is exact up to rounding.
  const double t = 1e-3;
  ScalarField up(g), dn(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    up[i] = u[i] + t * phi[i];
    dn[i] = u[i] - t * phi[i];
  }
  const double deriv = (energy(up, w, 0.0).dirichlet - energy(dn, w, 0.0).dirichlet) / (2.0 * t);
  EXPECT_NEAR(deriv, -2.0 * pairing, 1e-8 * std::abs(deriv));
}

TEST(PoincareRatio, BumpMatchesDirectOracle) {
  const Grid g = Grid::cube(2, 65);
  const auto f = ScalarField::from_function(g, [](const Point& x) { return std::max(1.0 - norm(x, 2) / 0.5, 0.0); });
  const double ratio = poincare_ratio(f, sample_face_weights(WeightSpec::constant(2, 1.0), g), 0.5);
  EXPECT_NEAR(ratio, kPoincareBumpN65, 1e-12 * kPoincareBumpN65);
}

TEST(PoincareRatio, BoundaryRingIsFinitePositive) {
  const Grid g = Grid::cube(2, 33);
  const double R = 0.5;
  auto f = ScalarField(g);
  for (auto i : g.ball_nodes({}, R))
    if (norm(g.position(i), 2) > R - 2.0 * g.h() && norm(g.position(i), 2) < R - 1e-12) f[i] = 1.0;
  const double ratio = poincare_ratio(f, sample_face_weights(WeightSpec::constant(2, 1.0), g), R);
  EXPECT_TRUE(std::isfinite(ratio));
  EXPECT_GT(ratio, 0.0);
}

TEST(PoincareRatio, ScalesWithRadius) {
  // Same bump at R and R/2 with the grid refined in proportion: homogeneous
  // weights scale out exactly.
  for (const auto& s : {WeightSpec::constant(2, 1.0), WeightSpec::power_subspace(2, 1, -0.5)}) {
    double ratios[2];
    for (int k = 0; k < 2; ++k) {
      const double R = 0.5 / (1 << k);
      const Grid g = Grid::cube(2, 65, -2.0 * R, 2.0 * R);
      const auto f = ScalarField::from_function(g, [R](const Point& x) { return std::max(1.0 - norm(x, 2) / R, 0.0); });
      ratios[k] = poincare_ratio(f, sample_face_weights(s, g), R);
    }
    EXPECT_NEAR(ratios[1], ratios[0], 1e-12 * ratios[0]);
  }
}

TEST(PoincareRatio, Preconditions) {
  const Grid g = Grid::cube(2, 17);
  const auto w = sample_face_weights(WeightSpec::constant(2, 1.0), g);
  EXPECT_THROW(poincare_ratio(ScalarField(g), w, 0.5), PreconditionError);
  EXPECT_THROW(poincare_ratio(ScalarField(g, 1.0), w, 0.5), PreconditionError);
}

TEST(GridDump, RoundTripsBitExactly) {
  for (int d = 1; d <= 3; ++d) {
    const Grid g = Grid::cube(d, d == 3 ? 5 : 9);
    auto u = random_field(g, 100 + d);
    u[0] = 1.0 / 3.0;
    u[1] = 5e-324;
    u[2] = -0.0;
    std::stringstream ss;
    write_dump(ss, u);
    const auto back = read_dump(ss);
    ASSERT_EQ(back.size(), u.size());
    EXPECT_EQ(back.grid(), g);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double a = back[i], b = u[i];
      EXPECT_EQ(std::memcmp(&a, &b, sizeof(double)), 0);
    }
  }
}

TEST(GridDump, HeaderFormat) {
  const Grid g = Grid::cube(2, 3);
  std::stringstream ss;
  write_dump(ss, ScalarField(g, 0.5));
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "2 3 3 1");
}

TEST(GridDump, MalformedInputRejected) {
  std::stringstream a("2 3 3\n");
  EXPECT_THROW(read_dump(a), InvalidSpec);
  std::stringstream b("2 3 3 1\n0\n0\n");
  EXPECT_THROW(read_dump(b), InvalidSpec);
  std::stringstream c("");
  EXPECT_THROW(read_dump(c), InvalidSpec);
}

TEST(BoundaryData, RejectsNegativeValues) {
  const Grid g = Grid::cube(2, 5);
  EXPECT_THROW(BoundaryData::constant(g, -0.1), PreconditionError);
  const auto f = BoundaryData::from_function(g, [](const Point& x) { return std::max(x[0], 0.0); });
  EXPECT_EQ(f.sup_norm(), 1.0);
}
