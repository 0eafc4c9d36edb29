#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "caldesing/fractal.hpp"
#include "caldesing/whitney.hpp"

using namespace caldesing;

namespace {

// g(u) = exp(h(u)), h(u) = -1 / (1 - u^2), differentiated by hand.
struct Bump1D {
  static double g(double u) { return std::exp(-1.0 / (1.0 - u * u)); }
  static double h1(double u) {
    const double q = 1.0 - u * u;
    return -2.0 * u / (q * q);
  }
  static double h2(double u) {
    const double q = 1.0 - u * u;
    return -2.0 / (q * q) - 8.0 * u * u / (q * q * q);
  }
  static double h3(double u) {
    const double q = 1.0 - u * u;
    return -24.0 * u / (q * q * q) - 48.0 * u * u * u / (q * q * q * q);
  }
  static double d(double u, int k) {
    switch (k) {
      case 0: return g(u);
      case 1: return h1(u) * g(u);
      case 2: return (h2(u) + h1(u) * h1(u)) * g(u);
      default: return (h3(u) + 3.0 * h1(u) * h2(u) + std::pow(h1(u), 3)) * g(u);
    }
  }
};

double bump(const double* u, int j, const MultiIndex& alpha) {
  double s = 0.0;
  for (int a = 0; a < j; ++a) s += u[a] * u[a];
  std::array<double, detail::kMaxBumpOrder + 1> psi{};
  detail::radial_derivatives(s, order_of(alpha), psi.data());
  return detail::bump_partial(u, j, alpha, psi.data());
}

DyadicCellSet sample_set() {
  CantorSpec spec;
  spec.ratio = 0.25;
  spec.depth = 3;
  spec.offset = 1.5;
  return cantor_generate(spec, 4.0);
}

}  // namespace

TEST(Whitney, MultiIndicesAreGradedCompositions) {
  const auto a = multi_indices(2, 2);
  ASSERT_EQ(a.size(), 6u);
  EXPECT_EQ(a[0], (MultiIndex{0, 0, 0, 0}));
  EXPECT_EQ(a[1], (MultiIndex{1, 0, 0, 0}));
  EXPECT_EQ(a[2], (MultiIndex{0, 1, 0, 0}));
  EXPECT_EQ(a[3], (MultiIndex{2, 0, 0, 0}));
  EXPECT_EQ(multi_indices(3, 3).size(), 20u);  // C(6, 3)
}

TEST(Whitney, OneDimensionalBumpDerivativesMatchClosedForms) {
  for (double u : {-0.9, -0.6, -0.2, 0.0, 0.1, 0.45, 0.8, 0.95}) {
    for (int k = 0; k <= 3; ++k) {
      MultiIndex alpha{k, 0, 0, 0};
      const double exact = Bump1D::d(u, k);
      EXPECT_NEAR(bump(&u, 1, alpha), exact, 1e-12 * std::max(1.0, std::abs(exact))) << "u=" << u << " k=" << k;
    }
  }
  const double outside = 1.0;
  EXPECT_EQ(bump(&outside, 1, MultiIndex{2, 0, 0, 0}), 0.0);
}

TEST(Whitney, MixedPartialsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-0.55, 0.55);
  for (int t = 0; t < 10; ++t) {
    std::array<double, 3> u{unif(rng), unif(rng), unif(rng)};
    for (const auto& alpha : multi_indices(3, 2)) {
      if (order_of(alpha) != 2) continue;
      // d_a of the analytic first derivative along b.
      int a = 0, b = 0;
      {
        std::vector<int> axes;
        for (int i = 0; i < 3; ++i)
          for (int r = 0; r < alpha[i]; ++r) axes.push_back(i);
        a = axes[0];
        b = axes[1];
      }
      MultiIndex first{};
      first[b] = 1;
      const double h = 1e-5;
      auto up = u, dn = u;
      up[a] += h;
      dn[a] -= h;
      const double fd = (bump(up.data(), 3, first) - bump(dn.data(), 3, first)) / (2 * h);
      EXPECT_NEAR(bump(u.data(), 3, alpha), fd, 1e-7);
    }
  }
}

TEST(Whitney, DerivativeBoundsDominateSampledDerivatives) {
  for (int j = 1; j <= 2; ++j) {
    const auto bounds = detail::bump_derivative_bounds(j, 3);
    std::mt19937_64 rng(j);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int t = 0; t < 5000; ++t) {
      std::array<double, 2> u{unif(rng), unif(rng)};
      for (const auto& alpha : multi_indices(j, 3))
        EXPECT_LE(std::abs(bump(u.data(), j, alpha)), bounds[order_of(alpha)]);
    }
    EXPECT_NEAR(bounds[0], 1.05 * std::exp(-1.0), 1e-6);
  }
}

TEST(Whitney, CoverCubesSatisfyTheDistanceRatios) {
  const auto k = sample_set();
  const auto cover = whitney_cover(k);
  ASSERT_FALSE(cover.cubes.empty());
  for (const auto& q : cover.cubes) {
    EXPECT_GE(q.distance, cover.lower_ratio * q.side);
    if (q.generation > cover.first_generation) {
      EXPECT_LT(q.distance, cover.upper_ratio * q.side);
    }
  }
}

TEST(Whitney, CoverCubesHaveDisjointInteriors) {
  const auto cover = whitney_cover(sample_set());
  std::set<std::pair<int, int>> cubes;
  for (const auto& q : cover.cubes) cubes.insert({q.generation, q.index[0]});
  for (const auto& q : cover.cubes)
    for (int g = cover.first_generation; g < q.generation; ++g)
      EXPECT_FALSE(cubes.count({g, q.index[0] >> (q.generation - g)})) << "nested cube at generation " << q.generation;
}

TEST(Whitney, SupportOverlapStaysBelowTheBound) {
  const auto cover = whitney_cover(sample_set());
  const int n = 1 << 14;
  int worst = 0;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) * cover.torus_side / n;
    int count = 0;
    for (const auto& q : cover.cubes) {
      double d = x - q.center[0];
      d -= cover.torus_side * std::round(d / cover.torus_side);
      if (std::abs(d) < cover.support_ratio * q.side) ++count;
    }
    worst = std::max(worst, count);
  }
  EXPECT_GT(worst, 0);
  EXPECT_LE(worst, cover.overlap_bound);
}

TEST(Whitney, ZeroSetIsExactlyTheSet) {
  const auto k = sample_set();
  const auto f = build_vanishing_function(k, 1e-3, 3);
  EXPECT_EQ(zero_set(f, k.depth()), k);
  const double h = k.cell_side();
  for (long long i = 0; i < k.cells_per_axis(); ++i) {
    if (nearest_cell_distance(k, {static_cast<int>(i), 0, 0, 0}, 2) < 2) continue;
    const double x = (i + 0.5) * h;
    EXPECT_GT(f.value(std::vector<double>{x}), 0.0) << "cell " << i;
  }
}

TEST(Whitney, FunctionIsNonNegativeAndSmall) {
  const auto k = sample_set();
  const double eps = 1e-3;
  const auto f = build_vanishing_function(k, eps, 3);
  const double norm = ck_norm(f, 3, 12);
  EXPECT_GT(norm, 0.0);
  EXPECT_LE(norm, eps);
  for (int i = 0; i < 4096; ++i) EXPECT_GE(f.value(std::vector<double>{i * 4.0 / 4096}), 0.0);
}

TEST(Whitney, EvaluationIsLinearInTheCoefficients) {
  const auto k = sample_set();
  const auto f = build_vanishing_function(k, 1.0, 2);
  std::vector<double> c(f.coefficients().size());
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (double& v : c) v = unif(rng) * 1e-3;
  const auto g = f.with_coefficients(c);
  std::vector<double> sum = f.coefficients();
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += c[i];
  const auto fg = f.with_coefficients(sum);
  for (double x : {0.3, 1.2, 2.71, 3.9}) {
    const std::vector<double> p{x};
    EXPECT_NEAR(fg.value(p), f.value(p) + g.value(p), 1e-15);
    EXPECT_NEAR(f.scaled(3.0).derivative(p, MultiIndex{2, 0, 0, 0}), 3.0 * f.derivative(p, MultiIndex{2, 0, 0, 0}),
                1e-12);
  }
  EXPECT_THROW(f.with_coefficients({1.0}), std::invalid_argument);
}

TEST(Whitney, JetMatchesSingleDerivatives) {
  const auto f = build_vanishing_function(sample_set(), 1.0, 3);
  const std::vector<double> p{0.7};
  const auto jet = f.jet(p, 3);
  const auto alphas = multi_indices(1, 3);
  for (std::size_t i = 0; i < alphas.size(); ++i) EXPECT_DOUBLE_EQ(jet[i], f.derivative(p, alphas[i]));
}

TEST(Whitney, DerivativesAgreeWithFiniteDifferences) {
  CantorSpec spec;
  spec.ratio = 0.25;
  spec.depth = 2;
  spec.offset = 1.5;
  const auto k = product_with_point(cantor_generate(spec, 4.0), 1);
  const auto f = build_vanishing_function(k, 1.0, 3);
  const double h = 1e-5;
  for (const auto& p : std::vector<std::array<double, 2>>{{0.4, 1.1}, {2.9, 3.3}, {1.45, 0.2}}) {
    for (int a = 0; a < 2; ++a) {
      auto up = p, dn = p;
      up[a] += h;
      dn[a] -= h;
      MultiIndex e{};
      e[a] = 1;
      const double fd = (f.value(up) - f.value(dn)) / (2 * h);
      EXPECT_NEAR(f.derivative(p, e), fd, 1e-8);
    }
  }
}

TEST(Whitney, EmptySetGivesAPositiveFunction) {
  const DyadicCellSet none(1, 1.0, 4);
  const auto f = build_vanishing_function(none, 1e-2, 3);
  EXPECT_FALSE(f.identically_zero());
  EXPECT_TRUE(zero_set(f, 4).empty());
  for (int i = 0; i < 256; ++i) EXPECT_GT(f.value(std::vector<double>{i / 256.0}), 0.0);
  EXPECT_LE(ck_norm(f, 3, 10), 1e-2);
}

TEST(Whitney, FullSetGivesTheZeroFunction) {
  const auto f = build_vanishing_function(DyadicCellSet::full(2, 1.0, 3), 1.0, 3);
  EXPECT_TRUE(f.identically_zero());
  EXPECT_EQ(f.value(std::vector<double>{0.3, 0.6}), 0.0);
  EXPECT_EQ(ck_norm(f, 3, 6), 0.0);
}

TEST(Whitney, OrderAndShapeAreChecked) {
  const auto f = build_vanishing_function(sample_set(), 1.0, 2);
  EXPECT_THROW(f.derivative(std::vector<double>{0.5}, MultiIndex{3, 0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(f.jet(std::vector<double>{0.5}, 3), std::invalid_argument);
  EXPECT_THROW(f.value(std::vector<double>{0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(f.derivative(std::vector<double>{0.5}, MultiIndex{0, 1, 0, 0}), std::invalid_argument);
  EXPECT_THROW(build_vanishing_function(sample_set(), 0.0, 2), std::invalid_argument);
}

TEST(Whitney, SingleBumpPeaksAtItsCenter) {
  const auto f = build_vanishing_function(sample_set(), 1.0, 3);
  std::vector<double> c(f.coefficients().size(), 0.0);
  const std::size_t pick = c.size() / 2;
  c[pick] = 2.0;
  const auto g = f.with_coefficients(c);
  const auto& q = f.cover().cubes[pick];
  const std::vector<double> p{q.center[0]};
  EXPECT_NEAR(g.value(p), 2.0 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(g.derivative(p, MultiIndex{1, 0, 0, 0}), 0.0, 1e-15);
  EXPECT_LT(g.derivative(p, MultiIndex{2, 0, 0, 0}), 0.0);
}
