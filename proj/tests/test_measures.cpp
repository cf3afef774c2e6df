#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "pfbt/measures.hpp"

using namespace pfbt;

namespace {

MeasureSpec atom(double x, double y) { return MeasureSpec::from_atoms({{Vec2(x, y), 1.0}}); }

// Centroid of the lower triangle in cell (i, j).
Vec2 lower_centroid(const TriMesh& m, int i, int j) {
  return {(i + 2.0 / 3.0) * m.h, (j + 1.0 / 3.0) * m.h};
}

}  // namespace

TEST(Mollifier, VanishesOnTheSupportBoundary) {
  const Mollifier rho(0.05);
  EXPECT_EQ(rho(Vec2(0.05, 0.0)), 0.0);
  EXPECT_EQ(rho(Vec2(0.0, -0.06)), 0.0);
  EXPECT_GT(rho(Vec2(0.049, 0.0)), 0.0);
}

TEST(Mollifier, RadiallySymmetric) {
  const Mollifier rho(0.1);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.08, 0.08);
  for (int k = 0; k < 100; ++k) {
    const Vec2 x(u(rng), u(rng));
    EXPECT_EQ(rho(x), rho(-x));
  }
}

TEST(Mollifier, UnitMassByPolarQuadrature) {
  // Midpoint rule in r and theta; the integrand is flat to all orders at the
  // rim, so the rule is accurate far below the tolerance.
  const double eps = 0.2;
  const Mollifier rho(eps);
  const int nr = 40000, nt = 64;
  double s = 0.0;
  for (int i = 0; i < nr; ++i) {
    const double r = (i + 0.5) * eps / nr;
    for (int k = 0; k < nt; ++k) {
      const double th = (k + 0.5) * 2 * std::numbers::pi / nt;
      s += rho(Vec2(r * std::cos(th), r * std::sin(th))) * r;
    }
  }
  s *= (eps / nr) * (2 * std::numbers::pi / nt);
  EXPECT_NEAR(s, 1.0, 1e-8);
}

TEST(Mollifier, UnitMassByCartesianGrid) {
  const double eps = 1.0;
  const Mollifier rho(eps);
  const int n = 1200;
  const double h = 2.0 * eps / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += rho(Vec2(-eps + (i + 0.5) * h, -eps + (j + 0.5) * h));
  EXPECT_NEAR(s * h * h, 1.0, 1e-8);
}

TEST(MeasureSpec, AtomMassesMustSumToOne) {
  EXPECT_THROW(MeasureSpec::from_atoms({{Vec2(0.5, 0.5), 0.7}}), std::invalid_argument);
  EXPECT_THROW(MeasureSpec::from_atoms({}), std::invalid_argument);
  EXPECT_THROW(MeasureSpec::from_atoms({{Vec2(0.5, 0.5), 1.5}, {Vec2(0.2, 0.5), -0.5}}),
               std::invalid_argument);
  EXPECT_NO_THROW(MeasureSpec::from_atoms({{Vec2(0.5, 0.5), 0.5}, {Vec2(0.2, 0.5), 0.5}}));
}

TEST(SmoothSource, EqualMeasuresCancel) {
  const TriMesh m = build_mesh(32);
  const P0ScalarField f = smooth_source(atom(0.4, 0.6), atom(0.4, 0.6), 0.1, m);
  EXPECT_EQ(f.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(SmoothSource, PeakBeforeRebalancing) {
  const TriMesh m = build_mesh(64);
  const double eps = 0.05;
  const Vec2 a = lower_centroid(m, 20, 30);
  const P0ScalarField f = smooth_source(MeasureSpec::from_atoms({{a, 1.0}}), atom(0.75, 0.5), eps,
                                        m, false);
  const double expected = bump_normalization() * std::exp(-1.0) / (eps * eps);
  EXPECT_NEAR(f.values.maxCoeff(), expected, 1e-12 * expected);
}

TEST(SmoothSource, DiscreteIntegralVanishes) {
  const TriMesh m = build_mesh(48);
  const MeasureSpec plus = MeasureSpec::from_atoms({{Vec2(0.2, 0.3), 0.6}, {Vec2(0.3, 0.7), 0.4}});
  const MeasureSpec minus =
      MeasureSpec::from_atoms({{Vec2(0.8, 0.2), 0.25}, {Vec2(0.75, 0.5), 0.25}, {Vec2(0.8, 0.8), 0.5}});
  for (double eps : {0.03, 0.05, 0.1}) {
    const P0ScalarField f = smooth_source(plus, minus, eps, m);
    EXPECT_NEAR(discrete_integral(f, m), 0.0, 1e-14);
  }
  DensityPreset d;
  d.kind = DensityPreset::Kind::kUniformDiskComplement;
  d.r_inner = 0.3;
  d.margin = 0.05;
  const P0ScalarField g = smooth_source(atom(0.5, 0.5), MeasureSpec::from_density(d), 0.05, m);
  EXPECT_NEAR(discrete_integral(g, m), 0.0, 1e-14);
}

TEST(SmoothSource, PerAtomMassIsExact) {
  const TriMesh m = build_mesh(40);
  const MeasureSpec plus = MeasureSpec::from_atoms({{Vec2(0.2, 0.3), 0.3}, {Vec2(0.3, 0.8), 0.7}});
  const P0ScalarField f = smooth_source(plus, atom(0.8, 0.5), 0.05, m);
  double lower = 0.0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t)
    if (m.centroids[t].y() < 0.55 && m.centroids[t].x() < 0.5)
      lower += m.areas[t] * f[static_cast<Eigen::Index>(t)];
  EXPECT_NEAR(lower, 0.3, 1e-14);
}

TEST(SmoothSource, AtomTooCloseToBoundary) {
  const TriMesh m = build_mesh(32);
  EXPECT_THROW(smooth_source(atom(0.02, 0.5), atom(0.5, 0.5), 0.05, m), std::invalid_argument);
}

TEST(SmoothSource, AnnulusDensityIsUniformOnSupport) {
  const TriMesh m = build_mesh(64);
  DensityPreset d;
  d.kind = DensityPreset::Kind::kUniformAnnulus;
  d.r_inner = 0.2;
  d.r_outer = 0.35;
  const P0ScalarField f = smooth_source(atom(0.5, 0.5), MeasureSpec::from_density(d), 0.05, m);
  double v = 0.0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const double r = (m.centroids[t] - Vec2(0.5, 0.5)).norm();
    if (r > 0.21 && r < 0.34) {
      const double ft = f[static_cast<Eigen::Index>(t)];
      if (v == 0.0) v = ft;
      EXPECT_DOUBLE_EQ(ft, v);
    }
  }
  EXPECT_NEAR(-v, 1.0 / d.support_area(), 0.02 / d.support_area());
}

TEST(LoadVector, ZeroSource) {
  const TriMesh m = build_mesh(4);
  EXPECT_EQ(assemble_F(P0ScalarField::constant(m, 0.0), m).cwiseAbs().maxCoeff(), 0.0);
}

TEST(LoadVector, SumsToDiscreteIntegral) {
  const TriMesh m = build_mesh(32);
  const P0ScalarField f = smooth_source(atom(0.3, 0.3), atom(0.6, 0.7), 0.08, m);
  EXPECT_NEAR(assemble_F(f, m).sum(), 0.0, 1e-14);
}

TEST(LoadVector, SingleTriangleHandQuadrature) {
  const TriMesh m = build_mesh(2);
  const std::size_t t = 5;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(8);
  v[static_cast<Eigen::Index>(t)] = 1.0;
  const Eigen::VectorXd F = assemble_F(P0ScalarField(v), m);
  for (Eigen::Index i = 0; i < F.size(); ++i) {
    const bool in_t = std::find(m.triangles[t].begin(), m.triangles[t].end(), i) != m.triangles[t].end();
    EXPECT_NEAR(F[i], in_t ? 0.125 / 3.0 : 0.0, 1e-16);
  }
}
