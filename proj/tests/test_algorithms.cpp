#include <gtest/gtest.h>

#include "common/descent_suite.hpp"
#include "pfbt/analysis.hpp"
#include "pfbt/solvers.hpp"

using namespace pfbt;

namespace {

MeasureSpec column(double x, const std::vector<double>& ys) {
  std::vector<Atom> a;
  for (double y : ys) a.push_back({Vec2(x, y), 1.0 / static_cast<double>(ys.size())});
  return MeasureSpec::from_atoms(a);
}

RunConfig four_to_four(int n, double eps_end, int n_iter) {
  RunConfig c;
  c.n = n;
  c.eps_end = eps_end;
  c.eps_start = 2 * eps_end;
  c.n_iter = n_iter;
  c.cost = CostSpec::infinite({{1.0, 1.0}, {0.5, 1.2}, {0.2, 1.4}});
  c.mu_plus = column(0.1, {0.2, 0.4, 0.6, 0.8});
  c.mu_minus = column(0.9, {0.2, 0.4, 0.6, 0.8});
  return c;
}

}  // namespace

TEST(Spfs, FixedEpsDescentOnRandomConfigs) {
  const suite::DescentReport r = suite::run_descent_suite(10);
  EXPECT_EQ(r.monotonicity_violations, 0) << (r.failures.empty() ? "" : r.failures.front());
  EXPECT_EQ(r.residual_violations, 0);
}

TEST(Spfs, LogsOneRowPerIteration) {
  RunConfig c = suite::random_config(7);
  c.eps_start = 2 * c.eps_end;
  c.n_iter = 12;
  const Problem p = Problem::from_config(c);
  std::vector<IterationRow> streamed;
  const RunResult r = spfs(p, c, nullptr, [&](const IterationRow& row, Stage s) {
    EXPECT_EQ(s, Stage::kMain);
    streamed.push_back(row);
  });
  ASSERT_EQ(r.log.size(), 12u);
  ASSERT_EQ(streamed.size(), 12u);
  EXPECT_EQ(r.log.front().eps, c.eps_start);
  EXPECT_EQ(r.log.back().eps, c.eps_end);
  EXPECT_EQ(r.final_energy.total, r.log.back().energy.total);
  const EnergyBreakdown again = eval_energy(r.state, p.mesh, p.cost, p.F, p.rescaled);
  EXPECT_NEAR(again.total, r.final_energy.total, 1e-12 * std::abs(again.total));
}

TEST(Spfs, RejectsMultiphaseCost) {
  RunConfig c = four_to_four(32, 0.04, 4);
  const Problem p = Problem::from_config(c);
  EXPECT_THROW(spfs(p, c), std::invalid_argument);
}

TEST(Mpfs, IdenticalSegmentsReduceToSpfs) {
  RunConfig c = suite::random_config(21);
  c.eps_start = 1.5 * c.eps_end;
  c.n_iter = 6;
  c.rescaled = false;
  const Problem single = Problem::from_config(c);
  // Two copies of the same segment violate the strict ordering the
  // validator asks for, so the problem is put together by hand.
  Problem twin = single;
  twin.cost.segments.push_back(twin.cost.segments.front());
  RunConfig twin_cfg = c;
  twin_cfg.cost = twin.cost;
  const RunResult m = mpfs(twin, twin_cfg);
  const RunResult warm = spfs(single, c);
  const RunResult s = spfs(single, c, &warm.state);
  EXPECT_NEAR(m.final_energy.total, s.final_energy.total, 1e-9 * std::abs(s.final_energy.total));
  EXPECT_LT((m.state.sigma.data - s.state.sigma.data).norm(), 1e-8 * s.state.sigma.data.norm());
  for (int l : m.state.regions) EXPECT_EQ(l, 1);
}

TEST(Mpfs, LabelsGrowFromLeavesToTrunk) {
  const RunConfig c = four_to_four(64, 0.02, 100);
  const Problem p = Problem::from_config(c);
  const RunResult r = mpfs(p, c);
  EXPECT_EQ(r.warm_start_log.size(), 100u);
  const auto support = flux_support(r.state.sigma, p.mesh);
  int leaf_max = 0, trunk_min = 99, overall_max = 0;
  for (std::size_t t = 0; t < support.size(); ++t) {
    if (!support[t]) continue;
    const int l = r.state.regions[t];
    const double x = p.mesh.centroids[t].x();
    overall_max = std::max(overall_max, l);
    if (x < 0.14 || x > 0.86) leaf_max = std::max(leaf_max, l);
    if (x > 0.45 && x < 0.55) trunk_min = std::min(trunk_min, l);
  }
  EXPECT_EQ(trunk_min, overall_max);
  EXPECT_LT(leaf_max, trunk_min);
  for (const auto& row : r.log) EXPECT_EQ(row.diffuse_triangles, 0);
}

TEST(Mpfsd, HugeAlpha0MatchesMpfs) {
  const RunConfig c = four_to_four(48, 0.03, 40);
  RunConfig d = c;
  d.cost = CostSpec::finite(1e6, c.cost.segments);
  const RunResult a = mpfs(Problem::from_config(c), c);
  const RunResult b = mpfsd(Problem::from_config(d), d);
  EXPECT_NEAR(b.final_energy.total, a.final_energy.total, 0.01 * a.final_energy.total);
  for (const auto& row : b.log) EXPECT_EQ(row.diffuse_triangles, 0);
}

TEST(Mpfsd, DiffuseSinkKeepsConstraint) {
  RunConfig c;
  c.n = 48;
  c.eps_end = 0.03;
  c.eps_start = 0.05;
  c.n_iter = 30;
  c.cost = CostSpec::finite(3.0, {{1.0, 1.0}});
  c.mu_plus = MeasureSpec::from_atoms({{Vec2(0.5, 0.5), 1.0}});
  DensityPreset d;
  d.kind = DensityPreset::Kind::kUniformDiskComplement;
  d.r_inner = 0.3;
  d.margin = 0.05;
  c.mu_minus = MeasureSpec::from_density(d);
  const Problem p = Problem::from_config(c);
  const RunResult r = mpfsd(p, c);
  EXPECT_LE(r.final_energy.divergence_residual, 1e-6 * p.F.norm());
  EXPECT_GT(count_label(r.state.regions, 0), 0);
  for (const auto& row : r.log) EXPECT_TRUE(std::isfinite(row.energy.total));
}

TEST(RunSolver, PicksAlgorithmFromCost) {
  RunConfig c = suite::random_config(5);
  c.n_iter = 3;
  EXPECT_EQ(run_solver(Problem::from_config(c), c).algorithm, "spfs");
  RunConfig m = four_to_four(32, 0.04, 3);
  EXPECT_EQ(run_solver(Problem::from_config(m), m).algorithm, "mpfs");
  m.cost = CostSpec::finite(10.0, m.cost.segments);
  EXPECT_EQ(run_solver(Problem::from_config(m), m).algorithm, "mpfsd");
}

TEST(RunConfig, ValidationMessages) {
  RunConfig c = suite::random_config(1);
  c.n = 16;
  c.eps_end = c.eps_start = 0.03;
  try {
    c.validate();
    FAIL() << "expected a ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("mesh does not resolve eps_end"), std::string::npos);
  }
  RunConfig d = suite::random_config(1);
  d.eps_start = 0.5 * d.eps_end;
  EXPECT_THROW(d.validate(), ConfigError);
  DensityPreset ring;
  ring.r_inner = 0.1;
  ring.r_outer = 0.2;
  RunConfig e = suite::random_config(1);
  e.mu_minus = MeasureSpec::from_density(ring);
  EXPECT_THROW(e.validate(), ConfigError);
}
