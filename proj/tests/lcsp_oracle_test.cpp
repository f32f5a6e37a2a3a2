#include <cmath>

#include <gtest/gtest.h>

#include "test_oracles.hpp"
#include "uctc/canonical_scaling.hpp"
#include "uctc/completion.hpp"
#include "uctc/lcsp_oracle.hpp"
#include "uctc/random_instances.hpp"

using namespace uctc;

namespace {

SparseTensor three_known() { return SparseTensor({2, 2}, {{{1, 1}, 1.0}, {{1, 2}, 2.0}, {{2, 1}, 3.0}}); }

SparseTensor dense(const Extents& ext, double value = 1.0) {
  std::vector<SparseTensor::Entry> e;
  for (const auto& idx : oracle::enumerate_box(ext)) e.emplace_back(idx, value);
  return {ext, e};
}

ScalingOptions tight() {
  ScalingOptions o;
  o.epsilon = 1e-20;
  return o;
}

}  // namespace

TEST(BuildConstraints, TwoByTwoThreeKnown) {
  const auto sys = build_constraints(three_known(), 1);
  // Columns in linear order: (1,1), (2,1), (1,2).
  Eigen::MatrixXd expected(4, 3);
  expected << 1, 0, 1,  // row 1
      0, 1, 0,          // row 2
      1, 1, 0,          // col 1
      0, 0, 1;          // col 2
  EXPECT_EQ(sys.matrix, expected);
  EXPECT_NEAR(sys.log_values[1], std::log(3.0), 1e-15);
  EXPECT_NEAR(sys.log_values[2], std::log(2.0), 1e-15);
}

TEST(BuildConstraints, ColumnSumsAndRowSupports) {
  const auto d2 = build_constraints(dense({2, 2}), 1);
  for (Eigen::Index c = 0; c < d2.matrix.cols(); ++c) EXPECT_EQ(d2.matrix.col(c).sum(), 2.0);
  const auto d3 = build_constraints(dense({2, 2, 2}), 2);
  EXPECT_EQ(d3.matrix.rows(), 6);
  EXPECT_EQ(d3.matrix.cols(), 8);
  for (Eigen::Index c = 0; c < d3.matrix.cols(); ++c) EXPECT_EQ(d3.matrix.col(c).sum(), 3.0);

  Rng rng(31);
  const auto t = random_tensor(rng, {4, 3, 5}, 0.4);
  for (int k = 1; k <= 2; ++k) {
    const auto sys = build_constraints(t, k);
    const auto naive = oracle::incidence(t, k);
    EXPECT_EQ(sys.matrix.rows(), naive.C.rows());
    for (Eigen::Index r = 0; r < sys.matrix.rows(); ++r) {
      const auto& id = sys.layout->id(sys.row_subtensors[static_cast<std::size_t>(r)]);
      std::vector<IndexVector> support;
      for (Eigen::Index c = 0; c < sys.matrix.cols(); ++c) {
        if (sys.matrix(r, c) == 1.0) support.push_back(t.index(static_cast<std::size_t>(c)));
      }
      EXPECT_EQ(support, members(t, id));
    }
  }
}

TEST(SolveLcsp, AllOnesIsZero) {
  const auto sol = solve_lcsp(dense({3, 2}), 1);
  EXPECT_LT(sol.canonical_logs.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT(sol.row_coeffs.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SolveLcsp, ThreeKnownProjectsToZero) {
  const auto sol = solve_lcsp(three_known(), 1);
  EXPECT_LT(sol.canonical_logs.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(sol.constraint_residual, 1e-12);
}

TEST(SolveLcsp, MatchesIndependentProjection) {
  Rng rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = random_tensor(rng, {4, 5, 3}, 0.5);
    for (int k = 1; k <= 2; ++k) {
      const auto sol = solve_lcsp(t, k);
      const auto inc = oracle::incidence(t, k);
      const auto p = oracle::project(inc.C, inc.a);
      EXPECT_LT((sol.canonical_logs - p.x).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_LT(sol.constraint_residual, 1e-10);
    }
  }
}

TEST(SolveLcsp, MatchesCsaOnFullSupport) {
  Rng rng(33);
  InstanceShape shape;
  shape.min_extent = 5;
  shape.max_extent = 5;
  shape.min_density = 0.5;
  shape.max_density = 0.5;
  for (int trial = 0; trial < 5; ++trial) {
    const auto t = random_full_support_tensor(rng, shape);
    const auto sol = solve_lcsp(t, 1);
    const auto r = csa(t, 1, tight());
    for (std::size_t e = 0; e < t.nnz(); ++e) {
      EXPECT_NEAR(std::log(r.canonical.value(e)), sol.canonical_logs[static_cast<Eigen::Index>(e)], 1e-8);
    }
  }
}

TEST(SolveLcsp, IdempotentOnCanonicalTensor) {
  Rng rng(34);
  const auto t = random_tensor(rng, {5, 6}, 0.6);
  const auto canonical = csa(t, 1, tight()).canonical;
  const auto sol = solve_lcsp(canonical, 1);
  for (std::size_t e = 0; e < t.nnz(); ++e) {
    EXPECT_NEAR(sol.canonical_logs[static_cast<Eigen::Index>(e)], std::log(canonical.value(e)), 1e-10);
    EXPECT_NEAR(sol.scaling.membership_sum(canonical.coords(e)), 0.0, 1e-10);
  }
}

TEST(SolveLcsp, CapExceeded) {
  OracleLimits limits;
  limits.max_entries = 2;
  EXPECT_THROW(solve_lcsp(three_known(), 1, limits), CapacityError);
  EXPECT_THROW(oracle_complete(three_known(), 1, {2, 2}, limits), CapacityError);
}

TEST(OracleComplete, Examples) {
  const auto two = oracle_complete(three_known(), 1, {2, 2});
  EXPECT_NEAR(two.value, 6.0, 6e-9);
  EXPECT_TRUE(two.gauge_invariant);

  std::vector<SparseTensor::Entry> e;
  const double x[] = {1, 2}, y[] = {1, 3}, z[] = {1, 5};
  for (const auto& idx : oracle::enumerate_box({2, 2, 2})) {
    if (idx != IndexVector{2, 2, 2}) e.emplace_back(idx, x[idx[0] - 1] * y[idx[1] - 1] * z[idx[2] - 1]);
  }
  const auto cube = oracle_complete(SparseTensor({2, 2, 2}, e), 2, {2, 2, 2});
  EXPECT_NEAR(cube.value, 30.0, 30e-9);

  const SparseTensor sparse({2, 2}, {{{1, 1}, 1.0}, {{1, 2}, 2.0}});
  const auto gauge = oracle_complete(sparse, 1, {2, 1});
  EXPECT_FALSE(gauge.gauge_invariant);
  EXPECT_GT(gauge.value, 0.0);
  EXPECT_THROW(oracle_complete(three_known(), 1, {1, 1}), ArgumentError);
}

TEST(OracleComplete, MatchesTcaOnSupportedCells) {
  Rng rng(35);
  InstanceShape shape;
  shape.order = 3;
  shape.min_extent = 3;
  shape.max_extent = 5;
  shape.min_density = 0.6;
  for (int trial = 0; trial < 5; ++trial) {
    const auto t = random_full_support_tensor(rng, shape);
    for (int k = 1; k <= 2; ++k) {
      CompletionConfig cfg;
      cfg.scaling = tight();
      const auto model = tca(t, k, cfg);
      const LcspOracle o(t, k);
      IndexVector idx(3, 1);
      do {
        if (t.contains(idx)) continue;
        const auto c = o.complete(idx);
        EXPECT_TRUE(c.gauge_invariant);
        EXPECT_LT(std::abs(model.predict(idx) / c.value - 1.0), 1e-6);
      } while (advance_index(idx, t.extents()));
    }
  }
}

TEST(GaugeCheck, Examples) {
  const auto t = dense({2, 2}, 2.0);
  const auto base = csa(t, 1).scaling;
  const auto same = gauge_check(base, base, t);
  EXPECT_TRUE(same.equivalent);
  EXPECT_EQ(same.max_violation, 0.0);

  const double ln2 = std::log(2.0);
  std::vector<double> shifted(base.log_coeffs().begin(), base.log_coeffs().end());
  // Layout order: row 1, row 2, col 1, col 2.
  shifted[0] += ln2;
  shifted[1] += ln2;
  shifted[2] -= ln2;
  shifted[3] -= ln2;
  const auto ok = gauge_check(base, ScalingFamily(base.layout_ptr(), shifted), t);
  EXPECT_TRUE(ok.equivalent);
  EXPECT_LT(ok.max_violation, 1e-15);

  std::vector<double> broken(base.log_coeffs().begin(), base.log_coeffs().end());
  broken[0] += ln2;
  const auto bad = gauge_check(base, ScalingFamily(base.layout_ptr(), broken), t);
  EXPECT_FALSE(bad.equivalent);
  EXPECT_NEAR(bad.max_violation, ln2, 1e-15);
}

TEST(GaugeCheck, DifferentOrdersAreGauges) {
  Rng rng(36);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = random_tensor(rng, {5, 4, 3}, 0.6);
    auto o = tight();
    const auto a = csa(t, 2, o).scaling;
    o.group_order = {1, 2, 0};
    const auto b = csa(t, 2, o).scaling;
    EXPECT_TRUE(gauge_check(a, b, t).equivalent);
  }
}

TEST(GaugeCheck, MismatchIsArgumentError) {
  const auto t = dense({2, 2, 2});
  const auto a = csa(t, 2).scaling;
  const auto b = csa(t, 1).scaling;
  EXPECT_THROW(gauge_check(a, b, t), ArgumentError);
  EXPECT_THROW(gauge_check(a, a, dense({2, 2, 3})), ArgumentError);
}

TEST(SolveLcsp, MatchesCsaOnWideLayouts) {
  // C(5,2) = 10 groups: sweeps update entry values directly rather than
  // reading neighbour streams.
  Rng rng(37);
  const auto t = random_tensor(rng, {3, 3, 3, 3, 2}, 0.5);
  ASSERT_GT(SubtensorLayout(t, 2).group_count() * 9, CanonicalScaler::kMaxStreamWidth);
  const auto sol = solve_lcsp(t, 2);
  const auto r = csa(t, 2, tight());
  for (std::size_t e = 0; e < t.nnz(); ++e) {
    EXPECT_NEAR(std::log(r.canonical.value(e)), sol.canonical_logs[static_cast<Eigen::Index>(e)], 1e-8);
  }
  EXPECT_LT(residual(r.canonical, 2), 1e-8);
}
