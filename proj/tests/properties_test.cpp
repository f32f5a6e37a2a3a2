#include <cmath>

#include <gtest/gtest.h>

#include "test_oracles.hpp"
#include "uctc/experiments.hpp"
#include "uctc/properties.hpp"

using namespace uctc;

namespace {

SparseTensor three_known() { return SparseTensor({2, 2}, {{{1, 1}, 1.0}, {{1, 2}, 2.0}, {{2, 1}, 3.0}}); }

CompletionConfig tight() {
  CompletionConfig c;
  c.scaling.epsilon = 1e-20;
  return c;
}

/// 3 users x 4 products: users 1-2 rate products 1-3, everyone rates 4.
SparseTensor ordering_example() {
  return SparseTensor({3, 4}, {{{1, 1}, 1.0},
                               {{1, 2}, 2.0},
                               {{1, 3}, 4.0},
                               {{2, 1}, 2.0},
                               {{2, 2}, 4.0},
                               {{2, 3}, 8.0},
                               {{1, 4}, 1.0},
                               {{2, 4}, 2.0},
                               {{3, 4}, 3.0}});
}

}  // namespace

TEST(PropertyReport, PassIffNoViolationsAndWithinTolerance) {
  PropertyReport r;
  r.tolerance = 1e-6;
  r.observe(1e-7, "a");
  EXPECT_TRUE(r.finalize().pass);
  r.observe(1e-5, "b");
  EXPECT_FALSE(r.finalize().pass);
  EXPECT_EQ(r.violation_count, 1u);

  PropertyReport q;
  q.observe_informational("unsupported", 5.0);
  EXPECT_TRUE(q.finalize().pass);
  EXPECT_EQ(q.metrics.at("unsupported"), 5.0);
}

TEST(PropertyReport, JsonRecordHasStableFields) {
  PropertyReport r;
  r.property = "x";
  r.seed = 3;
  r.finalize();
  const auto j = nlohmann::json::parse(to_json_line(r));
  EXPECT_EQ(j.at("record"), "property");
  EXPECT_EQ(j.at("property"), "x");
  EXPECT_EQ(j.at("seed"), 3);
  EXPECT_TRUE(j.at("pass").get<bool>());
  for (const char* key : {"instances", "max_deviation", "tolerance", "violations", "violation_count", "informational"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

TEST(UnitConsistency, IdentityScalingHasZeroDeviation) {
  const auto model = tca(three_known(), 1);
  const SubtensorScaling identity(1);
  const auto cells = missing_cells(three_known(), 100);
  const auto cmp = compare_scaled_completion(model, identity, cells, support_flags(three_known(), cells), {});
  EXPECT_EQ(cmp.supported_max, 0.0);
}

TEST(UnitConsistency, RowTwoTimesTen) {
  const auto model = tca(three_known(), 1, tight());
  SubtensorScaling s(1);
  s.set({{0}, {2}}, std::log(10.0));
  EXPECT_NEAR(tca(s.apply(three_known()), 1, tight()).predict({2, 2}), 60.0, 60e-9);
  const std::vector<IndexVector> cells{{2, 2}};
  const auto cmp = compare_scaled_completion(model, s, cells, {true}, tight());
  EXPECT_LT(cmp.supported_max, 1e-9);
}

TEST(UnitConsistency, RandomTensorsAllShapes) {
  Rng rng(41);
  struct Case {
    std::size_t d;
    int k;
  };
  for (const auto& c : {Case{2, 1}, Case{3, 2}, Case{3, 1}}) {
    InstanceShape shape;
    shape.order = c.d;
    shape.min_extent = 3;
    shape.max_extent = c.d == 2 ? 10 : 6;
    shape.min_density = 0.6;
    for (int trial = 0; trial < 3; ++trial) {
      const auto t = random_full_support_tensor(rng, shape);
      const auto r = check_unit_consistency(t, c.k, 10, 1e-6, 100 + trial, tight());
      EXPECT_TRUE(r.pass) << to_json_line(r);
      EXPECT_LT(r.max_deviation, 1e-6);
    }
  }
}

TEST(UnitConsistency, LargerCubeK2) {
  Rng rng(42);
  const Extents ext{10, 10, 8};
  SparseTensor t;
  do {
    t = random_tensor(rng, ext, 0.6);
  } while (!is_fully_supported(t).fully_supported);
  const auto r = check_unit_consistency(t, 2, 10, 1e-6, 42, tight());
  EXPECT_TRUE(r.pass) << to_json_line(r);
}

TEST(UnitConsistency, DeterministicGivenSeed) {
  Rng rng(43);
  const auto t = random_tensor(rng, {5, 5}, 0.6);
  const auto a = check_unit_consistency(t, 1, 5, 1e-6, 9);
  const auto b = check_unit_consistency(t, 1, 5, 1e-6, 9);
  EXPECT_EQ(to_json_line(a), to_json_line(b));
  EXPECT_EQ(a.seed, 9u);
}

TEST(ConsensusOrdering, RankOneExampleThreeUsers) {
  const auto t = ordering_example();
  const auto model = tca(t, 1, tight());
  const auto spec = make_ordering_spec(t, 1, {1, 2, 3});
  EXPECT_EQ(spec.common_support, (std::vector<IndexVector>{{1}, {2}}));
  const auto r = check_consensus_ordering(model, spec);
  EXPECT_TRUE(r.pass) << to_json_line(r);
  EXPECT_EQ(r.violation_count, 0u);
  EXPECT_NEAR(model.predict({3, 1}), 3.0, 3e-9);
  EXPECT_NEAR(model.predict({3, 2}), 6.0, 6e-9);
  EXPECT_NEAR(model.predict({3, 3}), 12.0, 12e-9);
  for (const auto& idx : std::vector<IndexVector>{{3, 1}, {3, 2}, {3, 3}}) {
    EXPECT_NEAR(model.predict(idx), oracle::projected_completion(t, 1, idx), 1e-6 * model.predict(idx));
  }
}

TEST(ConsensusOrdering, ProductAxisOrdering) {
  // Transposed view: products are dimension 0, and slices are users.
  const auto t = ordering_example();
  std::vector<SparseTensor::Entry> e;
  for (auto& [idx, v] : t.entries()) e.push_back({{idx[1], idx[0]}, v});
  const SparseTensor tt({4, 3}, e);
  const auto model = tca(tt, 1, tight());
  const auto r = check_consensus_ordering(model, make_ordering_spec(tt, 0, {1, 2, 3}));
  EXPECT_TRUE(r.pass);
}

TEST(ConsensusOrdering, SingleSliceIsVacuous) {
  const auto t = ordering_example();
  const auto r = check_consensus_ordering(tca(t, 1), make_ordering_spec(t, 0, {3}));
  EXPECT_TRUE(r.pass);
}

TEST(ConsensusOrdering, InvalidSpecsNameTheClause) {
  const auto t = ordering_example();
  try {
    make_ordering_spec(t, 0, {3, 1});
    FAIL();
  } catch (const SpecificationError& e) {
    EXPECT_EQ(e.clause(), SpecificationError::Clause::kSupportMismatch);
  }
  try {
    make_ordering_spec(t, 0, {2, 1});
    FAIL();
  } catch (const SpecificationError& e) {
    EXPECT_EQ(e.clause(), SpecificationError::Clause::kNotStrict);
  }
  try {
    make_ordering_spec(t, 0, {1, 1});
    FAIL();
  } catch (const SpecificationError& e) {
    EXPECT_EQ(e.clause(), SpecificationError::Clause::kMalformed);
  }
  EXPECT_THROW(make_ordering_spec(t, 5, {1, 2}), SpecificationError);
}

TEST(ConsensusOrdering, RandomPlantedChainsHold) {
  Rng rng(44);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    // Four ordered products rated by users 1..6, other products random.
    std::vector<SparseTensor::Entry> e;
    const int users = 10, products = 8;
    for (int user = 1; user <= users; ++user) {
      for (int p = 5; p <= products; ++p) {
        if (u(rng) < 0.7) e.push_back({{user, p}, std::exp(4.0 * u(rng) - 2.0)});
      }
      if (user <= 6) {
        double v = std::exp(u(rng));
        for (int p = 1; p <= 4; ++p) {
          e.push_back({{user, p}, v});
          v *= 1.0 + u(rng) + 0.01;
        }
      }
    }
    const SparseTensor t({users, products}, e);
    const auto model = tca(t, 1, tight());
    const auto r = check_consensus_ordering(model, make_ordering_spec(t, 1, {1, 2, 3, 4}));
    EXPECT_TRUE(r.pass) << to_json_line(r);
  }
}

TEST(FindConsensusSets, RecoversPlantedTriple) {
  ConsensusParams p;
  const auto r = run_consensus_experiment(p);
  EXPECT_TRUE(r.recovered_planted);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_EQ(r.control_users, 25u);
}

TEST(FindConsensusSets, UniqueSupportsGiveNothing) {
  // Each product column has its own support.
  const SparseTensor t({3, 3}, {{{1, 1}, 1.3}, {{2, 2}, 2.7}, {{1, 2}, 0.4}, {{3, 3}, 1.9}, {{2, 3}, 5.1}});
  EXPECT_TRUE(find_consensus_sets(t, 1).empty());
}

TEST(FindConsensusSets, IdenticalSlicesExcluded) {
  const SparseTensor t({2, 3}, {{{1, 1}, 2.0}, {{2, 1}, 3.0}, {{1, 2}, 2.0}, {{2, 2}, 3.0}, {{1, 3}, 2.0}, {{2, 3}, 3.0}});
  EXPECT_TRUE(find_consensus_sets(t, 1).empty());
}

TEST(FindConsensusSets, Deterministic) {
  const auto t = ordering_example();
  const auto a = find_consensus_sets(t, 0);
  const auto b = find_consensus_sets(t, 0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].gamma, b[i].gamma);
}

TEST(ScaleFairness, FactorOneChangesNothing) {
  Rng rng(45);
  const auto t = random_rating_matrix(rng, 8, 6, 0.6, 0.8);
  const auto r = check_scale_fairness(t, 0, 1, 1.0, tight());
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.max_deviation, 0.0);
}

TEST(ScaleFairness, TwoByTwoScalesTheSliceOnly) {
  const auto model = tca(three_known(), 1);
  SubtensorScaling s(1);
  s.set({{0}, {2}}, std::log(1.25));
  EXPECT_NEAR(tca(s.apply(three_known()), 1, tight()).predict({2, 2}), 7.5, 7.5e-9);
  const auto r = check_scale_fairness(three_known(), 0, 2, 1.25, tight());
  EXPECT_TRUE(r.pass) << to_json_line(r);
}

TEST(ScaleFairness, RandomRatingMatrix) {
  FairnessParams p;
  const auto r = run_fairness_experiment(p);
  EXPECT_TRUE(r.report.pass) << to_json_line(r.report);
  EXPECT_EQ(r.changed_predictions, 0u);
  EXPECT_EQ(r.changed_top_lists, 0u);
}

TEST(ScaleFairness, EmptySliceIsArgumentError) {
  const SparseTensor t({3, 2}, {{{1, 1}, 1.0}, {{2, 2}, 2.0}});
  EXPECT_THROW(check_scale_fairness(t, 0, 3, 1.25), ArgumentError);
}

TEST(GaugeUniqueness, DenseSymmetricIsTrivial) {
  const SparseTensor t({2, 2}, {{{1, 1}, 1.0}, {{1, 2}, 2.0}, {{2, 1}, 2.0}, {{2, 2}, 1.0}});
  const auto r = check_gauge_uniqueness(t, 1, 3, 1, tight());
  EXPECT_TRUE(r.pass);
  EXPECT_FALSE(r.informational);
}

TEST(GaugeUniqueness, TwoByTwoBothOrders) {
  for (std::vector<std::size_t> order : {std::vector<std::size_t>{0, 1}, std::vector<std::size_t>{1, 0}}) {
    CompletionConfig c = tight();
    c.scaling.group_order = order;
    EXPECT_NEAR(tca(three_known(), 1, c).predict({2, 2}), 6.0, 6e-9);
  }
  EXPECT_TRUE(check_gauge_uniqueness(three_known(), 1, 2, 1, tight()).pass);
}

TEST(GaugeUniqueness, RandomCube) {
  Rng rng(46);
  SparseTensor t;
  do {
    t = random_tensor(rng, {8, 8, 8}, 0.7);
  } while (!is_fully_supported(t).fully_supported);
  const auto r = check_gauge_uniqueness(t, 2, 5, 46, tight());
  EXPECT_TRUE(r.pass) << to_json_line(r);
  EXPECT_FALSE(r.informational);
}

TEST(GaugeUniqueness, NonFullSupportIsInformational) {
  const SparseTensor t({3, 3}, {{{1, 1}, 1.0}, {{1, 2}, 2.0}, {{2, 3}, 4.0}, {{3, 1}, 5.0}});
  const auto r = check_gauge_uniqueness(t, 1, 4, 1, tight());
  EXPECT_TRUE(r.informational);
  EXPECT_TRUE(r.pass);
}

TEST(KnownEntries, PreservedExactly) {
  Rng rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = random_tensor(rng, {5, 4, 3}, 0.5);
    for (int k = 1; k <= 2; ++k) EXPECT_TRUE(check_known_entries(tca(t, k)).pass);
  }
}

TEST(CanonicalForm, Check) {
  EXPECT_TRUE(check_canonical_form(three_known(), 1, tight()).pass);
  Rng rng(48);
  const auto t = random_tensor(rng, {6, 6}, 0.6);
  EXPECT_TRUE(check_canonical_form(t, 1, tight()).pass);
}

TEST(OracleEquivalence, Check) {
  Rng rng(49);
  InstanceShape shape;
  shape.min_extent = 4;
  shape.max_extent = 8;
  shape.min_density = 0.5;
  for (int trial = 0; trial < 5; ++trial) {
    const auto t = random_full_support_tensor(rng, shape);
    const auto r = check_oracle_equivalence(t, 1, tight());
    EXPECT_TRUE(r.pass) << to_json_line(r);
  }
}

TEST(ConsensusOrderingRelaxed, DifferingSupportsCheckedPairwise) {
  // Rank-one ratings x_u * y_p with x = (1,2,3,4), y = (1,2,5). Product 1 is
  // rated by users 1-3, product 2 by users 1-2; user 4 rated neither.
  const SparseTensor t({4, 3}, {{{1, 1}, 1.0},
                                {{2, 1}, 2.0},
                                {{3, 1}, 3.0},
                                {{1, 2}, 2.0},
                                {{2, 2}, 4.0},
                                {{3, 3}, 15.0},
                                {{4, 3}, 20.0}});
  EXPECT_THROW(make_ordering_spec(t, 1, {1, 2}), SpecificationError);
  const auto model = tca(t, 1, tight());
  const auto r = check_consensus_ordering_relaxed(model, 1, {1, 2});
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(r.informational);
  EXPECT_EQ(r.instances, 1u);  // user 4
  EXPECT_EQ(r.metrics.at("pairs_checked"), 1.0);
  EXPECT_EQ(r.metrics.at("order_breaks"), 0.0);
  EXPECT_NEAR(model.predict({4, 1}), 4.0, 4e-9);
  EXPECT_NEAR(model.predict({4, 2}), 8.0, 8e-9);
}

TEST(ConsensusOrderingRelaxed, UnorderedOrDisjointPairsAreSkipped) {
  const SparseTensor t({3, 3}, {{{1, 1}, 3.0}, {{1, 2}, 2.0}, {{2, 1}, 1.0}, {{3, 3}, 1.0}, {{2, 2}, 5.0}});
  const auto r = check_consensus_ordering_relaxed(tca(t, 1, tight()), 1, {1, 2, 3});
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.metrics.at("pairs_checked"), 0.0);
  EXPECT_EQ(r.notes.size(), 3u);
  EXPECT_THROW(check_consensus_ordering_relaxed(tca(t, 1), 1, {4}), ArgumentError);
}

TEST(ConsensusOrderingRelaxed, AgreesWithStrictCheckOnSharedSupport) {
  const auto t = ordering_example();
  const auto model = tca(t, 1, tight());
  const auto r = check_consensus_ordering_relaxed(model, 1, {1, 2, 3});
  EXPECT_EQ(r.metrics.at("pairs_checked"), 3.0);
  EXPECT_EQ(r.metrics.at("order_breaks"), 0.0);
  EXPECT_EQ(r.instances, 3u);
}
