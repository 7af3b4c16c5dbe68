#include <gtest/gtest.h>

#include <random>

#include "indimart/errors.hpp"
#include "indimart/space.hpp"
#include "support.hpp"

using namespace indimart;
using support::values;

namespace {

struct RandomSetup {
  WeightedSpace space;
  Partition coarse;
  Partition fine;
  RandomVector X;
};

RandomSetup random_setup(std::mt19937_64& rng, std::size_t m = 1) {
  std::uniform_int_distribution<std::size_t> size(2, 12);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::normal_distribution<double> g(0.0, 2.0);
  const std::size_t n = size(rng);
  std::vector<std::string> ids;
  std::vector<double> w;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("w" + std::to_string(i));
    w.push_back(u(rng));
    total += w.back();
  }
  for (double& x : w) x /= total;
  std::uniform_int_distribution<std::size_t> coarse_label(0, 2);
  std::uniform_int_distribution<std::size_t> split(0, 1);
  std::vector<std::size_t> coarse(n), fine(n);
  for (std::size_t i = 0; i < n; ++i) {
    coarse[i] = coarse_label(rng);
    fine[i] = coarse[i] * 2 + split(rng);
  }
  std::vector<double> v(n * m);
  for (double& x : v) x = g(rng);
  return RandomSetup{WeightedSpace(ids, w), Partition::from_labels(coarse),
                     Partition::from_labels(fine), RandomVector(m, v)};
}

double max_abs_diff(const RandomVector& a, const RandomVector& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  }
  return worst;
}

}  // namespace

TEST(WeightedSpace, RejectsZeroWeight) {
  EXPECT_THROW(WeightedSpace({"a", "b"}, {1.0, 0.0}), InvariantError);
}

TEST(WeightedSpace, RejectsWeightsNotSummingToOne) {
  EXPECT_THROW(WeightedSpace({"a", "b"}, {0.5, 0.4}), InvariantError);
}

TEST(WeightedSpace, RejectsDuplicateIds) {
  EXPECT_THROW(WeightedSpace({"a", "a"}, {0.5, 0.5}), InvariantError);
}

TEST(WeightedSpace, FindsPointsById) {
  const WeightedSpace s({"x", "y"}, {0.25, 0.75});
  EXPECT_EQ(s.find("y"), std::optional<std::size_t>(1));
  EXPECT_FALSE(s.find("z").has_value());
}

TEST(Partition, FromBlocksValidatesCover) {
  EXPECT_THROW(Partition::from_blocks(3, {{0, 1}}), InvariantError);
  EXPECT_THROW(Partition::from_blocks(3, {{0, 1}, {1, 2}}), InvariantError);
  EXPECT_THROW(Partition::from_blocks(2, {{0, 1}, {}}), InvariantError);
  EXPECT_THROW(Partition::from_blocks(2, {{0, 5}}), DomainError);
  EXPECT_EQ(Partition::from_blocks(3, {{2}, {0, 1}}).block_count(), 2u);
}

TEST(Partition, LabelsAreCanonical) {
  const auto a = Partition::from_labels(std::vector<std::size_t>{7, 7, 3});
  const auto b = Partition::from_labels(std::vector<std::size_t>{0, 0, 1});
  EXPECT_EQ(a, b);
}

TEST(Partition, JoinIsCoarsestCommonRefinement) {
  const auto a = Partition::from_labels(std::vector<std::size_t>{0, 0, 1, 1});
  const auto b = Partition::from_labels(std::vector<std::size_t>{0, 1, 1, 1});
  const auto j = join(a, b);
  EXPECT_EQ(j.block_count(), 3u);
  EXPECT_TRUE(j.refines(a));
  EXPECT_TRUE(j.refines(b));
}

TEST(Filtration, RequiresTrivialStartAndRefinement) {
  EXPECT_THROW(Filtration({Partition::finest(2), Partition::finest(2)}), InvariantError);
  const auto a = Partition::from_labels(std::vector<std::size_t>{0, 0, 1});
  const auto b = Partition::from_labels(std::vector<std::size_t>{0, 1, 1});
  EXPECT_THROW(Filtration({Partition::trivial(3), a, b}), InvariantError);
  EXPECT_NO_THROW(Filtration({Partition::trivial(3), a, Partition::finest(3)}));
}

TEST(CondExp, TrivialPartitionGivesMean) {
  const auto s = WeightedSpace::uniform(2);
  const auto e = cond_exp(RandomVector::scalar({1, 3}), Partition::trivial(2), s);
  EXPECT_EQ(values(e), (std::vector<double>{2, 2}));
}

TEST(CondExp, FinestPartitionIsIdentity) {
  const auto s = WeightedSpace({"a", "b", "c"}, {0.2, 0.3, 0.5});
  const auto X = RandomVector::scalar({4, -1, 2.5});
  EXPECT_EQ(cond_exp(X, Partition::finest(3), s), X);
}

TEST(CondExp, BlockMeansOfWorkedIncrement) {
  const auto e = cond_exp(RandomVector::scalar({-1, 1, -2, 2}), support::pairs(), support::four_points());
  EXPECT_EQ(values(e), (std::vector<double>{0, 0, 0, 0}));
}

TEST(CondExp, MismatchedSizesAreDomainErrors) {
  EXPECT_THROW(cond_exp(RandomVector::scalar({1, 2}), Partition::trivial(3), WeightedSpace::uniform(3)),
               DomainError);
}

TEST(ConditionalLaw, RenormalisedRestriction) {
  const std::vector<std::size_t> block{0, 1};
  const auto law = conditional_law(RandomVector::scalar({-1, 1, -2, 2}), block, support::four_points());
  ASSERT_EQ(law.size(), 2u);
  EXPECT_EQ(law.location(0)[0], -1.0);
  EXPECT_EQ(law.location(1)[0], 1.0);
  EXPECT_NEAR(law.mass(0), 0.5, 1e-15);
}

TEST(ConditionalLaw, ConstantOnBlockIsPointMass) {
  const std::vector<std::size_t> block{1, 2};
  const auto law = conditional_law(RandomVector::scalar({0, 7, 7}), block, WeightedSpace::uniform(3));
  ASSERT_EQ(law.size(), 1u);
  EXPECT_EQ(law.location(0)[0], 7.0);
}

TEST(ConditionalLaw, CoincidentAtomsMerge) {
  const WeightedSpace s({"1", "2", "3"}, {0.1, 0.3, 0.6});
  const std::vector<std::size_t> block{0, 1};
  const auto law = conditional_law(RandomVector::scalar({5, 5, 0}), block, s);
  ASSERT_EQ(law.size(), 1u);
  EXPECT_EQ(law.location(0)[0], 5.0);
  EXPECT_NEAR(law.mass(0), 1.0, 1e-15);
}

TEST(ConditionalLaw, EmptyBlockIsDomainError) {
  EXPECT_THROW(conditional_law(RandomVector::scalar({1}), std::vector<std::size_t>{}, WeightedSpace::uniform(1)),
               DomainError);
}

TEST(Law, Examples) {
  const auto two = law(RandomVector::scalar({-1, 1}), WeightedSpace::uniform(2));
  ASSERT_EQ(two.size(), 2u);
  EXPECT_NEAR(two.mass(1), 0.5, 1e-15);

  const auto constant = law(RandomVector::scalar({3, 3, 3}), WeightedSpace::uniform(3));
  EXPECT_EQ(constant.size(), 1u);

  const auto merged = law(RandomVector::scalar({0, 0, 1}), WeightedSpace({"a", "b", "c"}, {0.25, 0.25, 0.5}));
  ASSERT_EQ(merged.size(), 2u);
  EXPECT_NEAR(merged.mass(0), 0.5, 1e-15);
  EXPECT_NEAR(merged.mass(1), 0.5, 1e-15);
}

TEST(DiscreteLaw, MergesWithinToleranceAtWeightedMean) {
  const DiscreteLaw law(1, {1.0, 1.0 + 4e-10, 3.0}, {0.25, 0.25, 0.5});
  ASSERT_EQ(law.size(), 2u);
  EXPECT_NEAR(law.location(0)[0], 1.0 + 2e-10, 1e-15);
  EXPECT_NEAR(law.mass(0), 0.5, 1e-15);
}

TEST(DiscreteLaw, RejectsBadMasses) {
  EXPECT_THROW(DiscreteLaw(1, {0.0, 1.0}, {0.5, 0.4}), InvariantError);
  EXPECT_THROW(DiscreteLaw(1, {0.0, 1.0}, {1.0, 0.0}), InvariantError);
}

TEST(Refine, IdentityKeepsSpace) {
  const auto s = WeightedSpace({"a", "b"}, {0.4, 0.6});
  const auto r = refine(s, Refinement::identity(s));
  EXPECT_EQ(r.ids(), s.ids());
  EXPECT_EQ(r.weight(1), 0.6);
}

TEST(Refine, SplitsIntoChildren) {
  const auto s = WeightedSpace::uniform(1);
  const auto r = refine(s, Refinement({0, 0}, {0.5, 0.5}));
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r.id(0), "0.0");
  EXPECT_EQ(r.id(1), "0.1");
  EXPECT_EQ(r.weight(0), 0.5);
}

TEST(Refine, ConservesWeightOfSplitPoint) {
  const auto s = WeightedSpace({"a", "b"}, {0.6, 0.4});
  const auto r = refine(s, Refinement({0, 0, 1}, {0.2, 0.4, 0.4}));
  EXPECT_NEAR(r.weight(0) + r.weight(1), 0.6, 1e-15);
  EXPECT_THROW(refine(s, Refinement({0, 0, 1}, {0.2, 0.3, 0.4})), InvariantError);
  EXPECT_THROW(refine(s, Refinement({0}, {0.6})), InvariantError);
}

TEST(Lift, ConstantStaysConstant) {
  const auto r = Refinement({0, 0, 1}, {0.25, 0.25, 0.5});
  EXPECT_EQ(values(lift(RandomVector::scalar({2, 2}), r)), (std::vector<double>{2, 2, 2}));
}

TEST(Lift, TrivialPartitionMeanIsPreserved) {
  const auto s = WeightedSpace({"a", "b"}, {0.5, 0.5});
  const auto r = Refinement({0, 0, 1}, {0.1, 0.4, 0.5});
  const auto X = RandomVector::scalar({1, 3});
  const auto fine = refine(s, r);
  const auto e = cond_exp(lift(X, r), lift(Partition::trivial(2), r), fine);
  EXPECT_NEAR(e.values()[0], 2.0, 1e-15);
}

TEST(Lift, UnknownParentIsDomainError) {
  EXPECT_THROW(lift(RandomVector::scalar({1}), Refinement({0, 1}, {0.5, 0.5})), DomainError);
}

TEST(Lift, FiltrationStaysRefining) {
  const auto F = support::worked_filtration();
  const auto r = Refinement({0, 1, 1, 2, 3}, {0.25, 0.125, 0.125, 0.25, 0.25});
  const auto G = lift(F, r);
  EXPECT_EQ(G.points(), 5u);
  EXPECT_EQ(G.at(1).block_count(), 2u);
  EXPECT_EQ(G.at(2).block_count(), 4u);
}

TEST(Martingale, ZeroProcessHasNoDefect) {
  const auto F = support::worked_filtration();
  const std::vector<RandomVector> X{RandomVector(4, 1), RandomVector(4, 1)};
  EXPECT_EQ(is_martingale(X, F, support::four_points(), 1e-12), 0.0);
}

TEST(Martingale, MeanZeroFirstStep) {
  const Filtration F({Partition::trivial(2), Partition::finest(2)});
  const std::vector<RandomVector> X{RandomVector::scalar({-1, 1})};
  EXPECT_EQ(is_martingale(X, F, WeightedSpace::uniform(2), 1e-12), 0.0);
}

TEST(Martingale, NonzeroMeanIsDefect) {
  const Filtration F({Partition::trivial(2), Partition::finest(2)});
  const std::vector<RandomVector> X{RandomVector::scalar({1, 1})};
  EXPECT_EQ(is_martingale(X, F, WeightedSpace::uniform(2), 1e-12), 1.0);
}

TEST(Martingale, NonMeasurableValueThrows) {
  const Filtration F({Partition::trivial(2), Partition::trivial(2)});
  const std::vector<RandomVector> X{RandomVector::scalar({-1, 1})};
  EXPECT_THROW(is_martingale(X, F, WeightedSpace::uniform(2), 1e-12), MeasurabilityError);
}

TEST(Martingale, WorkedExampleIsMartingale) {
  const auto X = support::worked_martingale();
  EXPECT_EQ(is_martingale(X, support::worked_filtration(), support::four_points(), 1e-12), 0.0);
}

TEST(SpaceProperties, ProjectionTowerMeanPythagoras) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const RandomSetup s = random_setup(rng, 1 + trial % 3);
    const auto e = cond_exp(s.X, s.coarse, s.space);
    EXPECT_LE(max_abs_diff(cond_exp(e, s.coarse, s.space), e), 1e-12);

    const auto tower = cond_exp(cond_exp(s.X, s.fine, s.space), s.coarse, s.space);
    EXPECT_LE(max_abs_diff(tower, e), 1e-12);

    const auto m0 = mean(s.X, s.space);
    const auto m1 = mean(e, s.space);
    for (std::size_t d = 0; d < m0.size(); ++d) EXPECT_NEAR(m0[d], m1[d], 1e-12);

    const double lhs = norm_sq(s.X, s.space);
    const double rhs = norm_sq(e, s.space) + norm_sq(s.X - e, s.space);
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(SpaceProperties, LiftPreservesLaw) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> children(1, 3);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const RandomSetup s = random_setup(rng, 1 + trial % 2);
    std::vector<std::size_t> parent;
    std::vector<double> cw;
    for (std::size_t p = 0; p < s.space.size(); ++p) {
      const int c = children(rng);
      std::vector<double> parts(c);
      double total = 0.0;
      for (double& x : parts) total += (x = u(rng));
      for (double x : parts) {
        parent.push_back(p);
        cw.push_back(s.space.weight(p) * x / total);
      }
    }
    const Refinement r(parent, cw);
    const auto fine = refine(s.space, r);
    EXPECT_TRUE(approx_equal(law(lift(s.X, r), fine), law(s.X, s.space), 1e-12));
  }
}
