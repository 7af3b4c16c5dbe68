#include <gtest/gtest.h>

#include <random>

#include "indimart/errors.hpp"
#include "indimart/network_simplex.hpp"
#include "indimart/transport.hpp"
#include "oracle.hpp"

using namespace indimart;

namespace {

DiscreteLaw line(std::vector<double> x, std::vector<double> p) { return DiscreteLaw(1, std::move(x), std::move(p)); }

DiscreteLaw random_line_law(std::mt19937_64& rng, std::size_t max_atoms, bool integer_grid = false) {
  std::uniform_int_distribution<std::size_t> count(1, max_atoms);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::normal_distribution<double> g(0.0, 3.0);
  std::uniform_int_distribution<int> grid(-4, 4);
  const std::size_t n = count(rng);
  std::vector<double> x(n), p(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = integer_grid ? grid(rng) : g(rng);
    p[i] = u(rng);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return line(x, p);
}

double objective(const DiscreteLaw& c, const std::vector<DiscreteLaw>& laws, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < laws.size(); ++i) s += w[i] * w2_sq(c, laws[i]);
  return s;
}

}  // namespace

TEST(W2, EqualLawsAreAtDistanceZero) {
  const auto nu = line({-1, 0.5, 2}, {0.2, 0.3, 0.5});
  EXPECT_EQ(w2_sq(nu, nu), 0.0);
}

TEST(W2, TwoPointExampleMatchesExhaustiveCouplings) {
  const auto nu = line({-1, 1}, {0.5, 0.5});
  const auto mu = line({-1.5, 1.5}, {0.5, 0.5});
  const double reference = oracle::two_by_two_w2_sq({-1, 1}, {0.5, 0.5}, {-1.5, 1.5}, {0.5, 0.5});
  EXPECT_NEAR(reference, 0.25, 1e-15);
  EXPECT_NEAR(w2_sq(nu, mu), reference, 1e-15);
}

TEST(W2, PointMassSourceGivesSecondMoment) {
  const auto mu = line({-2, 1, 3}, {0.25, 0.25, 0.5});
  EXPECT_NEAR(w2_sq(DiscreteLaw::point_mass({0.0}), mu), mu.second_moment(), 1e-14);
}

TEST(W2, DimensionMismatchIsDomainError) {
  const auto a = DiscreteLaw::point_mass({0.0});
  const auto b = DiscreteLaw::point_mass({0.0, 1.0});
  EXPECT_THROW(w2_sq(a, b), DomainError);
  EXPECT_THROW(optimal_coupling(a, b), DomainError);
}

TEST(W2, RandomTwoAtomLawsMatchTheCouplingPolytope) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 2.0);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 500; ++trial) {
    std::array<double, 2> x{g(rng), g(rng)}, y{g(rng), g(rng)};
    const double p = u(rng), q = u(rng);
    if (std::abs(x[0] - x[1]) < 1e-6 || std::abs(y[0] - y[1]) < 1e-6) continue;
    const double reference = oracle::two_by_two_w2_sq(x, {p, 1 - p}, y, {q, 1 - q});
    const double got = w2_sq(line({x[0], x[1]}, {p, 1 - p}), line({y[0], y[1]}, {q, 1 - q}));
    EXPECT_NEAR(got, reference, 1e-10);
  }
}

TEST(W2, MultiDimensionalLpMatchesPermutationSearch) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 6;
    const std::size_t m = 2 + trial % 2;
    std::vector<std::vector<double>> x(n, std::vector<double>(m)), y(n, std::vector<double>(m));
    std::vector<double> fx, fy;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < m; ++d) {
        x[i][d] = g(rng);
        y[i][d] = g(rng);
        fx.push_back(x[i][d]);
        fy.push_back(y[i][d]);
      }
    }
    const std::vector<double> mass(n, 1.0 / static_cast<double>(n));
    const DiscreteLaw nu(m, fx, mass), mu(m, fy, mass);
    EXPECT_NEAR(w2_sq(nu, mu), oracle::uniform_w2_sq(x, y), 1e-10);
  }
}

TEST(OptimalCoupling, EqualLawsGiveDiagonal) {
  const auto nu = line({1, 4}, {0.5, 0.5});
  const Coupling c = optimal_coupling(nu, nu);
  ASSERT_EQ(c.cells().size(), 2u);
  EXPECT_EQ(c.cells()[0].source, 0u);
  EXPECT_EQ(c.cells()[0].target, 0u);
  EXPECT_NEAR(c.cells()[0].mass, 0.5, 1e-15);
  EXPECT_EQ(c.cells()[1].source, 1u);
  EXPECT_EQ(c.cells()[1].target, 1u);
}

TEST(OptimalCoupling, TwoPointExampleIsMonotone) {
  const Coupling c = optimal_coupling(line({-1, 1}, {0.5, 0.5}), line({-1.5, 1.5}, {0.5, 0.5}));
  ASSERT_EQ(c.cells().size(), 2u);
  EXPECT_EQ(c.target().location(c.cells()[0].target)[0], -1.5);
  EXPECT_EQ(c.target().location(c.cells()[1].target)[0], 1.5);
  EXPECT_NEAR(c.cells()[0].mass, 0.5, 1e-15);
  EXPECT_NEAR(c.cost(), 0.25, 1e-15);
}

TEST(OptimalCoupling, PointMassSourceSplits) {
  const Coupling c = optimal_coupling(DiscreteLaw::point_mass({0.0}), line({-1, 1}, {0.5, 0.5}));
  ASSERT_EQ(c.cells().size(), 2u);
  EXPECT_NEAR(c.cells()[0].mass, 0.5, 1e-15);
  EXPECT_NEAR(c.cells()[1].mass, 0.5, 1e-15);
}

TEST(OptimalCoupling, RejectsBadMarginals) {
  const auto nu = line({0, 1}, {0.5, 0.5});
  EXPECT_THROW(Coupling(nu, nu, {{0, 0, 0.5}, {1, 1, 0.4}}), InvariantError);
  EXPECT_THROW(Coupling(nu, nu, {{0, 0, 0.5}, {1, 1, 0.5}, {0, 1, 0.0}}), InvariantError);
}

TEST(TransportProperties, SymmetryCostAndMarginals) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto nu = random_line_law(rng, 8, trial % 2 == 0);
    const auto mu = random_line_law(rng, 8, trial % 3 == 0);
    EXPECT_NEAR(w2_sq(nu, mu), w2_sq(mu, nu), 1e-10);
    const Coupling c = optimal_coupling(nu, mu);
    EXPECT_NEAR(c.cost(), w2_sq(nu, mu), 1e-10);
    std::vector<double> rows(nu.size(), 0.0), cols(mu.size(), 0.0);
    for (const auto& cell : c.cells()) {
      EXPECT_GT(cell.mass, 0.0);
      rows[cell.source] += cell.mass;
      cols[cell.target] += cell.mass;
    }
    for (std::size_t i = 0; i < nu.size(); ++i) EXPECT_NEAR(rows[i], nu.mass(i), 1e-10);
    for (std::size_t j = 0; j < mu.size(); ++j) EXPECT_NEAR(cols[j], mu.mass(j), 1e-10);
  }
}

TEST(TransportProperties, ComonotoneAgreesWithLp) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto nu = random_line_law(rng, 8, trial % 4 == 0);
    const auto mu = random_line_law(rng, 8);
    EXPECT_NEAR(w2_sq(nu, mu), lp_w2_sq(nu, mu), 1e-10);
  }
}

TEST(NetworkSimplex, SolvesDegenerateAndRectangularProblems) {
  // Identical marginals and ties everywhere: many degenerate pivots.
  const std::vector<double> supply(5, 0.2), demand(5, 0.2), zero(25, 0.0);
  const auto tied = solve_transport(supply, demand, zero);
  EXPECT_NEAR(tied.cost, 0.0, 1e-15);

  const std::vector<double> s{0.5, 0.5}, d{0.25, 0.25, 0.5};
  const std::vector<double> cost{0, 1, 4, 4, 1, 0};
  const auto r = solve_transport(s, d, cost);
  double total = 0.0;
  for (const auto& f : r.flows) total += f.mass;
  EXPECT_NEAR(total, 1.0, 1e-14);
  EXPECT_NEAR(r.cost, 0.25, 1e-14);  // 0->0 .25, 0->1 .25, 1->2 .5
}

TEST(NetworkSimplex, RejectsUnbalancedInput) {
  const std::vector<double> s{0.5, 0.5}, d{0.6, 0.6}, cost(4, 1.0);
  EXPECT_THROW(solve_transport(s, d, cost), DomainError);
}

TEST(Barycenter, EqualLawsGiveThatLaw) {
  const auto L = line({-2, 0, 3}, {0.3, 0.3, 0.4});
  const std::vector<DiscreteLaw> laws{L, L, L};
  const Barycenter b = barycenter(laws, std::vector<double>{0.2, 0.3, 0.5});
  EXPECT_TRUE(approx_equal(b.law, L, 1e-12));
  EXPECT_FALSE(b.approximate);
}

TEST(Barycenter, SingleLawIsItself) {
  const auto L = line({-1, 4}, {0.8, 0.2});
  const Barycenter b = barycenter(std::vector<DiscreteLaw>{L}, std::vector<double>{1.0});
  EXPECT_TRUE(approx_equal(b.law, L, 1e-12));
}

TEST(Barycenter, TwoSymmetricLawsMatchGridSearch) {
  const std::vector<DiscreteLaw> laws{line({-1, 1}, {0.5, 0.5}), line({-2, 2}, {0.5, 0.5})};
  const std::vector<double> w{0.5, 0.5};
  const Barycenter b = barycenter(laws, w);
  ASSERT_EQ(b.law.size(), 2u);
  EXPECT_NEAR(b.law.location(0)[0], -1.5, 1e-15);
  EXPECT_NEAR(b.law.location(1)[0], 1.5, 1e-15);

  // Grid search over two-atom candidates a < c with masses on a 0.05 grid.
  double best = 1e300, best_a = 0, best_c = 0;
  for (int i = -30; i <= 30; ++i) {
    for (int j = i + 1; j <= 30; ++j) {
      for (int k = 1; k < 20; ++k) {
        const double a = i * 0.1, c = j * 0.1, p = k * 0.05;
        const double v = 0.5 * w2_sq(line({a, c}, {p, 1 - p}), laws[0]) +
                         0.5 * w2_sq(line({a, c}, {p, 1 - p}), laws[1]);
        if (v < best) {
          best = v;
          best_a = a;
          best_c = c;
        }
      }
    }
  }
  EXPECT_NEAR(best_a, -1.5, 1e-9);
  EXPECT_NEAR(best_c, 1.5, 1e-9);
  EXPECT_LE(b.objective, best + 1e-12);
}

TEST(Barycenter, BeatsRandomCandidates) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<DiscreteLaw> laws{random_line_law(rng, 4), random_line_law(rng, 4)};
    const double a = u(rng);
    const std::vector<double> w{a, 1 - a};
    const Barycenter b = barycenter(laws, w);
    const double best = objective(b.law, laws, w);
    for (int c = 0; c < 200; ++c) {
      EXPECT_LE(best, objective(random_line_law(rng, 6), laws, w) + 1e-8);
    }
  }
}

TEST(Barycenter, RejectsBadWeights) {
  const std::vector<DiscreteLaw> laws{line({0}, {1}), line({1}, {1})};
  EXPECT_THROW(barycenter(laws, std::vector<double>{0.5}), DomainError);
  EXPECT_THROW(barycenter(laws, std::vector<double>{0.5, 0.6}), DomainError);
  EXPECT_THROW(barycenter(laws, std::vector<double>{1.0, 0.0}), DomainError);
  const std::vector<DiscreteLaw> mixed{line({0}, {1}), DiscreteLaw::point_mass({0.0, 0.0})};
  EXPECT_THROW(barycenter(mixed, std::vector<double>{0.5, 0.5}), DomainError);
}

TEST(Barycenter, MultiDimensionalIsFlaggedAndImproves) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<DiscreteLaw> laws;
    for (int l = 0; l < 3; ++l) {
      std::vector<double> x(4 * 2);
      for (double& v : x) v = g(rng);
      laws.emplace_back(2, x, std::vector<double>(4, 0.25));
    }
    const std::vector<double> w{0.2, 0.3, 0.5};
    const Barycenter b = barycenter(laws, w);
    EXPECT_TRUE(b.approximate);
    EXPECT_NEAR(b.objective, barycenter_objective(b.law, laws, w), 1e-10);

    // The weighted mean of the inputs is preserved.
    std::vector<double> mean(2, 0.0);
    for (std::size_t l = 0; l < 3; ++l) {
      const auto ml = laws[l].mean();
      for (int d = 0; d < 2; ++d) mean[d] += w[l] * ml[d];
    }
    const auto mb = b.law.mean();
    EXPECT_NEAR(mb[0], mean[0], 1e-10);
    EXPECT_NEAR(mb[1], mean[1], 1e-10);

    // No worse than any single input law as a candidate.
    for (const auto& L : laws) EXPECT_LE(b.objective, barycenter_objective(L, laws, w) + 1e-10);
  }
}
