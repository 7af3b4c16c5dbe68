#pragma once

// Optimal transport between discrete laws under squared Euclidean cost, and
// W2 barycenters.
//
// One-dimensional laws go through the quantile functions: the comonotone
// coupling is optimal and the barycenter is the law whose quantile function is
// the weighted average of the inputs'. Higher dimensions use the exact
// network simplex for couplings and a fixed-point iteration for barycenters.

#include <cstddef>
#include <span>
#include <vector>

#include "indimart/space.hpp"

namespace indimart {

struct CouplingCell {
  std::size_t source;  // atom index in the source law
  std::size_t target;  // atom index in the target law
  double mass;
};

class Coupling {
 public:
  // Validates positive masses and both marginals to within 1e-10.
  Coupling(DiscreteLaw source, DiscreteLaw target, std::vector<CouplingCell> cells);

  const DiscreteLaw& source() const { return source_; }
  const DiscreteLaw& target() const { return target_; }
  // Sorted by (source, target).
  const std::vector<CouplingCell>& cells() const { return cells_; }

  double cost() const;

 private:
  DiscreteLaw source_;
  DiscreteLaw target_;
  std::vector<CouplingCell> cells_;
};

double w2_sq(const DiscreteLaw& nu, const DiscreteLaw& mu);
Coupling optimal_coupling(const DiscreteLaw& nu, const DiscreteLaw& mu);

// The LP route, in any dimension. For m = 1 it must agree with the quantile
// route; tests use it as the cross-check.
Coupling lp_coupling(const DiscreteLaw& nu, const DiscreteLaw& mu);
double lp_w2_sq(const DiscreteLaw& nu, const DiscreteLaw& mu);

struct Barycenter {
  DiscreteLaw law;
  bool approximate = false;   // false for the exact one-dimensional formula
  std::size_t iterations = 0;
  double objective = 0.0;     // sum_i weight_i * W2^2(law, laws_i)
};

// Weights must be positive and sum to one.
Barycenter barycenter(std::span<const DiscreteLaw> laws, std::span<const double> weights);

double barycenter_objective(const DiscreteLaw& candidate, std::span<const DiscreteLaw> laws,
                            std::span<const double> weights);

// Limits of the multi-dimensional fixed-point iteration.
inline constexpr std::size_t kBarycenterMaxIterations = 50;
inline constexpr double kBarycenterTolerance = 1e-9;

}  // namespace indimart
