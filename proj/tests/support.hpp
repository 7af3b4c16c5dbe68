#pragma once

#include <string>
#include <vector>

#include "indimart/decompose.hpp"
#include "indimart/space.hpp"

namespace support {

using namespace indimart;

inline std::vector<double> values(const RandomVector& X) {
  return std::vector<double>(X.values().begin(), X.values().end());
}

// The four-point space, uniform, with P_1 = {{1,2},{3,4}}.
inline WeightedSpace four_points() {
  return WeightedSpace({"1", "2", "3", "4"}, {0.25, 0.25, 0.25, 0.25});
}

inline Partition pairs() { return Partition::from_labels(std::vector<std::size_t>{0, 0, 1, 1}); }

inline Filtration worked_filtration() {
  return Filtration({Partition::trivial(4), pairs(), Partition::finest(4)});
}

// X_1 = (1,1,-1,-1), X_2 = X_1 + (-1,1,-2,2).
inline std::vector<RandomVector> worked_martingale() {
  return {RandomVector::scalar({1, 1, -1, -1}), RandomVector::scalar({0, 2, -3, 1})};
}

// Equal branch probabilities, Gaussian terminal values; (K, branching) cycle
// with the seed so every shape appears.
inline GeneratorOptions corpus_options(std::uint64_t seed) {
  GeneratorOptions g;
  g.seed = seed;
  g.K = 1 + (seed - 1) % 4;
  g.branching = g.K == 4 ? 2 : 2 + ((seed - 1) / 4) % 2;
  return g;
}

}  // namespace support
